//! Preloaded parameter sets for the four reproduction figures.
//!
//! Each figure is a list of configs, one per curve family. `quick` trims
//! the sensor counts and curve values to sizes that finish in minutes on a
//! single core.

use ringcal_core::StructuredMode;
use serde_json::json;

use crate::config::{ExperimentConfig, Method, SweepSpec, SweepVariable};
use crate::units::{Duration, Length};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Noiseless error against `n` for several ring widths.
    NoiselessWidths,
    /// Noisy error against `n` for several noise levels.
    NoiseLevels,
    /// Pipeline against MDS-MAP and SVD-Reconstruct.
    Baselines,
    /// Recovery of an unknown constant delay.
    DelayRecovery,
}

impl Figure {
    pub fn tag(self) -> &'static str {
        match self {
            Figure::NoiselessWidths => "fig5",
            Figure::NoiseLevels => "fig6",
            Figure::Baselines => "fig7",
            Figure::DelayRecovery => "fig8",
        }
    }
}

fn n_sweep(values: &[usize]) -> Option<SweepSpec> {
    Some(SweepSpec {
        variable: SweepVariable::N,
        values: values.iter().map(|&n| json!(n)).collect(),
    })
}

fn base(name: String) -> ExperimentConfig {
    ExperimentConfig {
        name,
        r0: Length(0.1),
        a: Length(0.01),
        delta: 1.0,
        p_miss: 0.05,
        sigma: Length(0.0),
        trials: 10,
        mode: StructuredMode::Practical.as_str().to_string(),
        gnuplot: true,
        ..ExperimentConfig::default()
    }
}

/// `δ` such that `δ_n = δ·r0·sqrt(ln n / n)` equals `radius`.
pub fn delta_for_radius(n: usize, r0: f64, radius: f64) -> f64 {
    let nf = n as f64;
    radius / (r0 * (nf.ln() / nf).sqrt())
}

pub fn configs(figure: Figure, quick: bool) -> Vec<ExperimentConfig> {
    let long_ns: Vec<usize> = (0..7).map(|k| 200 + 250 * k).collect();
    let short_ns = [200, 400, 800];
    let ns: &[usize] = if quick { &short_ns } else { &long_ns };
    match figure {
        Figure::NoiselessWidths => {
            let widths_mm: &[f64] = if quick { &[2.0, 20.0] } else { &[2.0, 5.0, 10.0, 20.0] };
            widths_mm
                .iter()
                .map(|&mm| ExperimentConfig {
                    a: Length(mm / 1e3),
                    sweep: n_sweep(ns),
                    ..base(format!("fig5-a{mm}mm"))
                })
                .collect()
        }
        Figure::NoiseLevels => {
            let sigmas_mm: &[f64] = if quick { &[0.6, 10.0] } else { &[0.6, 3.0, 6.0, 10.0] };
            let ns: &[usize] = if quick { &[200, 800] } else { ns };
            sigmas_mm
                .iter()
                .map(|&mm| ExperimentConfig {
                    sigma: Length(mm / 1e3),
                    sweep: n_sweep(ns),
                    ..base(format!("fig6-sigma{mm}mm"))
                })
                .collect()
        }
        Figure::Baselines => {
            let ns: &[usize] = if quick { &[50, 100, 400] } else { &[25, 50, 100, 200, 400, 800, 1600] };
            vec![ExperimentConfig {
                sigma: Length(0.6e-3),
                sweep: n_sweep(ns),
                methods: vec![Method::Optspace, Method::MdsMap, Method::SvdReconstruct],
                ..base("fig7".to_string())
            }]
        }
        Figure::DelayRecovery => {
            let mut cfg = ExperimentConfig {
                n: 200,
                t0: Some(Duration(10e-6)),
                c0: 1500.0,
                delta: delta_for_radius(200, 0.1, 0.03),
                methods: vec![Method::OptspaceDelay],
                gnuplot: false,
                ..base("fig8".to_string())
            };
            cfg.delay_search.d_max = Some(Length(0.05));
            cfg.delay_search.grid_size = 51;
            vec![cfg]
        }
    }
}
