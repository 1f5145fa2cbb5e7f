//! Grid search for the unknown constant delay `d0 = c0·t0`.
//!
//! For each candidate the candidate is subtracted from every measured
//! off-diagonal entry, the result is squared, completed at rank 4 and
//! embedded in the plane. The candidate is scored by how well the embedded
//! distances plus the candidate reproduce the raw measurements on `E ∩ S^⊥`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::completion::{optspace_complete, CompletionError, CompletionOptions, CompletionResult, DescentMetric};
use crate::embedding::{classical_mds, PositionEstimate, Source};
use crate::geometry::SquaredDistanceMatrix;
use crate::observation::ObservationSet;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("invalid delay search configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no measured entries outside the structured set")]
    NoMeasurements,
    #[error("every delay candidate failed to complete")]
    AllCandidatesFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySearchConfig {
    pub d_min: f64,
    pub d_max: f64,
    /// Number of grid points per level.
    pub grid_size: usize,
    /// Add one finer level between the neighbours of the coarse winner.
    pub refine: bool,
    pub completion: CompletionOptions,
}

impl DelaySearchConfig {
    /// `[0, r0/2]` with 101 points and one refinement level. Completions use
    /// the scaled descent metric, which reaches an exact fit at the true
    /// delay on noiseless data and so gives a sharply resolved minimum.
    pub fn for_radius(r0: f64) -> Self {
        Self {
            d_min: 0.0,
            d_max: 0.5 * r0,
            grid_size: 101,
            refine: true,
            completion: CompletionOptions {
                metric: DescentMetric::Scaled,
                ..CompletionOptions::default()
            },
        }
    }

    fn validate(&self) -> Result<(), DelayError> {
        if !(self.d_min <= self.d_max) || !self.d_min.is_finite() || !self.d_max.is_finite() {
            return Err(DelayError::InvalidConfig("need finite d_min <= d_max"));
        }
        if self.grid_size < 2 {
            return Err(DelayError::InvalidConfig("grid size must be at least 2"));
        }
        Ok(())
    }
}

/// Evenly spaced grid from `lo` to `hi` inclusive.
pub fn candidate_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return alloc::vec![lo];
    }
    let step = (hi - lo) / (size - 1) as f64;
    (0..size)
        .map(|k| if k + 1 == size { hi } else { lo + step * k as f64 })
        .collect()
}

/// One candidate's completion, embedding and score.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFit {
    pub candidate: f64,
    pub cost: f64,
    pub completion: CompletionResult,
    pub positions: PositionEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySearchResult {
    pub d0_hat: f64,
    /// Every evaluated `(candidate, cost)`, coarse level first; failed
    /// candidates carry `+∞`.
    pub costs: Vec<(f64, f64)>,
    pub coarse_best: (f64, f64),
    /// Spacing of the finest grid that was evaluated.
    pub resolution: f64,
    pub best_completion: CompletionResult,
    pub best_positions: PositionEstimate,
}

/// `Σ_{(i,j)∈E∩S^⊥} (candidate + ‖X_i − X_j‖ − N_ij)²`.
pub fn delay_cost(candidate: f64, positions: &PositionEstimate, obs: &ObservationSet) -> f64 {
    obs.measured()
        .iter()
        .map(|(i, j)| {
            let r = candidate + positions.distance(i, j) - obs.values[(i, j)];
            r * r
        })
        .sum()
}

/// Squared, delay-corrected observations for one candidate. Entries that
/// turn negative after the subtraction are squared as they are.
pub fn corrected_squares(obs: &ObservationSet, candidate: f64) -> DMatrix<f64> {
    let measured = obs.measured();
    let n = obs.dim();
    DMatrix::from_fn(n, n, |i, j| {
        if measured.contains(i, j) {
            let v = obs.values[(i, j)] - candidate;
            v * v
        } else {
            0.0
        }
    })
}

/// Completes and embeds the observations for a single candidate.
pub fn fit_candidate(
    obs: &ObservationSet,
    completion: &CompletionOptions,
    candidate: f64,
    index: u64,
) -> Result<CandidateFit, CompletionError> {
    let squares = corrected_squares(obs, candidate);
    let opts = CompletionOptions {
        trim_seed: seed::derive(completion.trim_seed, "delay-candidate", index),
        ..*completion
    };
    let completion = optspace_complete(&squares, &obs.completion_mask(), &opts)?;
    let mds = classical_mds(&SquaredDistanceMatrix(completion.estimate.clone()), 2)
        .expect("n >= 2 for any nonempty mask");
    let positions = PositionEstimate {
        coords: mds.estimate.coords,
        source: Source::Pipeline,
    };
    let cost = delay_cost(candidate, &positions, obs);
    let cost = if cost.is_finite() { cost } else { f64::INFINITY };
    Ok(CandidateFit {
        candidate,
        cost,
        completion,
        positions,
    })
}

/// Index of the lowest cost, ties going to the smaller candidate.
pub fn argmin_candidate(scored: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &(c, cost)) in scored.iter().enumerate() {
        if !cost.is_finite() {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let (bc, bcost) = scored[b];
                if cost < bcost || (cost == bcost && c < bc) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Finer grid spanning the neighbours of `winner` within `grid`.
pub fn refined_bounds(grid: &[f64], winner: usize) -> (f64, f64) {
    let lo = grid[winner.saturating_sub(1)];
    let hi = grid[(winner + 1).min(grid.len() - 1)];
    (lo, hi)
}

/// Sequential grid search. `evaluate` maps a batch of `(index, candidate)`
/// pairs to their fits in the same order, which lets callers fan candidates
/// out to worker threads without changing the reduction.
pub fn estimate_delay_with<F>(
    obs: &ObservationSet,
    cfg: &DelaySearchConfig,
    mut evaluate: F,
) -> Result<DelaySearchResult, DelayError>
where
    F: FnMut(&[(u64, f64)]) -> Vec<Result<CandidateFit, CompletionError>>,
{
    cfg.validate()?;
    if obs.measured().is_empty() {
        return Err(DelayError::NoMeasurements);
    }

    let mut costs: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<CandidateFit> = None;
    let mut absorb = |fits: Vec<Result<CandidateFit, CompletionError>>, grid: &[f64], costs: &mut Vec<(f64, f64)>| {
        for (fit, &c) in fits.into_iter().zip(grid) {
            match fit {
                Ok(fit) => {
                    costs.push((c, fit.cost));
                    let better = match &best {
                        None => fit.cost.is_finite(),
                        Some(b) => fit.cost < b.cost || (fit.cost == b.cost && fit.candidate < b.candidate),
                    };
                    if better {
                        best = Some(fit);
                    }
                }
                Err(_) => costs.push((c, f64::INFINITY)),
            }
        }
    };

    let coarse = candidate_grid(cfg.d_min, cfg.d_max, cfg.grid_size);
    let batch: Vec<(u64, f64)> = coarse.iter().enumerate().map(|(k, &c)| (k as u64, c)).collect();
    absorb(evaluate(&batch), &coarse, &mut costs);
    let winner = argmin_candidate(&costs).ok_or(DelayError::AllCandidatesFailed)?;
    let coarse_best = costs[winner];
    let mut resolution = (cfg.d_max - cfg.d_min) / (cfg.grid_size - 1) as f64;

    if cfg.refine && cfg.d_max > cfg.d_min {
        let (lo, hi) = refined_bounds(&coarse, winner);
        let fine = candidate_grid(lo, hi, cfg.grid_size);
        resolution = (hi - lo) / (cfg.grid_size - 1) as f64;
        let offset = coarse.len() as u64;
        let batch: Vec<(u64, f64)> = fine
            .iter()
            .enumerate()
            .map(|(k, &c)| (offset + k as u64, c))
            .collect();
        absorb(evaluate(&batch), &fine, &mut costs);
    }

    let best = best.ok_or(DelayError::AllCandidatesFailed)?;
    Ok(DelaySearchResult {
        d0_hat: best.candidate,
        costs,
        coarse_best,
        resolution,
        best_completion: best.completion,
        best_positions: best.positions,
    })
}

pub fn estimate_delay(obs: &ObservationSet, cfg: &DelaySearchConfig) -> Result<DelaySearchResult, DelayError> {
    estimate_delay_with(obs, cfg, |batch| {
        batch
            .iter()
            .map(|&(k, c)| fit_candidate(obs, &cfg.completion, c, k))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_ring_layout;
    use crate::observation::{synthesize_observation, ObservationParams};

    fn truth(layout: &crate::geometry::SensorLayout) -> PositionEstimate {
        PositionEstimate {
            coords: layout.coords(),
            source: Source::GroundTruth,
        }
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = candidate_grid(0.0, 0.05, 51);
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[50], 0.05);
        assert!((g[15] - 0.015).abs() < 1e-15);
    }

    #[test]
    fn argmin_prefers_lowest_candidate_on_ties() {
        let scored = [(0.3, 2.0), (0.1, 1.0), (0.2, 1.0), (0.0, f64::INFINITY)];
        assert_eq!(argmin_candidate(&scored), Some(1));
        assert_eq!(argmin_candidate(&[(0.0, f64::INFINITY)]), None);
    }

    #[test]
    fn cost_vanishes_at_truth_and_is_quadratic_in_shift() {
        let layout = generate_ring_layout(60, 0.1, 0.01, 31).unwrap();
        let params = ObservationParams {
            d0: 0.012,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 32).unwrap();
        let pos = truth(&layout);
        assert!(delay_cost(0.012, &pos, &obs) < 1e-28);
        let eps = 1e-3;
        let expected = obs.measured().len() as f64 * eps * eps;
        assert!((delay_cost(0.012 + eps, &pos, &obs) - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn random_positions_cost_more_than_truth() {
        let layout = generate_ring_layout(60, 0.1, 0.01, 33).unwrap();
        let obs = synthesize_observation(&layout, &ObservationParams::default(), 34).unwrap();
        let other = generate_ring_layout(60, 0.1, 0.01, 35).unwrap();
        assert!(delay_cost(0.0, &truth(&other), &obs) > delay_cost(0.0, &truth(&layout), &obs));
    }

    #[test]
    fn zero_delay_recovered_on_clean_data() {
        let layout = generate_ring_layout(60, 0.1, 0.01, 36).unwrap();
        let obs = synthesize_observation(&layout, &ObservationParams::default(), 37).unwrap();
        let cfg = DelaySearchConfig {
            d_min: 0.0,
            d_max: 0.01,
            grid_size: 11,
            refine: false,
            ..DelaySearchConfig::for_radius(0.1)
        };
        let res = estimate_delay(&obs, &cfg).unwrap();
        assert_eq!(res.d0_hat, 0.0);
        let at_zero = res.costs[0].1;
        assert!(res.costs[1..].iter().all(|&(_, c)| c > at_zero));
    }

    #[test]
    fn config_is_validated() {
        let layout = generate_ring_layout(20, 0.1, 0.01, 1).unwrap();
        let obs = synthesize_observation(&layout, &ObservationParams::default(), 2).unwrap();
        let bad = DelaySearchConfig {
            d_min: 0.2,
            d_max: 0.1,
            ..DelaySearchConfig::for_radius(0.1)
        };
        assert!(matches!(estimate_delay(&obs, &bad), Err(DelayError::InvalidConfig(_))));
        let bad = DelaySearchConfig {
            grid_size: 1,
            ..DelaySearchConfig::for_radius(0.1)
        };
        assert!(matches!(estimate_delay(&obs, &bad), Err(DelayError::InvalidConfig(_))));
    }
}
