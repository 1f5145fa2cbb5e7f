//! Seeded trials, parameter sweeps and their CSV outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Result};
use rayon::prelude::*;
use ringcal_core::completion::IterationRecord;
use ringcal_core::delay::corrected_squares;
use ringcal_core::{
    classical_mds, generate_ring_layout, optspace_complete, pairwise_distance_matrix, position_distance,
    seed, squared_distance_matrix, svd_reconstruct, DMatrix, ObservationParams, ObservationSet,
    PositionEstimate, SensorLayout, SquaredDistanceMatrix,
};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, Method, PointParams, SweepValue};
use crate::parallel;

/// One CSV row. Optional fields are empty when they do not apply or the
/// trial failed; a failed trial always has an empty `d_metric_m2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub method: String,
    pub n: usize,
    pub r0_m: f64,
    pub a_m: f64,
    pub delta: f64,
    pub p_miss: f64,
    pub sigma_m: f64,
    pub d0_true_m: f64,
    pub d0_est_m: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub d_metric_m2: Option<f64>,
    pub matrix_rel_err: Option<f64>,
    pub runtime_ms: f64,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.d_metric_m2.is_none()
    }
}

/// Everything a trial produced besides its record.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub layout: SensorLayout,
    pub observation: ObservationSet,
    pub estimate: PositionEstimate,
    /// Completion iterations; empty for the baselines.
    pub trace: Vec<IterationRecord>,
    /// `(candidate, cost)` pairs of the delay search, if one ran.
    pub cost_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: ExperimentRecord,
    pub error: Option<String>,
    pub artifacts: Option<Artifacts>,
}

/// `hash(master seed, sweep point, trial index)`; independent of the trial
/// count and of the method so methods are compared on identical data.
pub fn trial_seed(master: u64, value: Option<SweepValue>, trial: usize) -> u64 {
    let key = value.map_or([0, 0], |v| v.seed_key());
    seed::mix_words(seed::derive(master, "trial", trial as u64), &key)
}

struct Solved {
    estimate: PositionEstimate,
    /// Matrix compared against the true squared distances.
    completed: DMatrix<f64>,
    d0_est: Option<f64>,
    trace: Vec<IterationRecord>,
    cost_curve: Vec<(f64, f64)>,
}

fn embed(completed: &DMatrix<f64>, eta: usize) -> Result<PositionEstimate> {
    let mut est = classical_mds(&SquaredDistanceMatrix(completed.clone()), eta)?.estimate;
    est.source = ringcal_core::Source::Pipeline;
    Ok(est)
}

fn solve(cfg: &ExperimentConfig, p: &PointParams, method: Method, obs: &ObservationSet, seed: u64) -> Result<Solved> {
    let mut opts = cfg.completion_options()?;
    opts.trim_seed = seed::derive(seed, "trim", 0);
    match method {
        Method::Optspace => {
            let squares = corrected_squares(obs, p.d0);
            let done = optspace_complete(&squares, &obs.completion_mask(), &opts)?;
            Ok(Solved {
                estimate: embed(&done.estimate, p.eta)?,
                completed: done.estimate,
                d0_est: None,
                trace: done.trace,
                cost_curve: Vec::new(),
            })
        }
        Method::OptspaceDelay => {
            let mut dcfg = cfg.delay_config(p.r0)?;
            dcfg.completion.trim_seed = opts.trim_seed;
            let res = parallel::estimate_delay(obs, &dcfg)?;
            let estimate = if p.eta == 2 {
                res.best_positions
            } else {
                embed(&res.best_completion.estimate, p.eta)?
            };
            Ok(Solved {
                estimate,
                completed: res.best_completion.estimate,
                d0_est: Some(res.d0_hat),
                trace: res.best_completion.trace,
                cost_curve: res.costs,
            })
        }
        Method::MdsMap | Method::SvdReconstruct => {
            let out = if method == Method::MdsMap {
                parallel::mds_map(obs, p.d0)?
            } else if p.d0 == 0.0 {
                svd_reconstruct(obs)?
            } else {
                ringcal_core::baselines::svd_reconstruct_corrected(obs, p.d0)?
            };
            let estimate = if p.eta == 2 {
                out.estimate
            } else {
                let mut e = classical_mds(&out.filled, p.eta)?.estimate;
                e.source = out.estimate.source;
                e
            };
            Ok(Solved {
                estimate,
                completed: out.filled.0,
                d0_est: None,
                trace: Vec::new(),
                cost_curve: Vec::new(),
            })
        }
    }
}

fn pad_columns(m: &DMatrix<f64>, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols, |i, k| if k < m.ncols() { m[(i, k)] } else { 0.0 })
}

/// `d(X, X̂)` with the narrower coordinate matrix padded by zero columns.
pub fn layout_error(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    let cols = truth.ncols().max(estimate.ncols());
    Ok(position_distance(&pad_columns(truth, cols), &pad_columns(estimate, cols))?)
}

/// Runs one trial with an explicit seed; the same seed reproduces the row.
pub fn run_trial_with_seed(
    cfg: &ExperimentConfig,
    value: Option<SweepValue>,
    method: Method,
    trial: usize,
    trial_seed: u64,
) -> Result<TrialOutcome, ConfigError> {
    let p = cfg.point(value)?;
    let start = Instant::now();
    let mut record = ExperimentRecord {
        experiment_id: cfg.name.clone(),
        method: method.as_str().to_string(),
        n: p.n,
        r0_m: p.r0,
        a_m: p.a,
        delta: p.delta,
        p_miss: p.p_miss,
        sigma_m: p.sigma,
        d0_true_m: p.d0,
        d0_est_m: None,
        trial,
        seed: trial_seed,
        d_metric_m2: None,
        matrix_rel_err: None,
        runtime_ms: 0.0,
    };
    let attempt = || -> Result<(f64, f64, Option<f64>, Artifacts)> {
        let layout = generate_ring_layout(p.n, p.r0, p.a, seed::derive(trial_seed, "layout", 0))?;
        let params = ObservationParams {
            delta: p.delta,
            p: 1.0 - p.p_miss,
            sigma: p.sigma,
            d0: p.d0,
            c0: p.c0,
            mode: p.mode,
            symmetric_noise: p.symmetric_noise,
        };
        let obs = ringcal_core::synthesize_observation(&layout, &params, seed::derive(trial_seed, "observation", 0))?;
        let solved = solve(cfg, &p, method, &obs, trial_seed)?;
        let truth = squared_distance_matrix(&pairwise_distance_matrix(&layout));
        let d = layout_error(&layout.coords(), &solved.estimate.coords)?;
        let rel = (&solved.completed - &truth.0).norm() / truth.0.norm();
        if !d.is_finite() {
            return Err(anyhow!("non-finite position error"));
        }
        let artifacts = Artifacts {
            layout,
            observation: obs,
            estimate: solved.estimate,
            trace: solved.trace,
            cost_curve: solved.cost_curve,
        };
        Ok((d, rel, solved.d0_est, artifacts))
    };
    let outcome = attempt();
    record.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(match outcome {
        Ok((d, rel, d0_est, artifacts)) => {
            record.d_metric_m2 = Some(d);
            record.matrix_rel_err = Some(rel);
            record.d0_est_m = d0_est;
            TrialOutcome {
                record,
                error: None,
                artifacts: Some(artifacts),
            }
        }
        Err(e) => TrialOutcome {
            record,
            error: Some(format!("{e:#}")),
            artifacts: None,
        },
    })
}

pub fn run_trial(
    cfg: &ExperimentConfig,
    value: Option<SweepValue>,
    method: Method,
    trial: usize,
) -> Result<TrialOutcome, ConfigError> {
    run_trial_with_seed(cfg, value, method, trial, trial_seed(cfg.seed, value, trial))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_value: String,
    pub method: String,
    pub mean_d_metric: f64,
    pub std_d_metric: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub sweep_value: String,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    /// Ordered by sweep point, then method, then trial.
    pub records: Vec<ExperimentRecord>,
    pub sweep_values: Vec<Option<SweepValue>>,
    pub aggregates: Vec<AggregateRow>,
    /// Abscissa of each aggregate row, `None` for categorical sweeps.
    pub abscissae: Vec<Option<f64>>,
    pub failures: Vec<Failure>,
}

impl SweepResult {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn aggregate(&self, value: &str, method: Method) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|r| r.sweep_value == value && r.method == method.as_str())
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn label(value: Option<SweepValue>) -> String {
    value.map_or_else(|| "-".to_string(), |v| v.label())
}

/// Runs every (point, method, trial) job on the thread pool and assembles
/// the rows in a fixed order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, ConfigError> {
    run_sweep_keeping(cfg, false).map(|(r, _)| r)
}

/// Trial-0 artifacts of one (point, method) pair.
#[derive(Debug, Clone)]
pub struct KeptArtifacts {
    pub sweep_value: String,
    pub method: Method,
    pub artifacts: Artifacts,
}

/// [`run_sweep`], optionally keeping the artifacts of trial 0 at every
/// (point, method) pair.
pub fn run_sweep_keeping(cfg: &ExperimentConfig, keep: bool) -> Result<(SweepResult, Vec<KeptArtifacts>), ConfigError> {
    cfg.validate()?;
    let values = cfg.sweep_values()?;
    let mut jobs = Vec::new();
    for &value in &values {
        for method in cfg.methods_at(value) {
            for trial in 0..cfg.trials {
                jobs.push((value, method, trial));
            }
        }
    }
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(value, method, trial)| {
            run_trial(cfg, value, method, trial).map(|mut o| {
                if !(keep && trial == 0) {
                    o.artifacts = None;
                }
                o
            })
        })
        .collect::<Result<_, _>>()?;

    let mut aggregates = Vec::new();
    let mut abscissae = Vec::new();
    let mut failures = Vec::new();
    let mut kept = Vec::new();
    let mut k = 0;
    for &value in &values {
        for method in cfg.methods_at(value) {
            let group = &outcomes[k..k + cfg.trials];
            k += cfg.trials;
            let ds: Vec<f64> = group.iter().filter_map(|o| o.record.d_metric_m2).collect();
            let (mean, std) = mean_std(&ds);
            aggregates.push(AggregateRow {
                sweep_value: label(value),
                method: method.as_str().to_string(),
                mean_d_metric: mean,
                std_d_metric: std,
                n_trials: ds.len(),
            });
            abscissae.push(value.and_then(|v| v.numeric()));
            if let Some(a) = group.first().and_then(|o| o.artifacts.clone()) {
                kept.push(KeptArtifacts {
                    sweep_value: label(value),
                    method,
                    artifacts: a,
                });
            }
            for o in group {
                if let Some(error) = &o.error {
                    failures.push(Failure {
                        sweep_value: label(value),
                        method: method.as_str().to_string(),
                        trial: o.record.trial,
                        seed: o.record.seed,
                        error: error.clone(),
                    });
                }
            }
        }
    }
    let result = SweepResult {
        config: cfg.clone(),
        records: outcomes.into_iter().map(|o| o.record).collect(),
        sweep_values: values,
        aggregates,
        abscissae,
        failures,
    };
    Ok((result, kept))
}

/// `results.csv` → `results.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Paths written by [`write_sweep`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrittenFiles {
    pub records: PathBuf,
    pub aggregates: PathBuf,
    pub failures: Option<PathBuf>,
    pub curves: Vec<PathBuf>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-trial CSV, `.agg.csv`, a `.failures.csv` when needed and, if
/// requested, one gnuplot `.dat` file per method for numeric sweeps.
pub fn write_sweep(result: &SweepResult, out: &Path, gnuplot: bool) -> Result<WrittenFiles> {
    let mut files = WrittenFiles {
        records: out.to_path_buf(),
        aggregates: sibling(out, "agg.csv"),
        ..Default::default()
    };
    if result.records.is_empty() {
        let mut w = csv::WriterBuilder::new().from_path(out)?;
        w.write_record([
            "experiment_id", "method", "n", "r0_m", "a_m", "delta", "p_miss", "sigma_m", "d0_true_m",
            "d0_est_m", "trial", "seed", "d_metric_m2", "matrix_rel_err", "runtime_ms",
        ])?;
        w.flush()?;
    } else {
        write_csv(out, &result.records)?;
    }
    write_csv(&files.aggregates, &result.aggregates)?;

    if !result.failures.is_empty() {
        #[derive(Serialize)]
        struct Row<'a> {
            sweep_value: &'a str,
            method: &'a str,
            trial: usize,
            seed: u64,
            error: &'a str,
        }
        let rows: Vec<Row> = result
            .failures
            .iter()
            .map(|f| Row {
                sweep_value: &f.sweep_value,
                method: &f.method,
                trial: f.trial,
                seed: f.seed,
                error: &f.error,
            })
            .collect();
        let path = sibling(out, "failures.csv");
        write_csv(&path, &rows)?;
        files.failures = Some(path);
    }

    if gnuplot {
        let variable = result.config.sweep.as_ref().map_or("point", |s| s.variable.as_str());
        let mut methods: Vec<&str> = Vec::new();
        for row in &result.aggregates {
            if !methods.contains(&row.method.as_str()) {
                methods.push(&row.method);
            }
        }
        for method in methods {
            let mut text = format!("# {variable} mean_d_metric_m2 ({method})\n");
            let mut any = false;
            for (row, x) in result.aggregates.iter().zip(&result.abscissae) {
                if let (true, Some(x)) = (row.method == method, x) {
                    text.push_str(&format!("{x} {}\n", row.mean_d_metric));
                    any = true;
                }
            }
            if any {
                let path = sibling(out, &format!("{method}.dat"));
                std::fs::write(&path, text)?;
                files.curves.push(path);
            }
        }
    }
    Ok(files)
}
