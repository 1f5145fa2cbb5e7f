//! Command-line front end.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ringcal_core::{DelaySearchConfig, DescentMetric, StructuredMode};

use crate::config::{ExperimentConfig, Method, SweepSpec, SweepVariable};
use crate::demos::{self, Figure};
use crate::harness::{self, SweepResult};
use crate::io;
use crate::units::parse_length;

#[derive(Debug, Parser)]
#[command(name = "ringcal", version, about = "Self-calibration of circular sensor rings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a JSON config.
    Run(RunArgs),
    /// Run a config with the sweep replaced from the command line.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `<variable>=<v1>,<v2>,…`, e.g. `n=200,400` or `a=2mm,20mm`.
        #[arg(long)]
        over: String,
    },
    /// Noiseless error against n for several ring widths.
    DemoFig5(DemoArgs),
    /// Noisy error against n for several noise levels.
    DemoFig6(DemoArgs),
    /// Pipeline against MDS-MAP and SVD-Reconstruct.
    DemoFig7(DemoArgs),
    /// Recovery of an unknown constant delay.
    DemoFig8(DemoArgs),
    /// Write one synthetic layout and its observation files.
    Simulate(SimulateArgs),
    /// Complete an observation file and write the estimated positions.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Also write one gnuplot data file per method.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Smaller sensor counts and fewer curves.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    /// Matrix-market file; the JSON sidecar is written next to it.
    #[arg(long)]
    pub observation: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub observation: PathBuf,
    #[arg(long)]
    pub positions: PathBuf,
    /// Ground-truth layout CSV; aligns the output and reports the error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Search for the delay instead of using the one in the sidecar.
    #[arg(long)]
    pub search_delay: bool,
    /// Upper end of the delay grid, e.g. `50mm`.
    #[arg(long, default_value = "50mm")]
    pub d_max: String,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub cost_curve: Option<PathBuf>,
    /// Descent metric; defaults to `euclidean`, or `scaled` with `--search-delay`.
    #[arg(long)]
    pub metric: Option<String>,
}

/// Applies flag overrides on top of a parsed config.
pub fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &args.method {
        let m = Method::parse(m).with_context(|| format!("unknown method {m}"))?;
        cfg.methods = vec![m];
        if cfg.sweep.as_ref().is_some_and(|s| s.variable == SweepVariable::Method) {
            cfg.sweep = None;
        }
    }
    if let Some(mode) = &args.mode {
        StructuredMode::parse(mode).with_context(|| format!("unknown mode {mode}"))?;
        cfg.mode = mode.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.gnuplot {
        cfg.gnuplot = true;
    }
    cfg.validate()?;
    Ok(())
}

/// Parses `variable=v1,v2,…` into a sweep block.
pub fn parse_over(text: &str) -> Result<SweepSpec> {
    let Some((var, values)) = text.split_once('=') else {
        bail!("expected <variable>=<values>, got {text:?}");
    };
    let variable = SweepVariable::parse(var.trim()).with_context(|| format!("unknown sweep variable {var:?}"))?;
    let values = values
        .split(',')
        .map(|v| {
            let v = v.trim();
            match variable {
                SweepVariable::N => v.parse::<u64>().map(serde_json::Value::from).with_context(|| format!("bad n {v:?}")),
                _ => Ok(serde_json::Value::from(v)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepSpec { variable, values })
}

fn default_out(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)))
}

fn report(result: &SweepResult, out: &Path) -> Result<bool> {
    let files = harness::write_sweep(result, out, result.config.gnuplot)?;
    for row in &result.aggregates {
        println!(
            "{:>10} {:>16}  mean d = {:.3e} m²  std = {:.2e}  trials = {}",
            row.sweep_value, row.method, row.mean_d_metric, row.std_d_metric, row.n_trials
        );
    }
    println!("wrote {} and {}", files.records.display(), files.aggregates.display());
    for f in &result.failures {
        eprintln!(
            "trial failed: {}={} method={} trial={} seed={}: {}",
            result.config.sweep.as_ref().map_or("point", |s| s.variable.as_str()),
            f.sweep_value,
            f.method,
            f.trial,
            f.seed,
            f.error
        );
    }
    Ok(result.all_succeeded())
}

fn run_config(cfg: &ExperimentConfig) -> Result<bool> {
    let result = harness::run_sweep(cfg)?;
    report(&result, &default_out(cfg))
}

fn demo(figure: Figure, args: &DemoArgs) -> Result<bool> {
    let mut ok = true;
    for mut cfg in demos::configs(figure, args.quick) {
        if let Some(t) = args.trials {
            cfg.trials = t;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        let out = args.out_dir.join(format!("{}.csv", cfg.name));
        cfg.out = Some(out.clone());
        let (result, kept) = harness::run_sweep_keeping(&cfg, figure == Figure::DelayRecovery)?;
        ok &= report(&result, &out)?;
        if figure == Figure::DelayRecovery {
            for r in &result.records {
                if let Some(d) = r.d0_est_m {
                    println!(
                        "trial {}: d0_hat = {:.6} m (t0_hat = {:.3} µs), true {:.6} m",
                        r.trial,
                        d,
                        d / cfg.c0 * 1e6,
                        r.d0_true_m
                    );
                }
            }
            if let Some(k) = kept.first() {
                let a = &k.artifacts;
                io::write_cost_curve(&args.out_dir.join("fig8.cost.csv"), &a.cost_curve)?;
                io::write_trace(&args.out_dir.join("fig8.trace.csv"), &a.trace)?;
                io::write_layout(&args.out_dir.join("fig8.layout.csv"), &a.layout)?;
                io::write_positions(&args.out_dir.join("fig8.positions.csv"), &a.estimate, Some(&a.layout.coords()))?;
                io::write_observation(&args.out_dir.join("fig8.obs.mtx"), &a.observation)?;
            }
        }
    }
    Ok(ok)
}

fn simulate(args: &SimulateArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let outcome = harness::run_trial(&cfg, None, Method::Optspace, args.trial)?;
    let Some(a) = outcome.artifacts else {
        bail!("simulation failed: {}", outcome.error.unwrap_or_default());
    };
    io::write_layout(&args.layout, &a.layout)?;
    io::write_observation(&args.observation, &a.observation)?;
    println!(
        "wrote {} sensors to {} and {} measured pairs to {}",
        a.layout.len(),
        args.layout.display(),
        a.observation.measured().len(),
        args.observation.display()
    );
    Ok(true)
}

fn calibrate(args: &CalibrateArgs) -> Result<bool> {
    let obs = io::read_observation(&args.observation)?;
    let metric = args
        .metric
        .as_deref()
        .map(|m| DescentMetric::parse(m).with_context(|| format!("unknown metric {m}")))
        .transpose()?;
    let truth = args.truth.as_deref().map(io::read_layout).transpose()?;
    let (estimate, trace) = if args.search_delay {
        let mut cfg = DelaySearchConfig {
            d_min: 0.0,
            d_max: parse_length(&args.d_max)?,
            grid_size: args.grid,
            refine: true,
            ..DelaySearchConfig::for_radius(1.0)
        };
        if let Some(m) = metric {
            cfg.completion.metric = m;
        }
        let res = crate::parallel::estimate_delay(&obs, &cfg)?;
        println!("d0_hat = {:e} m (t0_hat = {:e} s)", res.d0_hat, res.d0_hat / obs.c0);
        if let Some(path) = &args.cost_curve {
            io::write_cost_curve(path, &res.costs)?;
        }
        (res.best_positions, res.best_completion.trace)
    } else {
        let squares = ringcal_core::delay::corrected_squares(&obs, obs.d0_true);
        let opts = ringcal_core::CompletionOptions {
            metric: metric.unwrap_or_default(),
            ..Default::default()
        };
        let done = ringcal_core::optspace_complete(&squares, &obs.completion_mask(), &opts)?;
        let mds = ringcal_core::classical_mds(&ringcal_core::SquaredDistanceMatrix(done.estimate), 2)?;
        (mds.estimate, done.trace)
    };
    if let Some(path) = &args.trace {
        io::write_trace(path, &trace)?;
    }
    let reference = truth.as_ref().map(|t| t.coords());
    io::write_positions(&args.positions, &estimate, reference.as_ref())?;
    if let Some(r) = &reference {
        println!("d(X, X̂) = {:e} m²", ringcal_core::position_distance(r, &estimate.coords)?);
    }
    println!("wrote {}", args.positions.display());
    Ok(true)
}

/// Runs a parsed command; `Ok(false)` means some trial failed.
pub fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = ExperimentConfig::load(&args.config)?;
            apply_overrides(&mut cfg, &args)?;
            run_config(&cfg)
        }
        Command::Sweep { run, over } => {
            let mut cfg = ExperimentConfig::load(&run.config)?;
            cfg.sweep = Some(parse_over(&over)?);
            apply_overrides(&mut cfg, &run)?;
            run_config(&cfg)
        }
        Command::DemoFig5(a) => demo(Figure::NoiselessWidths, &a),
        Command::DemoFig6(a) => demo(Figure::NoiseLevels, &a),
        Command::DemoFig7(a) => demo(Figure::Baselines, &a),
        Command::DemoFig8(a) => demo(Figure::DelayRecovery, &a),
        Command::Simulate(a) => simulate(&a),
        Command::Calibrate(a) => calibrate(&a),
    }
}
