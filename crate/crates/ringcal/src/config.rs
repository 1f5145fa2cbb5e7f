//! JSON experiment configuration.
//!
//! Every physical quantity accepts either an SI number or a string with a
//! unit suffix (see [`crate::units`]). Command-line flags override single
//! fields after parsing.

use std::fmt;
use std::path::{Path, PathBuf};

use ringcal_core::{CompletionOptions, DelaySearchConfig, DescentMetric, SamplingRate, StructuredMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::units::{parse_length, Duration, Length};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Localization method run on each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Completion + MDS with the true delay removed.
    Optspace,
    /// Completion + MDS with the delay found by grid search.
    OptspaceDelay,
    MdsMap,
    SvdReconstruct,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Optspace, Method::OptspaceDelay, Method::MdsMap, Method::SvdReconstruct];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Optspace => "optspace",
            Method::OptspaceDelay => "optspace-delay",
            Method::MdsMap => "mds-map",
            Method::SvdReconstruct => "svd-reconstruct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    N,
    A,
    Sigma,
    Method,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::N => "n",
            SweepVariable::A => "a",
            SweepVariable::Sigma => "sigma",
            SweepVariable::Method => "method",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "n" => Some(SweepVariable::N),
            "a" => Some(SweepVariable::A),
            "sigma" => Some(SweepVariable::Sigma),
            "method" => Some(SweepVariable::Method),
            _ => None,
        }
    }
}

/// One value of the swept variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    N(usize),
    /// Meters.
    A(f64),
    /// Meters.
    Sigma(f64),
    Method(Method),
}

impl SweepValue {
    /// Column text in the aggregate table. Lengths are in meters.
    pub fn label(&self) -> String {
        match self {
            SweepValue::N(n) => n.to_string(),
            SweepValue::A(v) | SweepValue::Sigma(v) => v.to_string(),
            SweepValue::Method(m) => m.as_str().to_string(),
        }
    }

    /// Abscissa for plot files; `None` for categorical sweeps.
    pub fn numeric(&self) -> Option<f64> {
        match self {
            SweepValue::N(n) => Some(*n as f64),
            SweepValue::A(v) | SweepValue::Sigma(v) => Some(*v),
            SweepValue::Method(_) => None,
        }
    }

    /// Stable key mixed into per-trial seeds. Method sweeps share a key so
    /// every method sees the same layouts and noise.
    pub fn seed_key(&self) -> [u64; 2] {
        match self {
            SweepValue::N(n) => [1, *n as u64],
            SweepValue::A(v) => [2, v.to_bits()],
            SweepValue::Sigma(v) => [3, v.to_bits()],
            SweepValue::Method(_) => [4, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    /// Integers for `n`, lengths for `a`/`sigma`, method tags for `method`.
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompletionSettings {
    pub rank: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub trimming: bool,
    pub metric: String,
}

impl Default for CompletionSettings {
    fn default() -> Self {
        let d = CompletionOptions::default();
        Self {
            rank: d.rank,
            max_iters: d.max_iters,
            rel_tol: d.rel_tol,
            trimming: d.trimming,
            metric: d.metric.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaySettings {
    pub d_min: Length,
    /// Defaults to `r0 / 2`.
    pub d_max: Option<Length>,
    pub grid_size: usize,
    pub refine: bool,
    pub metric: String,
}

impl Default for DelaySettings {
    fn default() -> Self {
        let d = DelaySearchConfig::for_radius(1.0);
        Self {
            d_min: Length(d.d_min),
            d_max: None,
            grid_size: d.grid_size,
            refine: d.refine,
            metric: d.completion.metric.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub sweep: Option<SweepSpec>,
    /// Methods run at every sweep point unless the sweep is over methods.
    pub methods: Vec<Method>,
    pub n: usize,
    pub r0: Length,
    pub a: Length,
    pub delta: f64,
    /// Probability that an off-diagonal entry is randomly missing.
    pub p_miss: f64,
    pub sigma: Length,
    /// Give at most one of `d0` and `t0`; `d0 = c0·t0`.
    pub d0: Option<Length>,
    pub t0: Option<Duration>,
    pub c0: f64,
    pub eta: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: String,
    pub asymmetric_noise: bool,
    pub out: Option<PathBuf>,
    pub gnuplot: bool,
    pub completion: CompletionSettings,
    pub delay_search: DelaySettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".to_string(),
            sweep: None,
            methods: vec![Method::Optspace],
            n: 200,
            r0: Length(0.1),
            a: Length(0.01),
            delta: 1.0,
            p_miss: 0.05,
            sigma: Length(0.0),
            d0: None,
            t0: None,
            c0: 1500.0,
            eta: 2,
            trials: 10,
            seed: 0,
            mode: StructuredMode::Practical.as_str().to_string(),
            asymmetric_noise: false,
            out: None,
            gnuplot: false,
            completion: CompletionSettings::default(),
            delay_search: DelaySettings::default(),
        }
    }
}

/// Fixed parameters of a single sweep point, all SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub n: usize,
    pub r0: f64,
    pub a: f64,
    pub delta: f64,
    pub p_miss: f64,
    pub sigma: f64,
    pub d0: f64,
    pub c0: f64,
    pub eta: usize,
    pub mode: StructuredMode,
    pub symmetric_noise: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                path: path.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn d0(&self) -> f64 {
        match (self.d0, self.t0) {
            (Some(d), _) => d.0,
            (None, Some(t)) => self.c0 * t.0,
            (None, None) => 0.0,
        }
    }

    pub fn mode(&self) -> Result<StructuredMode, ConfigError> {
        StructuredMode::parse(&self.mode).ok_or_else(|| invalid("mode", "expected `practical` or `theorem`"))
    }

    pub fn completion_options(&self) -> Result<CompletionOptions, ConfigError> {
        let c = &self.completion;
        let metric = DescentMetric::parse(&c.metric)
            .ok_or_else(|| invalid("completion.metric", "expected `euclidean` or `scaled`"))?;
        Ok(CompletionOptions {
            rank: c.rank,
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            sampling_rate: SamplingRate::Estimate,
            trimming: c.trimming,
            trim_seed: 0,
            metric,
        })
    }

    pub fn delay_config(&self, r0: f64) -> Result<DelaySearchConfig, ConfigError> {
        let s = &self.delay_search;
        let metric = DescentMetric::parse(&s.metric)
            .ok_or_else(|| invalid("delay_search.metric", "expected `euclidean` or `scaled`"))?;
        let base = self.completion_options()?;
        Ok(DelaySearchConfig {
            d_min: s.d_min.0,
            d_max: s.d_max.map_or(0.5 * r0, |d| d.0),
            grid_size: s.grid_size,
            refine: s.refine,
            completion: CompletionOptions { metric, ..base },
        })
    }

    /// Sweep points in file order; a config without a sweep has one point.
    pub fn sweep_values(&self) -> Result<Vec<Option<SweepValue>>, ConfigError> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![None]);
        };
        if sweep.values.is_empty() {
            return Err(invalid("sweep.values", "must not be empty"));
        }
        sweep
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| parse_sweep_value(sweep.variable, v).map(Some).map_err(|m| invalid(format!("sweep.values[{k}]"), m)))
            .collect()
    }

    /// Methods to run at a point.
    pub fn methods_at(&self, value: Option<SweepValue>) -> Vec<Method> {
        match value {
            Some(SweepValue::Method(m)) => vec![m],
            _ => self.methods.clone(),
        }
    }

    pub fn point(&self, value: Option<SweepValue>) -> Result<PointParams, ConfigError> {
        let mut p = PointParams {
            n: self.n,
            r0: self.r0.0,
            a: self.a.0,
            delta: self.delta,
            p_miss: self.p_miss,
            sigma: self.sigma.0,
            d0: self.d0(),
            c0: self.c0,
            eta: self.eta,
            mode: self.mode()?,
            symmetric_noise: !self.asymmetric_noise,
        };
        match value {
            Some(SweepValue::N(n)) => p.n = n,
            Some(SweepValue::A(a)) => p.a = a,
            Some(SweepValue::Sigma(s)) => p.sigma = s,
            Some(SweepValue::Method(_)) | None => {}
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.n < 2 {
            return Err(invalid("n", "need at least 2 sensors"));
        }
        if !(self.r0.0 > 0.0) {
            return Err(invalid("r0", "must be positive"));
        }
        if !(self.a.0 >= 0.0 && self.a.0 < 2.0 * self.r0.0) {
            return Err(invalid("a", "must lie in [0, 2·r0)"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.p_miss) {
            return Err(invalid("p_miss", "must lie in [0, 1)"));
        }
        if !(self.sigma.0 >= 0.0) {
            return Err(invalid("sigma", "must be nonnegative"));
        }
        if self.d0.is_some() && self.t0.is_some() {
            return Err(invalid("d0", "give either d0 or t0, not both"));
        }
        if !(self.d0() >= 0.0) {
            return Err(invalid("d0", "must be nonnegative"));
        }
        if !(self.c0 > 0.0) {
            return Err(invalid("c0", "must be positive"));
        }
        if self.eta == 0 {
            return Err(invalid("eta", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "must not be empty"));
        }
        if self.completion.rank == 0 {
            return Err(invalid("completion.rank", "must be at least 1"));
        }
        if !(self.completion.rel_tol >= 0.0) {
            return Err(invalid("completion.rel_tol", "must be nonnegative"));
        }
        if self.delay_search.grid_size < 2 {
            return Err(invalid("delay_search.grid_size", "must be at least 2"));
        }
        self.mode()?;
        self.completion_options()?;
        self.delay_config(self.r0.0)?;
        for value in self.sweep_values()?.into_iter().flatten() {
            let p = self.point(Some(value))?;
            if p.n < 2 {
                return Err(invalid("sweep.values", "need at least 2 sensors"));
            }
            if !(p.a >= 0.0 && p.a < 2.0 * p.r0) {
                return Err(invalid("sweep.values", "a must lie in [0, 2·r0)"));
            }
        }
        Ok(())
    }
}

fn parse_sweep_value(variable: SweepVariable, v: &Value) -> Result<SweepValue, String> {
    let length = |v: &Value| -> Result<f64, String> {
        let x = match v {
            Value::Number(x) => x.as_f64().ok_or("not a finite number")?,
            Value::String(s) => parse_length(s).map_err(|e| e.to_string())?,
            _ => return Err("expected a number or a string with a unit".into()),
        };
        if x < 0.0 {
            return Err("must be nonnegative".into());
        }
        Ok(x)
    };
    match variable {
        SweepVariable::N => v
            .as_u64()
            .map(|n| SweepValue::N(n as usize))
            .ok_or_else(|| "expected a nonnegative integer".to_string()),
        SweepVariable::A => length(v).map(SweepValue::A),
        SweepVariable::Sigma => length(v).map(SweepValue::Sigma),
        SweepVariable::Method => v
            .as_str()
            .and_then(Method::parse)
            .map(SweepValue::Method)
            .ok_or_else(|| format!("unknown method {v}")),
    }
}
