//! OptSpace low-rank matrix completion.
//!
//! Three stages: optional trimming of over-represented rows and columns, a
//! rank-`q` spectral projection of the zero-filled observations, and local
//! descent of
//!
//! ```text
//! F(X, Y) = min_S ½ Σ_{(i,j)∈E} (M_ij − (X S Yᵀ)_ij)²
//! ```
//!
//! over pairs of `n × q` matrices with orthonormal columns. The inner
//! minimization over `S` is an exact `q² × q²` least-squares solve. The outer
//! step moves along the tangent-projected gradient (optionally rescaled by
//! `(S Sᵀ)⁻¹`, see [`DescentMetric`]), re-orthonormalizes with a thin QR and
//! backtracks until the Armijo condition holds.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::linalg;
use crate::mask::PairSet;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletionError {
    #[error("observation mask is empty")]
    EmptyMask,
    #[error("rank {rank} exceeds matrix dimension {n}")]
    RankTooLarge { rank: usize, n: usize },
    #[error("observed matrix is {rows}x{cols} but the mask is over n = {n}")]
    DimensionMismatch { rows: usize, cols: usize, n: usize },
    #[error("invalid completion option: {0}")]
    InvalidOptions(&'static str),
}

/// Sampling rate `p` used for the `1/p` scale of the spectral projection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SamplingRate {
    /// `|E| / (n(n − 1))` over the supplied mask.
    #[default]
    Estimate,
    Fixed(f64),
}

/// Metric in which the descent direction on `(X, Y)` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DescentMetric {
    /// Plain tangent-projected gradient.
    #[default]
    Euclidean,
    /// Gradient right-multiplied by `(S Sᵀ)⁻¹` for `X` and `(Sᵀ S)⁻¹` for
    /// `Y`. Removes the dependence of the step on the spread of the singular
    /// values, which matters for ring layouts where `σ₄/σ₁` can be `10⁻⁵`.
    Scaled,
}

impl DescentMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            DescentMetric::Euclidean => "euclidean",
            DescentMetric::Scaled => "scaled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euclidean" => Some(DescentMetric::Euclidean),
            "scaled" => Some(DescentMetric::Scaled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionOptions {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    pub sampling_rate: SamplingRate,
    pub trimming: bool,
    pub trim_seed: u64,
    pub metric: DescentMetric,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            rank: 4,
            max_iters: 500,
            rel_tol: 1e-9,
            sampling_rate: SamplingRate::Estimate,
            trimming: false,
            trim_seed: 0,
            metric: DescentMetric::Euclidean,
        }
    }
}

impl CompletionOptions {
    fn validate(&self) -> Result<(), CompletionError> {
        if self.rank == 0 {
            return Err(CompletionError::InvalidOptions("rank must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(CompletionError::InvalidOptions("rel_tol must be positive"));
        }
        if let SamplingRate::Fixed(p) = self.sampling_rate {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CompletionError::InvalidOptions("sampling rate must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// `X S Yᵀ` with orthonormal `X`, `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl Factors {
    pub fn product(&self) -> DMatrix<f64> {
        &self.x * &self.s * self.y.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative cost decrease fell below `rel_tol`.
    Tolerance,
    /// Cost reached zero to working precision.
    ExactFit,
    /// No step length passed the sufficient-decrease test.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub estimate: DMatrix<f64>,
    pub factors: Factors,
    /// Cost after the initial core solve, then after every accepted step.
    pub cost_trace: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub stop: StopReason,
    pub sampling_rate: f64,
    /// Rows/columns with no observation left; their completion is unreliable.
    pub unreliable_rows: Vec<usize>,
    pub unreliable_cols: Vec<usize>,
    /// `σ_q / σ₁ < 10⁻¹²` in the spectral initialization.
    pub rank_deficient: bool,
}

impl CompletionResult {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::MaxIterations
    }

    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().copied().unwrap_or(0.0)
    }
}

pub fn estimate_sampling_rate(e: &PairSet, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    e.len() as f64 / (n * (n - 1)) as f64
}

/// Removes random samples from rows (then columns) holding more than twice
/// the mean number of samples, down to `⌈2·mean⌉`.
pub fn trim(m: &DMatrix<f64>, e: &PairSet, seed: u64) -> (DMatrix<f64>, PairSet) {
    let n = e.dim();
    let mut kept = e.clone();
    if e.is_empty() {
        return (m.clone(), kept);
    }
    let mean = e.len() as f64 / n as f64;
    let cap = libm::ceil(2.0 * mean) as usize;
    let mut rng = seed::rng(seed);

    for i in 0..n {
        let mut entries: Vec<usize> = (0..n).filter(|&j| kept.contains(i, j)).collect();
        if entries.len() as f64 > 2.0 * mean {
            entries.shuffle(&mut rng);
            for &j in &entries[..entries.len() - cap] {
                kept.remove(i, j);
            }
        }
    }
    for j in 0..n {
        let mut entries: Vec<usize> = (0..n).filter(|&i| kept.contains(i, j)).collect();
        if entries.len() as f64 > 2.0 * mean {
            entries.shuffle(&mut rng);
            for &i in &entries[..entries.len() - cap] {
                kept.remove(i, j);
            }
        }
    }
    (kept.project(m), kept)
}

/// Rank-`q` truncated SVD of the zero-filled observations, scaled by `1/p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProjection {
    pub matrix: DMatrix<f64>,
    pub left: DMatrix<f64>,
    /// Top `q` singular values of the unscaled zero-filled matrix.
    pub singular_values: Vec<f64>,
    pub right: DMatrix<f64>,
    pub rank_deficient: bool,
}

pub fn rank_q_projection(
    m: &DMatrix<f64>,
    e: &PairSet,
    q: usize,
    p_hat: f64,
) -> Result<RankProjection, CompletionError> {
    let n = e.dim();
    if m.shape() != (n, n) {
        return Err(CompletionError::DimensionMismatch {
            rows: m.nrows(),
            cols: m.ncols(),
            n,
        });
    }
    if q == 0 || q > n {
        return Err(CompletionError::RankTooLarge { rank: q, n });
    }
    if !(p_hat > 0.0) {
        return Err(CompletionError::EmptyMask);
    }
    let svd = linalg::sorted_svd(&e.project(m));
    let left = svd.u.columns(0, q).into_owned();
    let right = svd.v.columns(0, q).into_owned();
    let singular_values: Vec<f64> = svd.singular_values[..q].to_vec();
    let top = singular_values[0];
    let rank_deficient = top == 0.0 || singular_values[q - 1] / top < 1e-12;
    let scaled = DMatrix::from_diagonal(&DVector::from_iterator(
        q,
        singular_values.iter().map(|s| s / p_hat),
    ));
    let matrix = &left * scaled * right.transpose();
    Ok(RankProjection {
        matrix,
        left,
        singular_values,
        right,
        rank_deficient,
    })
}

/// `𝔉(X, Y, S) = ½ Σ_{(i,j)∈E} (M_ij − (X S Yᵀ)_ij)²` for a fixed mask.
pub struct MaskedObjective {
    observed: DMatrix<f64>,
    weights: DMatrix<f64>,
}

impl MaskedObjective {
    pub fn new(m: &DMatrix<f64>, e: &PairSet) -> Self {
        Self {
            observed: e.project(m),
            weights: e.indicator(),
        }
    }

    /// `P_E(M − X S Yᵀ)`.
    pub fn residual(&self, x: &DMatrix<f64>, s: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        let xs = x * s;
        let mut r = &self.observed - xs * y.transpose();
        r.component_mul_assign(&self.weights);
        r
    }

    pub fn value(&self, x: &DMatrix<f64>, s: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        0.5 * self.residual(x, s, y).norm_squared()
    }

    /// Euclidean partial gradients `(−R Y Sᵀ, −Rᵀ X S)` at fixed `S`.
    pub fn gradient(
        &self,
        x: &DMatrix<f64>,
        s: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let r = self.residual(x, s, y);
        Self::gradient_from_residual(&r, x, s, y)
    }

    fn gradient_from_residual(
        r: &DMatrix<f64>,
        x: &DMatrix<f64>,
        s: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let gx = -(r * y) * s.transpose();
        let gy = -(r.tr_mul(x)) * s;
        (gx, gy)
    }

    /// `argmin_S 𝔉(X, Y, S)` via the normal equations
    /// `Σ_ab S_ab Σ_i X_ia X_ic Σ_j W_ij Y_jb Y_jd = (Xᵀ P_E(M) Y)_cd`.
    pub fn optimal_core(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let q = x.ncols();
        let qq = q * q;
        let y_pairs = DMatrix::from_fn(n, qq, |j, k| y[(j, k / q)] * y[(j, k % q)]);
        let x_pairs = DMatrix::from_fn(n, qq, |i, k| x[(i, k / q)] * x[(i, k % q)]);
        // g[(i, (b, d))] = Σ_j W_ij Y_jb Y_jd
        let g = &self.weights * y_pairs;
        // p[((a, c), (b, d))] = Σ_i X_ia X_ic g[(i, (b, d))]
        let p = x_pairs.tr_mul(&g);
        let normal = DMatrix::from_fn(qq, qq, |row, col| {
            let (c, d) = (row / q, row % q);
            let (a, b) = (col / q, col % q);
            p[(c * q + a, d * q + b)]
        });
        let rhs_mat = x.tr_mul(&self.observed) * y;
        let rhs = DVector::from_fn(qq, |k, _| rhs_mat[(k / q, k % q)]);
        let sol = match normal.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => {
                let scale = normal.amax().max(f64::MIN_POSITIVE);
                normal
                    .svd(true, true)
                    .solve(&rhs, 1e-13 * scale)
                    .unwrap_or_else(|_| DVector::zeros(qq))
            }
        };
        DMatrix::from_fn(q, q, |a, b| sol[a * q + b])
    }
}

fn tangent_project(base: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    g - base * base.tr_mul(g)
}

fn scaled_direction(g: &DMatrix<f64>, gram: DMatrix<f64>) -> DMatrix<f64> {
    let q = gram.nrows();
    let reg = 1e-12 * gram.trace().abs().max(f64::MIN_POSITIVE);
    let shifted = gram + DMatrix::identity(q, q) * reg;
    match shifted.clone().cholesky() {
        Some(chol) => {
            // g · (shifted)⁻¹ = (shifted⁻¹ · gᵀ)ᵀ since `shifted` is symmetric
            chol.solve(&g.transpose()).transpose()
        }
        None => g.clone(),
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

pub fn optspace_complete(
    values: &DMatrix<f64>,
    mask: &PairSet,
    opts: &CompletionOptions,
) -> Result<CompletionResult, CompletionError> {
    opts.validate()?;
    let n = mask.dim();
    if values.shape() != (n, n) {
        return Err(CompletionError::DimensionMismatch {
            rows: values.nrows(),
            cols: values.ncols(),
            n,
        });
    }
    if mask.is_empty() {
        return Err(CompletionError::EmptyMask);
    }
    let q = opts.rank;
    if q > n {
        return Err(CompletionError::RankTooLarge { rank: q, n });
    }
    let p_hat = match opts.sampling_rate {
        SamplingRate::Estimate => estimate_sampling_rate(mask, n),
        SamplingRate::Fixed(p) => p,
    };

    let (observed, mask) = if opts.trimming {
        trim(values, mask, opts.trim_seed)
    } else {
        (mask.project(values), mask.clone())
    };
    if mask.is_empty() {
        return Err(CompletionError::EmptyMask);
    }
    let unreliable_rows: Vec<usize> = mask
        .row_counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| i)
        .collect();
    let unreliable_cols: Vec<usize> = mask
        .col_counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(j, _)| j)
        .collect();

    let init = rank_q_projection(&observed, &mask, q, p_hat)?;
    let objective = MaskedObjective::new(&observed, &mask);
    let scale = observed.norm_squared();

    let mut x = init.left;
    let mut y = init.right;
    let mut s = objective.optimal_core(&x, &y);
    let mut residual = objective.residual(&x, &s, &y);
    let mut cost = 0.5 * residual.norm_squared();
    let mut cost_trace = Vec::with_capacity(opts.max_iters.min(1024) + 1);
    let mut trace = Vec::new();
    cost_trace.push(cost);

    let mut step_hint = match opts.metric {
        DescentMetric::Scaled => 1.0,
        DescentMetric::Euclidean => {
            let top = linalg::singular_values(&s).first().copied().unwrap_or(0.0);
            if top > 0.0 {
                1.0 / (p_hat * top * top)
            } else {
                1.0
            }
        }
    };

    let exact_floor = 1e-30 * scale;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        if cost <= exact_floor {
            stop = StopReason::ExactFit;
            break;
        }
        let (gx, gy) = MaskedObjective::gradient_from_residual(&residual, &x, &s, &y);
        let gx = tangent_project(&x, &gx);
        let gy = tangent_project(&y, &gy);
        let grad_norm = libm::sqrt(gx.norm_squared() + gy.norm_squared());
        let (dx, dy) = match opts.metric {
            DescentMetric::Euclidean => (-&gx, -&gy),
            DescentMetric::Scaled => (
                -scaled_direction(&gx, &s * s.transpose()),
                -scaled_direction(&gy, s.tr_mul(&s)),
            ),
        };
        let slope = gx.dot(&dx) + gy.dot(&dy);
        if !(slope < 0.0) {
            stop = StopReason::Stalled;
            break;
        }

        let mut step = match opts.metric {
            DescentMetric::Scaled => (2.0 * step_hint).min(1.0),
            DescentMetric::Euclidean => 2.0 * step_hint,
        };
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let x_try = linalg::thin_q(&(&x + &dx * step));
            let y_try = linalg::thin_q(&(&y + &dy * step));
            let s_try = objective.optimal_core(&x_try, &y_try);
            let r_try = objective.residual(&x_try, &s_try, &y_try);
            let c_try = 0.5 * r_try.norm_squared();
            if c_try <= cost + ARMIJO * step * slope {
                accepted = Some((x_try, s_try, y_try, r_try, c_try));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, s_new, y_new, r_new, c_new)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        iterations += 1;
        let decrease = cost - c_new;
        x = x_new;
        y = y_new;
        s = s_new;
        residual = r_new;
        let previous = cost;
        cost = c_new;
        step_hint = step;
        cost_trace.push(cost);
        trace.push(IterationRecord {
            iteration: iterations,
            cost,
            grad_norm,
            step,
        });
        if decrease < opts.rel_tol * previous {
            stop = StopReason::Tolerance;
            break;
        }
    }

    let factors = Factors { x, s, y };
    Ok(CompletionResult {
        estimate: factors.product(),
        factors,
        cost_trace,
        trace,
        iterations,
        stop,
        sampling_rate: p_hat,
        unreliable_rows,
        unreliable_cols,
        rank_deficient: init.rank_deficient,
    })
}
