//! Ring layouts and their distance matrices.
//!
//! Sensors are placed independently and uniformly over the area of an
//! annulus with central radius `r0` and width `a`. Writing the radius as
//! `r0 + ρ`, the radial offset has density `(r0 + ρ) / (r0·a)` on
//! `[−a/2, a/2]` and CDF `((r0 + ρ)² − (r0 − a/2)²) / (2·r0·a)`, which
//! inverts in closed form.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::linalg;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid layout parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Sensor positions (meters) with the ring they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    pub positions: Vec<[f64; 2]>,
    pub r0: f64,
    pub a: f64,
    pub seed: u64,
}

impl SensorLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `n × 2` coordinate matrix.
    pub fn coords(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), 2, |i, k| self.positions[i][k])
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.iter().map(|p| libm::hypot(p[0], p[1]))
    }

    /// Largest possible inter-sensor distance on this ring.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.r0 + self.a
    }
}

/// Pairwise Euclidean distances (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(pub DMatrix<f64>);

/// Elementwise squares of a [`DistanceMatrix`] (meters²).
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistanceMatrix(pub DMatrix<f64>);

impl DistanceMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl SquaredDistanceMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Radial offset for a uniform draw `u ∈ [0, 1]` (inverse CDF).
pub fn radial_offset(r0: f64, a: f64, u: f64) -> f64 {
    let inner = r0 - 0.5 * a;
    -r0 + libm::sqrt(inner * inner + 2.0 * r0 * a * u)
}

/// CDF of the radial offset, for goodness-of-fit checks.
pub fn radial_cdf(r0: f64, a: f64, rho: f64) -> f64 {
    if a == 0.0 {
        return if rho >= 0.0 { 1.0 } else { 0.0 };
    }
    let inner = r0 - 0.5 * a;
    let r = r0 + rho;
    ((r * r - inner * inner) / (2.0 * r0 * a)).clamp(0.0, 1.0)
}

pub fn generate_ring_layout(n: usize, r0: f64, a: f64, seed: u64) -> Result<SensorLayout, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidParameter("n must be at least 1"));
    }
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(GeometryError::InvalidParameter("r0 must be positive"));
    }
    if !(a >= 0.0) || a >= 2.0 * r0 {
        return Err(GeometryError::InvalidParameter("ring width must satisfy 0 <= a < 2*r0"));
    }
    let mut rng = seed::rng(seed);
    let positions = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let theta = 2.0 * PI * rng.random::<f64>();
            let r = if a == 0.0 { r0 } else { r0 + radial_offset(r0, a, u) };
            [r * libm::cos(theta), r * libm::sin(theta)]
        })
        .collect();
    Ok(SensorLayout { positions, r0, a, seed })
}

/// Distances are computed once per unordered pair and mirrored, so the
/// result is bit-exactly symmetric.
pub fn pairwise_distance_matrix(layout: &SensorLayout) -> DistanceMatrix {
    let n = layout.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = layout.positions[i];
            let q = layout.positions[j];
            let dist = libm::hypot(p[0] - q[0], p[1] - q[1]);
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    DistanceMatrix(d)
}

pub fn squared_distance_matrix(d: &DistanceMatrix) -> SquaredDistanceMatrix {
    SquaredDistanceMatrix(d.0.map(|x| x * x))
}

/// Relative threshold on `σ_k / σ_1` used to count the numeric rank.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RankCertificate {
    pub numeric_rank: usize,
    pub singular_values: Vec<f64>,
    /// 3 for sensors exactly on a circle, otherwise 4 (capped by `n`).
    pub expected_rank: usize,
}

impl RankCertificate {
    pub fn holds(&self) -> bool {
        self.numeric_rank <= self.expected_rank
    }

    /// `σ_k / σ_1` (1-based `k`), zero past the end of the spectrum.
    pub fn ratio(&self, k: usize) -> f64 {
        match (self.singular_values.first(), self.singular_values.get(k - 1)) {
            (Some(&s1), Some(&sk)) if s1 > 0.0 => sk / s1,
            _ => 0.0,
        }
    }
}

pub fn rank_certificate(db: &SquaredDistanceMatrix, on_circle: bool) -> RankCertificate {
    let singular_values = linalg::singular_values(&db.0);
    let top = singular_values.first().copied().unwrap_or(0.0);
    let numeric_rank = if top == 0.0 {
        0
    } else {
        singular_values.iter().filter(|&&s| s > RANK_TOL * top).count()
    };
    let expected_rank = if on_circle { 3 } else { 4 }.min(db.dim());
    RankCertificate {
        numeric_rank,
        singular_values,
        expected_rank,
    }
}

/// Explicit rank-4 factorization `D̄ = A·S·Aᵀ` with
/// `A = [r0, x, y, 2·r0·ρ + ρ²]` and
/// `S = [[2, 0, 0, 1/r0], [0, −2, 0, 0], [0, 0, −2, 0], [1/r0, 0, 0, 0]]`,
/// where `ρ_i = ‖x_i‖ − r0`.
pub fn squared_distance_factors(layout: &SensorLayout) -> (DMatrix<f64>, DMatrix<f64>) {
    let r0 = layout.r0;
    let a = DMatrix::from_fn(layout.len(), 4, |i, k| {
        let p = layout.positions[i];
        match k {
            0 => r0,
            1 => p[0],
            2 => p[1],
            _ => {
                let rho = libm::hypot(p[0], p[1]) - r0;
                2.0 * r0 * rho + rho * rho
            }
        }
    });
    let mut s = DMatrix::zeros(4, 4);
    s[(0, 0)] = 2.0;
    s[(1, 1)] = -2.0;
    s[(2, 2)] = -2.0;
    s[(0, 3)] = 1.0 / r0;
    s[(3, 0)] = 1.0 / r0;
    (a, s)
}

/// Rank-3 factorization for sensors on a circle of radius `r`:
/// `D̄ = V·diag(2, −2, −2)·Vᵀ` with `V = [r, x, y]`.
pub fn circle_factors(layout: &SensorLayout, r: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let v = DMatrix::from_fn(layout.len(), 3, |i, k| match k {
        0 => r,
        _ => layout.positions[i][k - 1],
    });
    let mut s = DMatrix::zeros(3, 3);
    s[(0, 0)] = 2.0;
    s[(1, 1)] = -2.0;
    s[(2, 2)] = -2.0;
    (v, s)
}
