//! Synthetic measurements: structured and random missing entries, symmetric
//! Gaussian noise and a constant transmission delay.
//!
//! Observed entries follow `N_ij = d_ij + d0 + Z_ij` on `E ∩ S^⊥` and are
//! zero everywhere else, including on `S` (the delay and noise are only
//! defined off the structured set).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{pairwise_distance_matrix, DistanceMatrix, SensorLayout, SquaredDistanceMatrix};
use crate::linalg;
use crate::mask::PairSet;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservationError {
    #[error("invalid observation parameter: {0}")]
    InvalidParameter(&'static str),
}

/// How structured-missing pairs are presented to the completion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StructuredMode {
    /// Pairs in `S` are unknown; the completion mask is `E ∩ S^⊥`.
    #[default]
    Practical,
    /// Pairs in `S ∩ E` are fed to the completion as observed zeros.
    Theorem,
}

impl StructuredMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StructuredMode::Practical => "practical",
            StructuredMode::Theorem => "theorem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "practical" => Some(StructuredMode::Practical),
            "theorem" => Some(StructuredMode::Theorem),
            _ => None,
        }
    }
}

/// Structured set `S` and random keep set `E`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPair {
    pub structured: PairSet,
    pub random: PairSet,
}

impl MaskPair {
    pub fn dim(&self) -> usize {
        self.random.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    /// `N^E`, meters; zero outside `E ∩ S^⊥`.
    pub values: DMatrix<f64>,
    pub masks: MaskPair,
    pub d0_true: f64,
    pub sigma: f64,
    pub c0: f64,
    pub mode: StructuredMode,
}

impl ObservationSet {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// `E ∩ S^⊥`: entries that carry an actual measurement.
    pub fn measured(&self) -> PairSet {
        self.masks.random.difference(&self.masks.structured)
    }

    /// Mask handed to the completion step, depending on [`StructuredMode`].
    pub fn completion_mask(&self) -> PairSet {
        match self.mode {
            StructuredMode::Practical => self.measured(),
            StructuredMode::Theorem => self.masks.random.clone(),
        }
    }

    pub fn t0_true(&self) -> f64 {
        self.d0_true / self.c0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationParams {
    /// Dimensionless multiplier in `δ_n = δ·r0·sqrt(ln n / n)`.
    pub delta: f64,
    /// Per-ordered-pair keep probability.
    pub p: f64,
    /// Noise standard deviation, meters.
    pub sigma: f64,
    /// Delay expressed as a distance, `d0 = c0·t0`, meters.
    pub d0: f64,
    /// Sound speed, meters/second.
    pub c0: f64,
    pub mode: StructuredMode,
    /// One noise draw per unordered pair (default) or per ordered pair.
    pub symmetric_noise: bool,
}

impl Default for ObservationParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            p: 0.95,
            sigma: 0.0,
            d0: 0.0,
            c0: 1500.0,
            mode: StructuredMode::Practical,
            symmetric_noise: true,
        }
    }
}

/// `δ_n = δ·r0·sqrt(ln n / n)` (natural log).
pub fn structured_radius(n: usize, r0: f64, delta: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    delta * r0 * libm::sqrt(libm::log(nf) / nf)
}

/// `S = {(i, j) : d_ij ≤ δ_n, i ≠ j}`.
pub fn structured_mask(layout: &SensorLayout, delta: f64) -> PairSet {
    let d = pairwise_distance_matrix(layout);
    structured_mask_from(&d, structured_radius(layout.len(), layout.r0, delta), delta > 0.0)
}

fn structured_mask_from(d: &DistanceMatrix, radius: f64, enabled: bool) -> PairSet {
    let n = d.dim();
    let mut s = PairSet::empty(n);
    if !enabled {
        return s;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && d.0[(i, j)] <= radius {
                s.insert(i, j);
            }
        }
    }
    s
}

/// Keeps each ordered off-diagonal pair independently with probability `p`.
pub fn random_mask(n: usize, p: f64, seed: u64) -> Result<PairSet, ObservationError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ObservationError::InvalidParameter("keep probability must lie in (0, 1]"));
    }
    let mut rng = seed::rng(seed);
    let mut e = PairSet::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                e.insert(i, j);
            }
        }
    }
    Ok(e)
}

pub fn synthesize_observation(
    layout: &SensorLayout,
    params: &ObservationParams,
    seed: u64,
) -> Result<ObservationSet, ObservationError> {
    synthesize_with_noise(layout, params, seed).map(|(obs, _)| obs)
}

/// Like [`synthesize_observation`] but also returns the full noise matrix
/// `Z` (before masking), for diagnostics.
pub fn synthesize_with_noise(
    layout: &SensorLayout,
    params: &ObservationParams,
    seed: u64,
) -> Result<(ObservationSet, DMatrix<f64>), ObservationError> {
    if !(params.sigma >= 0.0) {
        return Err(ObservationError::InvalidParameter("sigma must be nonnegative"));
    }
    if !(params.d0 >= 0.0) {
        return Err(ObservationError::InvalidParameter("d0 must be nonnegative"));
    }
    if !(params.delta >= 0.0) {
        return Err(ObservationError::InvalidParameter("delta must be nonnegative"));
    }
    if !(params.c0 > 0.0) {
        return Err(ObservationError::InvalidParameter("c0 must be positive"));
    }
    let n = layout.len();
    let d = pairwise_distance_matrix(layout);
    let structured = structured_mask_from(
        &d,
        structured_radius(n, layout.r0, params.delta),
        params.delta > 0.0,
    );
    let random = random_mask(n, params.p, seed::derive(seed, "random-mask", 0))?;
    let noise = noise_matrix(n, params.sigma, params.symmetric_noise, seed::derive(seed, "noise", 0));

    let values = DMatrix::from_fn(n, n, |i, j| {
        if random.contains(i, j) && !structured.contains(i, j) {
            d.0[(i, j)] + params.d0 + noise[(i, j)]
        } else {
            0.0
        }
    });
    let obs = ObservationSet {
        values,
        masks: MaskPair { structured, random },
        d0_true: params.d0,
        sigma: params.sigma,
        c0: params.c0,
        mode: params.mode,
    };
    Ok((obs, noise))
}

fn noise_matrix(n: usize, sigma: f64, symmetric: bool, seed: u64) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(n, n);
    if sigma == 0.0 {
        return z;
    }
    let mut rng = seed::rng(seed);
    for i in 0..n {
        let start = if symmetric { i + 1 } else { 0 };
        for j in start..n {
            if i == j {
                continue;
            }
            let draw: f64 = rng.sample(StandardNormal);
            z[(i, j)] = sigma * draw;
            if symmetric {
                z[(j, i)] = sigma * draw;
            }
        }
    }
    z
}

/// `D̄^s`: squared distances on `S`, zero elsewhere.
pub fn structured_part(db: &SquaredDistanceMatrix, s: &PairSet) -> DMatrix<f64> {
    s.project(&db.0)
}

/// `‖P_E(D̄^s)‖₂`.
pub fn structured_noise_norm(db_s: &DMatrix<f64>, e: &PairSet) -> f64 {
    linalg::spectral_norm(&e.project(db_s))
}

/// `‖P_E(Ȳ)‖₂` with `Ȳ = Z̄∘Z̄ + 2·Z̄∘D̄`, where `dist_unstructured` holds the
/// (unsquared) distances off the structured set.
pub fn effective_noise_norm(zbar: &DMatrix<f64>, dist_unstructured: &DMatrix<f64>, e: &PairSet) -> f64 {
    assert_eq!(zbar.shape(), dist_unstructured.shape(), "shape mismatch");
    let y = zbar.zip_map(dist_unstructured, |z, d| z * z + 2.0 * z * d);
    linalg::spectral_norm(&e.project(&y))
}

/// Scale `δ³·(r0 + a)²·(ln n / n)^{3/2}·p·n` of the operator-norm bound on
/// the structured part.
pub fn structured_norm_scale(n: usize, r0: f64, a: f64, delta: f64, p: f64) -> f64 {
    let nf = n as f64;
    let ratio = libm::log(nf) / nf;
    delta * delta * delta * (r0 + a) * (r0 + a) * ratio * libm::sqrt(ratio) * p * nf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_ring_layout, squared_distance_matrix};
    use alloc::vec::Vec;

    #[test]
    fn zero_delta_gives_empty_structure() {
        let layout = generate_ring_layout(50, 0.1, 0.01, 2).unwrap();
        assert!(structured_mask(&layout, 0.0).is_empty());
    }

    #[test]
    fn structured_radius_at_ten_centimeters() {
        let r = structured_radius(200, 0.10, 1.0);
        assert!((r - 1.628e-2).abs() < 1e-5, "{r}");
    }

    #[test]
    fn structured_mask_matches_brute_force() {
        let layout = generate_ring_layout(200, 0.10, 0.01, 21).unwrap();
        let s = structured_mask(&layout, 1.0);
        let radius = 0.1 * libm::sqrt(libm::log(200.0) / 200.0);
        let mut expected = 0;
        for i in 0..200 {
            for j in 0..200 {
                let p = layout.positions[i];
                let q = layout.positions[j];
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let close = i != j && libm::sqrt(dx * dx + dy * dy) <= radius;
                assert_eq!(close, s.contains(i, j));
                expected += close as usize;
            }
        }
        assert_eq!(s.len(), expected);
        assert!(s.is_symmetric());
        assert!(expected > 0);
    }

    #[test]
    fn antipodal_pair_is_never_structured() {
        let layout = SensorLayout {
            positions: alloc::vec![[0.1, 0.0], [-0.1, 0.0]],
            r0: 0.1,
            a: 0.0,
            seed: 0,
        };
        // δ_n for n = 2 is 0.1·δ·sqrt(ln 2 / 2) ≈ 0.0589·δ
        assert!(structured_mask(&layout, 3.0).is_empty());
    }

    #[test]
    fn full_keep_probability_keeps_everything() {
        let e = random_mask(30, 1.0, 5).unwrap();
        assert_eq!(e.len(), 30 * 29);
    }

    #[test]
    fn random_mask_is_deterministic_and_binomial() {
        let n = 200;
        let a = random_mask(n, 0.95, 17).unwrap();
        let b = random_mask(n, 0.95, 17).unwrap();
        assert_eq!(a, b);
        let trials = (n * (n - 1)) as f64;
        let mean = 0.95 * trials;
        let sd = libm::sqrt(trials * 0.95 * 0.05);
        assert!(((a.len() as f64) - mean).abs() < 3.0 * sd);
        assert!((0..n).all(|i| !a.contains(i, i)));
    }

    #[test]
    fn random_mask_rejects_bad_probability() {
        assert!(random_mask(10, 0.0, 1).is_err());
        assert!(random_mask(10, 1.5, 1).is_err());
    }

    #[test]
    fn clean_full_observation_is_the_distance_matrix() {
        let layout = generate_ring_layout(40, 0.1, 0.01, 8).unwrap();
        let params = ObservationParams {
            delta: 0.0,
            p: 1.0,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 1).unwrap();
        assert_eq!(obs.values, pairwise_distance_matrix(&layout).0);
    }

    #[test]
    fn delay_inflates_every_observed_entry() {
        let layout = generate_ring_layout(40, 0.1, 0.01, 8).unwrap();
        let d0 = 1500.0 * 10e-6;
        let params = ObservationParams {
            d0,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 3).unwrap();
        assert!((d0 - 0.015).abs() < 1e-15);
        let d = pairwise_distance_matrix(&layout);
        for (i, j) in obs.measured().iter() {
            assert!((obs.values[(i, j)] - d.0[(i, j)] - 0.015).abs() < 1e-15);
        }
        assert!((obs.t0_true() - 10e-6).abs() < 1e-18);
    }

    #[test]
    fn noise_residuals_have_requested_spread() {
        let layout = generate_ring_layout(500, 0.1, 0.01, 4).unwrap();
        let sigma = 0.6e-3;
        let params = ObservationParams {
            sigma,
            d0: 0.002,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 9).unwrap();
        let d = pairwise_distance_matrix(&layout);
        // one residual per unordered pair; the mirrored entry is identical
        let residuals: Vec<f64> = obs
            .measured()
            .iter()
            .filter(|&(i, j)| i < j)
            .map(|(i, j)| obs.values[(i, j)] - d.0[(i, j)] - 0.002)
            .collect();
        let m = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let var = residuals.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (residuals.len() - 1) as f64;
        let sd = libm::sqrt(var);
        assert!((sd - sigma).abs() < 0.05 * sigma, "sd {sd}");
    }

    #[test]
    fn synthesized_values_respect_masks() {
        let layout = generate_ring_layout(120, 0.1, 0.01, 12).unwrap();
        let params = ObservationParams {
            sigma: 1e-3,
            d0: 0.01,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 13).unwrap();
        let measured = obs.measured();
        for i in 0..120 {
            assert!(!obs.masks.random.contains(i, i));
            assert!(!obs.masks.structured.contains(i, i));
            for j in 0..120 {
                if !measured.contains(i, j) {
                    assert_eq!(obs.values[(i, j)], 0.0);
                }
                if measured.contains(i, j) && measured.contains(j, i) {
                    assert_eq!(obs.values[(i, j)], obs.values[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn negative_parameters_rejected() {
        let layout = generate_ring_layout(10, 0.1, 0.01, 1).unwrap();
        let bad_sigma = ObservationParams {
            sigma: -1.0,
            ..ObservationParams::default()
        };
        assert!(synthesize_observation(&layout, &bad_sigma, 0).is_err());
        let bad_d0 = ObservationParams {
            d0: -0.1,
            ..ObservationParams::default()
        };
        assert!(synthesize_observation(&layout, &bad_d0, 0).is_err());
    }

    #[test]
    fn theorem_mode_completion_mask_includes_structure() {
        let layout = generate_ring_layout(100, 0.1, 0.01, 3).unwrap();
        let practical = synthesize_observation(&layout, &ObservationParams::default(), 4).unwrap();
        let theorem = synthesize_observation(
            &layout,
            &ObservationParams {
                mode: StructuredMode::Theorem,
                ..ObservationParams::default()
            },
            4,
        )
        .unwrap();
        assert_eq!(practical.values, theorem.values);
        assert_eq!(theorem.completion_mask(), theorem.masks.random);
        assert_eq!(
            practical.completion_mask().len(),
            practical.masks.random.len() - practical.masks.random.intersection(&practical.masks.structured).len()
        );
    }

    #[test]
    fn structured_norm_edge_cases() {
        let n = 6;
        let e = PairSet::off_diagonal(n);
        assert_eq!(structured_noise_norm(&DMatrix::zeros(n, n), &e), 0.0);

        let mut db_s = DMatrix::zeros(n, n);
        db_s[(1, 4)] = 0.25;
        db_s[(4, 1)] = 0.25;
        let one_order = PairSet::from_pairs(n, [(1, 4)]);
        assert!((structured_noise_norm(&db_s, &one_order) - 0.25).abs() < 1e-14);
        let both = structured_noise_norm(&db_s, &e);
        assert!(both >= 0.25 - 1e-14 && both <= 0.25 * libm::sqrt(2.0) + 1e-14);
    }

    #[test]
    fn effective_noise_edge_cases() {
        let n = 5;
        let e = PairSet::off_diagonal(n);
        let d = DMatrix::from_element(n, n, 0.2);
        assert_eq!(effective_noise_norm(&DMatrix::zeros(n, n), &d, &e), 0.0);

        let mut z = DMatrix::zeros(n, n);
        z[(0, 3)] = 1e-3;
        let single = PairSet::from_pairs(n, [(0, 3)]);
        let expected = (1e-3f64 * 1e-3 + 2.0 * 1e-3 * 0.2).abs();
        assert!((effective_noise_norm(&z, &d, &single) - expected).abs() < 1e-15);
    }

    #[test]
    fn structured_rows_concentrate() {
        // max row count of the symmetrized E∩S stays within 3·(δ_n/r0)·p·n
        let n = 400;
        let (r0, a, delta, p) = (0.1, 0.01, 1.0, 0.95);
        let bound = 3.0 * structured_radius(n, r0, delta) / r0 * p * n as f64;
        let mut ok = 0;
        for t in 0..20u64 {
            let layout = generate_ring_layout(n, r0, a, 1000 + t).unwrap();
            let s = structured_mask(&layout, delta);
            let e = random_mask(n, p, 2000 + t).unwrap();
            let es = e.intersection(&s);
            let sym = es.union(&PairSet::from_pairs(n, es.iter().map(|(i, j)| (j, i))));
            let worst = sym.row_counts().into_iter().max().unwrap_or(0) as f64;
            ok += (worst <= bound) as usize;
        }
        assert!(ok >= 19, "{ok}/20 within bound");
    }

    #[test]
    fn structured_part_projects_squares() {
        let layout = generate_ring_layout(60, 0.1, 0.01, 6).unwrap();
        let db = squared_distance_matrix(&pairwise_distance_matrix(&layout));
        let s = structured_mask(&layout, 1.5);
        let part = structured_part(&db, &s);
        let radius = structured_radius(60, 0.1, 1.5);
        assert!(part.iter().all(|&v| v <= radius * radius + 1e-18));
    }
}
