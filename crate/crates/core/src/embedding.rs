//! Classical metric MDS and the rigid-motion invariant position error.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::baselines::BaselineTag;
use crate::geometry::SquaredDistanceMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("embedding dimension must be between 1 and n")]
    InvalidDimension,
}

/// Which pipeline produced a set of coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    GroundTruth,
    ClassicalMds,
    /// Completion + MDS (with the delay known or estimated).
    Pipeline,
    Baseline(BaselineTag),
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::GroundTruth => "ground-truth",
            Source::ClassicalMds => "mds",
            Source::Pipeline => "pipeline",
            Source::Baseline(tag) => tag.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    /// `n × η` coordinates, meters.
    pub coords: DMatrix<f64>,
    pub source: Source,
}

impl PositionEstimate {
    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        let y = if self.coords.ncols() > 1 { self.coords[(i, 1)] } else { 0.0 };
        [self.coords[(i, 0)], y]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let diff = self.coords.row(i) - self.coords.row(j);
        diff.norm()
    }
}

/// `L = I − (1/n)·11ᵀ`.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let inv = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// Subtracts column means, i.e. returns `L·X`.
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    let n = x.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// `−½·L·D·L` computed by double centering.
pub fn gram_from_squared(db: &DMatrix<f64>) -> DMatrix<f64> {
    let n = db.nrows();
    let nf = n as f64;
    let sym = (db + db.transpose()) * 0.5;
    let row_means: Vec<f64> = (0..n).map(|i| sym.row(i).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| -0.5 * (sym[(i, j)] - row_means[i] - row_means[j] + grand))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsOutput {
    pub estimate: PositionEstimate,
    /// Top `η` eigenvalues of `−½·L·D̄·L`, before clamping.
    pub eigenvalues: Vec<f64>,
    /// Total magnitude of the negative part of the spectrum.
    pub clamped: f64,
    /// Some eigenvalue fell below `−10⁻⁸·|λ|_max`: the input is not Euclidean.
    pub negative_spectrum: bool,
}

/// `U_η Σ_η^{1/2}` from the top `η` eigenpairs of `−½·L·D̄·L`.
///
/// Negative eigenvalues are clamped to zero before the square root. The
/// output is explicitly re-centered so that `L·X̂ = X̂` holds to rounding.
pub fn classical_mds(db: &SquaredDistanceMatrix, eta: usize) -> Result<MdsOutput, EmbeddingError> {
    let n = db.dim();
    if eta == 0 || eta > n {
        return Err(EmbeddingError::InvalidDimension);
    }
    let b = gram_from_squared(&db.0);
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let eigenvalues: Vec<f64> = order[..eta].iter().map(|&k| eig.eigenvalues[k]).collect();
    let negative_spectrum = eig.eigenvalues.iter().any(|&l| l < -1e-8 * largest);
    let clamped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();

    let coords = DMatrix::from_fn(n, eta, |i, k| {
        let lambda = eigenvalues[k].max(0.0);
        eig.eigenvectors[(i, order[k])] * libm::sqrt(lambda)
    });
    Ok(MdsOutput {
        estimate: PositionEstimate {
            coords: center_columns(&coords),
            source: Source::ClassicalMds,
        },
        eigenvalues,
        clamped,
        negative_spectrum,
    })
}

fn check_same_shape(x: &DMatrix<f64>, xh: &DMatrix<f64>) -> Result<(), EmbeddingError> {
    if x.shape() != xh.shape() {
        return Err(EmbeddingError::DimensionMismatch {
            left: x.shape(),
            right: xh.shape(),
        });
    }
    Ok(())
}

/// `d(X, X̂) = (1/n)·‖L X Xᵀ L − L X̂ X̂ᵀ L‖_F`, meters².
///
/// The difference of the centered Gram matrices is formed entry by entry;
/// expanding the Frobenius norm into traces would cancel catastrophically
/// when the two configurations agree.
pub fn position_distance(x: &DMatrix<f64>, xh: &DMatrix<f64>) -> Result<f64, EmbeddingError> {
    check_same_shape(x, xh)?;
    let n = x.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let xc = center_columns(x);
    let hc = center_columns(xh);
    let eta = x.ncols();
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let mut diff = 0.0;
            for k in 0..eta {
                diff += xc[(i, k)] * xc[(j, k)] - hc[(i, k)] * hc[(j, k)];
            }
            total += diff * diff;
        }
    }
    Ok(libm::sqrt(total) / n as f64)
}

/// Orthogonal map plus translation: `p ↦ p·Q + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: DMatrix<f64>,
    pub translation: DMatrix<f64>,
}

/// Rigid transform of `xh` (rotation or reflection, then translation) closest
/// to `x_ref` in Frobenius norm.
pub fn procrustes_align(
    x_ref: &DMatrix<f64>,
    xh: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, RigidTransform), EmbeddingError> {
    check_same_shape(x_ref, xh)?;
    let n = x_ref.nrows();
    let eta = x_ref.ncols();
    let nf = n.max(1) as f64;
    let ref_mean = DMatrix::from_fn(1, eta, |_, k| x_ref.column(k).sum() / nf);
    let est_mean = DMatrix::from_fn(1, eta, |_, k| xh.column(k).sum() / nf);
    let rc = center_columns(x_ref);
    let hc = center_columns(xh);
    let cross = hc.tr_mul(&rc);
    let svd = cross.svd(true, true);
    let rotation = svd.u.expect("requested U") * svd.v_t.expect("requested V^T");
    let translation = &ref_mean - &est_mean * &rotation;
    let mut aligned = xh * &rotation;
    for mut row in aligned.row_iter_mut() {
        row += &translation;
    }
    Ok((aligned, RigidTransform { rotation, translation }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_ring_layout, pairwise_distance_matrix, squared_distance_matrix};
    use core::f64::consts::PI;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[libm::cos(theta), -libm::sin(theta), libm::sin(theta), libm::cos(theta)])
    }

    fn shifted(x: &DMatrix<f64>, q: &DMatrix<f64>, s: [f64; 2]) -> DMatrix<f64> {
        let mut y = x * q;
        for mut row in y.row_iter_mut() {
            row[0] += s[0];
            row[1] += s[1];
        }
        y
    }

    #[test]
    fn centering_small_cases() {
        assert_eq!(centering_matrix(1), DMatrix::from_element(1, 1, 0.0));
        assert_eq!(centering_matrix(2), DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }

    #[test]
    fn centering_is_a_projector() {
        for n in [3, 10, 57] {
            let l = centering_matrix(n);
            assert!((&l * &l - &l).norm() < 1e-12);
            assert_eq!(l, l.transpose());
            let ones = DMatrix::from_element(n, 1, 1.0);
            assert!((&l * ones).norm() < 1e-12);
            let rank = l.clone().svd(false, false).singular_values.iter().filter(|&&s| s > 1e-9).count();
            assert_eq!(rank, n - 1);
        }
    }

    #[test]
    fn double_centering_matches_explicit_product() {
        let layout = generate_ring_layout(20, 0.1, 0.01, 2).unwrap();
        let db = squared_distance_matrix(&pairwise_distance_matrix(&layout)).0;
        let l = centering_matrix(20);
        let explicit = &l * &db * &l * -0.5;
        assert!((gram_from_squared(&db) - explicit).norm() < 1e-15);
    }

    #[test]
    fn mds_recovers_exact_layouts() {
        for n in [10, 100] {
            let layout = generate_ring_layout(n, 0.1, 0.01, n as u64).unwrap();
            let db = squared_distance_matrix(&pairwise_distance_matrix(&layout));
            let out = classical_mds(&db, 2).unwrap();
            let d = position_distance(&layout.coords(), &out.estimate.coords).unwrap();
            assert!(d < 1e-12, "n = {n}: {d}");
            assert!(!out.negative_spectrum);
            let l = centering_matrix(n);
            assert!((&l * &out.estimate.coords - &out.estimate.coords).amax() < 1e-12);
        }
    }

    #[test]
    fn mds_unit_square() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let db = DMatrix::from_fn(4, 4, |i, j| {
            let dx: f64 = pts[i][0] - pts[j][0];
            let dy: f64 = pts[i][1] - pts[j][1];
            dx * dx + dy * dy
        });
        let out = classical_mds(&SquaredDistanceMatrix(db), 2).unwrap();
        let mut dists = alloc::vec::Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                dists.push(out.estimate.distance(i, j));
            }
        }
        dists.sort_by(f64::total_cmp);
        let expected = [1.0, 1.0, 1.0, 1.0, libm::sqrt(2.0), libm::sqrt(2.0)];
        for (got, want) in dists.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mds_of_zero_matrix_collapses_to_origin() {
        let out = classical_mds(&SquaredDistanceMatrix(DMatrix::zeros(6, 6)), 2).unwrap();
        assert!(out.estimate.coords.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mds_flags_non_euclidean_input() {
        // three points whose "distances" break the triangle inequality
        let db = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 16.0, 1.0, 0.0, 1.0, 16.0, 1.0, 0.0]);
        let out = classical_mds(&SquaredDistanceMatrix(db), 2).unwrap();
        assert!(out.negative_spectrum);
        assert!(out.clamped > 0.0);
        assert!(out.estimate.coords.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn distance_zero_for_identical_and_rigid_copies() {
        let layout = generate_ring_layout(30, 0.1, 0.01, 3).unwrap();
        let x = layout.coords();
        assert_eq!(position_distance(&x, &x).unwrap(), 0.0);
        let y = shifted(&x, &rotation(0.7), [0.3, -1.2]);
        assert!(position_distance(&x, &y).unwrap() < 1e-12);
        let reflect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let z = shifted(&x, &reflect, [2.0, 0.5]);
        assert!(position_distance(&x, &z).unwrap() < 1e-12);
    }

    #[test]
    fn distance_of_scaled_pair() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let xh = &x * 2.0;
        let d = position_distance(&x, &xh).unwrap();
        assert!((d - 0.75).abs() < 1e-12);
    }

    #[test]
    fn distance_is_symmetric_and_checks_shapes() {
        let a = generate_ring_layout(12, 0.1, 0.01, 1).unwrap().coords();
        let b = generate_ring_layout(12, 0.1, 0.01, 2).unwrap().coords();
        let ab = position_distance(&a, &b).unwrap();
        let ba = position_distance(&b, &a).unwrap();
        assert!(ab > 0.0);
        assert!((ab - ba).abs() <= 1e-18);
        assert!(position_distance(&a, &DMatrix::zeros(11, 2)).is_err());
    }

    #[test]
    fn procrustes_undoes_rigid_motion() {
        let x = generate_ring_layout(25, 0.1, 0.02, 4).unwrap().coords();
        let y = shifted(&x, &rotation(2.0 * PI / 3.0), [0.05, 0.4]);
        let (aligned, _) = procrustes_align(&x, &y).unwrap();
        assert!((aligned - &x).amax() < 1e-10);

        let (same, t) = procrustes_align(&x, &x).unwrap();
        assert!((same - &x).amax() < 1e-12);
        assert!((t.rotation - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(t.translation.amax() < 1e-12);
    }

    #[test]
    fn procrustes_beats_random_rigid_motions() {
        use rand::Rng;
        let x = generate_ring_layout(40, 0.1, 0.02, 5).unwrap().coords();
        let mut rng = crate::seed::rng(77);
        let noisy = DMatrix::from_fn(40, 2, |i, k| x[(i, k)] + 0.003 * (rng.random::<f64>() - 0.5));
        let y = shifted(&noisy, &rotation(1.1), [-0.2, 0.1]);
        let (aligned, _) = procrustes_align(&x, &y).unwrap();
        let best = (aligned - &x).norm();
        for _ in 0..100 {
            let theta = 2.0 * PI * rng.random::<f64>();
            let mut q = rotation(theta);
            if rng.random::<bool>() {
                q = q * DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
            }
            let s = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let candidate = shifted(&y, &q, s);
            assert!(best <= (candidate - &x).norm() + 1e-15);
        }
    }
}
