//! Dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Thin SVD with singular triplets sorted by decreasing singular value.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let v = DMatrix::from_fn(v_t.ncols(), order.len(), |j, k| v_t[(order[k], j)]);
    SortedSvd {
        u,
        singular_values: order.iter().map(|&k| s[k]).collect(),
        v,
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Dimension above which [`spectral_norm`] switches from a full SVD to
/// power iteration on `MᵀM`.
pub const DENSE_NORM_LIMIT: usize = 300;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows().max(m.ncols()) <= DENSE_NORM_LIMIT {
        return singular_values(m)[0];
    }
    power_norm(m, 1e-12, 5000)
}

/// Power iteration on `MᵀM`. The start vector is all ones with a small
/// index-dependent tilt, which overlaps the Perron vector of nonnegative
/// matrices and is never exactly orthogonal to a generic top vector.
pub fn power_norm(m: &DMatrix<f64>, rel_tol: f64, max_iters: usize) -> f64 {
    let n = m.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * ((i % 7) as f64));
    let norm = v.norm();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let mv = m * &v;
        let sigma = mv.norm();
        if sigma == 0.0 {
            return 0.0;
        }
        let mut w = m.tr_mul(&mv);
        let wn = w.norm();
        if wn == 0.0 {
            return sigma;
        }
        w /= wn;
        v = w;
        if (sigma - estimate).abs() <= rel_tol * sigma {
            return sigma;
        }
        estimate = sigma;
    }
    estimate
}

/// Orthonormal basis of the column space of a tall matrix via thin QR.
pub fn thin_q(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    // fix the sign so the diagonal of R is nonnegative
    let mut q = q;
    for k in 0..q.ncols().min(r.nrows()) {
        if r[(k, k)] < 0.0 {
            let mut col = q.column_mut(k);
            col.neg_mut();
        }
    }
    q
}

/// `‖AᵀA − I‖_max` for a matrix meant to have orthonormal columns.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.tr_mul(m);
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
