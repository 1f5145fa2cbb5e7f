use proptest::prelude::*;
use ringcal_core::geometry::{circle_factors, squared_distance_factors};
use ringcal_core::{
    generate_ring_layout, pairwise_distance_matrix, rank_certificate, squared_distance_matrix, DMatrix,
};

/// Independent form of the radial CDF: area fraction of the inner annulus.
fn cdf_oracle(r0: f64, a: f64, rho: f64) -> f64 {
    let inner = r0 - a / 2.0;
    (((r0 + rho).powi(2) - inner * inner) / (2.0 * r0 * a)).clamp(0.0, 1.0)
}

fn radial_deviations(n: usize, r0: f64, a: f64, seed: u64) -> Vec<f64> {
    let layout = generate_ring_layout(n, r0, a, seed).unwrap();
    layout.positions.iter().map(|p| p[0].hypot(p[1]) - r0).collect()
}

#[test]
fn radii_pass_kolmogorov_smirnov() {
    let (r0, a) = (0.1, 0.01);
    let mut rho = radial_deviations(100_000, r0, a, 2024);
    rho.sort_by(f64::total_cmp);
    let n = rho.len() as f64;
    let stat = rho
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf_oracle(r0, a, x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // asymptotic critical value at α = 1e-3
    let critical = 1.9495 / n.sqrt();
    assert!(stat < critical, "KS statistic {stat} >= {critical}");
}

#[test]
fn mean_radial_deviation_matches_closed_form() {
    let (r0, a) = (0.1, 0.01);
    let rho = radial_deviations(1_000_000, r0, a, 77);
    let n = rho.len() as f64;
    let mean = rho.iter().sum::<f64>() / n;
    let var = rho.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let expected = a * a / (12.0 * r0);
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, expected {expected}, se {se}");
}

fn relative_residual(db: &DMatrix<f64>, a: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    (db - a * s * a.transpose()).norm() / db.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_exactly_symmetric_with_zero_diagonal(
        n in 2usize..40, r0 in 0.02f64..0.5, frac in 0.0f64..0.4, seed in any::<u64>()
    ) {
        let layout = generate_ring_layout(n, r0, frac * r0, seed).unwrap();
        let d = pairwise_distance_matrix(&layout);
        for i in 0..n {
            prop_assert_eq!(d.0[(i, i)], 0.0);
            for j in 0..n {
                prop_assert_eq!(d.0[(i, j)], d.0[(j, i)]);
                prop_assert!(d.0[(i, j)] >= 0.0);
            }
        }
    }

    #[test]
    fn radii_stay_inside_the_annulus(
        n in 1usize..60, r0 in 0.02f64..0.5, frac in 0.0f64..0.4, seed in any::<u64>()
    ) {
        let a = frac * r0;
        let layout = generate_ring_layout(n, r0, a, seed).unwrap();
        for r in layout.radii() {
            prop_assert!(r >= r0 - a / 2.0 - 1e-12 && r <= r0 + a / 2.0 + 1e-12);
        }
    }

    #[test]
    fn squared_distances_have_rank_at_most_four(
        n in 8usize..50, r0 in 0.05f64..0.2, frac in 0.01f64..0.3, seed in any::<u64>()
    ) {
        let layout = generate_ring_layout(n, r0, frac * r0, seed).unwrap();
        let db = squared_distance_matrix(&pairwise_distance_matrix(&layout));
        let cert = rank_certificate(&db, false);
        prop_assert!(cert.numeric_rank <= 4, "rank {}", cert.numeric_rank);
        let (a, s) = squared_distance_factors(&layout);
        prop_assert!(relative_residual(&db.0, &a, &s) < 1e-12);
    }

    #[test]
    fn circle_decomposition_is_exact(n in 4usize..50, r0 in 0.05f64..0.2, seed in any::<u64>()) {
        let layout = generate_ring_layout(n, r0, 0.0, seed).unwrap();
        let db = squared_distance_matrix(&pairwise_distance_matrix(&layout));
        let (v, s) = circle_factors(&layout, r0);
        prop_assert_eq!(s.clone(), DMatrix::from_diagonal(&ringcal_core::nalgebra::DVector::from_vec(vec![2.0, -2.0, -2.0])));
        prop_assert!(relative_residual(&db.0, &v, &s) < 1e-12);
        prop_assert!(rank_certificate(&db, true).numeric_rank <= 3);
    }
}
