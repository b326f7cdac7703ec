#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use objper::metric::{
    laplacian_from_adjacency, Euclidean, EuclideanPoint, GraphLaplacian, Laplacian, Sphere,
    SpherePoint,
};
use objper::scan::{
    estimate_period, phase_barycenters, phase_of, rss, scan, weighted_fit, ObjectSeries,
};
use objper::simulation::{generate_dirichlet, DirichletConfig};
use objper::MetricSpace;
use proptest::prelude::*;

fn euclidean_series(rows: &[Vec<f64>]) -> ObjectSeries<Euclidean> {
    let dim = rows[0].len();
    let pts = rows
        .iter()
        .map(|r| EuclideanPoint::new(r.clone()).unwrap())
        .collect();
    ObjectSeries::new(Euclidean::new(dim), pts).unwrap()
}

fn laplacian_series(weights: &[Vec<f64>], nodes: usize) -> ObjectSeries<Laplacian> {
    let pts = weights
        .iter()
        .map(|w| {
            let mut a = vec![vec![0.0; nodes]; nodes];
            let mut k = 0;
            for i in 0..nodes {
                for j in i + 1..nodes {
                    a[i][j] = w[k];
                    a[j][i] = w[k];
                    k += 1;
                }
            }
            laplacian_from_adjacency(&a).unwrap()
        })
        .collect();
    ObjectSeries::new(Laplacian::new(nodes), pts).unwrap()
}

fn rows_strategy(max_len: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 4..max_len)
}

/// Least-squares fit on the phase-indicator design, `X (X'X)^-1 X' Y`.
fn hat_matrix_fit(y: &[f64], theta: usize) -> Vec<f64> {
    let t = y.len();
    let x = DMatrix::from_fn(t, theta, |i, l| {
        if phase_of(i + 1, theta) == l + 1 {
            1.0
        } else {
            0.0
        }
    });
    let xtx = x.transpose() * &x;
    let inv = xtx.try_inverse().expect("every phase is populated");
    let fitted = &x * inv * x.transpose() * DVector::from_column_slice(y);
    fitted.iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn grouped_fit_equals_least_squares(
        y in prop::collection::vec(-10.0f64..10.0, 4..40),
        theta_seed in 0usize..1000,
    ) {
        let theta = 1 + theta_seed % y.len().min(10);
        let s = euclidean_series(&y.iter().map(|v| vec![*v]).collect::<Vec<_>>());
        let bary = phase_barycenters(&s, theta).unwrap();
        let oracle = hat_matrix_fit(&y, theta);
        let mut oracle_rss = 0.0;
        for t in 1..=y.len() {
            let got = bary[phase_of(t, theta) - 1].coords()[0];
            prop_assert!((got - oracle[t - 1]).abs() < 1e-9);
            oracle_rss += (y[t - 1] - oracle[t - 1]).powi(2);
        }
        let r = rss(&s, theta).unwrap();
        prop_assert!((r - oracle_rss).abs() <= 1e-8 * oracle_rss.max(1.0));
    }

    #[test]
    fn weighted_and_grouped_sphere_fits_agree(
        raw in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 4..30),
        theta_seed in 0usize..1000,
    ) {
        let pts: Vec<SpherePoint> = raw.iter().map(|v| SpherePoint::normalize(v.clone()).unwrap()).collect();
        let s = ObjectSeries::new(Sphere::new(3), pts).unwrap();
        let theta = 1 + theta_seed % s.len().min(8);
        let bary = phase_barycenters(&s, theta).unwrap();
        let tol = s.space().settings().tolerance;
        for t in 1..=s.len() {
            let w = weighted_fit(&s, theta, t).unwrap();
            let d = s.space().distance(&w, &bary[phase_of(t, theta) - 1]).unwrap();
            prop_assert!(d <= 10.0 * tol, "t = {t}: {d}");
        }
    }

    #[test]
    fn permuting_within_a_phase_keeps_rss_exactly(
        rows in rows_strategy(40, 2),
        theta_seed in 0usize..1000,
        swaps in prop::collection::vec((0usize..1000, 0usize..1000), 1..10),
    ) {
        let theta = 1 + theta_seed % rows.len().min(8);
        let base = euclidean_series(&rows);
        let mut permuted = rows.clone();
        for (a, b) in swaps {
            let i = a % rows.len();
            // another index in the same phase
            let same: Vec<usize> = (0..rows.len()).filter(|j| j % theta == i % theta).collect();
            let j = same[b % same.len()];
            permuted.swap(i, j);
        }
        let other = euclidean_series(&permuted);
        prop_assert_eq!(rss(&base, theta).unwrap(), rss(&other, theta).unwrap());
    }

    #[test]
    fn permuting_laplacians_within_a_phase_keeps_rss_exactly(
        weights in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 3), 4..30),
        theta_seed in 0usize..1000,
    ) {
        let theta = 1 + theta_seed % weights.len().min(6);
        let base = laplacian_series(&weights, 3);
        let mut rev = weights.clone();
        // reverse the order of phase 1's members
        let members: Vec<usize> = (0..rev.len()).step_by(theta).collect();
        for k in 0..members.len() / 2 {
            rev.swap(members[k], members[members.len() - 1 - k]);
        }
        let other = laplacian_series(&rev, 3);
        prop_assert_eq!(rss(&base, theta).unwrap(), rss(&other, theta).unwrap());
    }

    #[test]
    fn scaling_by_powers_of_two_scales_rss_exactly(
        rows in rows_strategy(30, 3),
        k in -3i32..4,
        lambda in 0.0f64..20.0,
    ) {
        let c = 2f64.powi(k);
        let theta_max = rows.len();
        let a = scan(&euclidean_series(&rows), theta_max).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
        let b = scan(&euclidean_series(&scaled), theta_max).unwrap();
        for (x, y) in a.rss().iter().zip(b.rss()) {
            prop_assert_eq!(c * c * x, *y);
        }
        prop_assert_eq!(
            estimate_period(a.rss(), lambda),
            estimate_period(b.rss(), c * c * lambda)
        );
    }

    #[test]
    fn scaling_laplacians_scales_rss(
        weights in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 6), 4..24),
        k in -2i32..3,
    ) {
        let c = 2f64.powi(k);
        let a = scan(&laplacian_series(&weights, 4), weights.len()).unwrap();
        let scaled: Vec<Vec<f64>> = weights.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
        let b = scan(&laplacian_series(&scaled, 4), weights.len()).unwrap();
        for (x, y) in a.rss().iter().zip(b.rss()) {
            prop_assert_eq!(c * c * x, *y);
        }
    }

    #[test]
    fn periodic_series_vanish_exactly_at_multiples(
        pattern in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 2..7),
        cycles in 3usize..8,
    ) {
        let theta0 = pattern.len();
        // the pattern must not itself repeat with a shorter period
        for d in 1..theta0 {
            if theta0 % d == 0 {
                prop_assume!((0..theta0).any(|i| pattern[i] != pattern[i % d]));
            }
        }
        let rows: Vec<Vec<f64>> = (0..theta0 * cycles).map(|i| pattern[i % theta0].clone()).collect();
        let s = euclidean_series(&rows);
        let r = scan(&s, rows.len() / 2).unwrap();
        for theta in 1..=r.theta_max() {
            if theta % theta0 == 0 {
                prop_assert_eq!(r.rss_at(theta), 0.0);
            } else {
                prop_assert!(r.rss_at(theta) > 0.0, "theta = {theta}");
            }
        }
    }
}

#[test]
fn scans_are_bit_identical_across_thread_counts() {
    let rows: Vec<Vec<f64>> = (0..120)
        .map(|i| vec![((i * 37) % 17) as f64 * 0.3, ((i * 11) % 7) as f64])
        .collect();
    let s = euclidean_series(&rows);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scan(&s, 44).unwrap().rss().to_vec())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));

    let dir = generate_dirichlet(&DirichletConfig {
        len: 100,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let a = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| scan(&dir, 40).unwrap().rss().to_vec());
    let b = scan(&dir, 40).unwrap().rss().to_vec();
    assert_eq!(a, b);
}

#[test]
fn dirichlet_scan_dips_at_the_period_and_its_double() {
    let series = generate_dirichlet(&DirichletConfig {
        len: 240,
        alpha: 1.0,
        theta0: 12,
        seed: 2024,
    })
    .unwrap();
    let r = scan(&series, 62).unwrap();
    for theta in [12, 24] {
        assert!(r.rss_at(theta) < r.rss_at(theta - 1), "no dip at {theta}");
        assert!(r.rss_at(theta) < r.rss_at(theta + 1), "no dip at {theta}");
    }
}

#[test]
fn laplacian_weighted_fit_matches_grouped() {
    let weights: Vec<Vec<f64>> = (0..17)
        .map(|i| (0..3).map(|k| ((i * 7 + k * 3) % 5) as f64 * 0.5).collect())
        .collect();
    let s = laplacian_series(&weights, 3);
    for theta in 1..=6 {
        let bary: Vec<GraphLaplacian> = phase_barycenters(&s, theta).unwrap();
        for t in 1..=s.len() {
            let w = weighted_fit(&s, theta, t).unwrap();
            let d = s
                .space()
                .distance(&w, &bary[phase_of(t, theta) - 1])
                .unwrap();
            assert!(d < 1e-12);
        }
    }
}
