use std::collections::BTreeSet;

use objper::metric::{Euclidean, EuclideanPoint};
use objper::scan::{default_theta_max, estimate_period, scan, ObjectSeries};
use objper::tuning::{
    g_default, information_criterion, select, select_from_rss, Criterion, LambdaPath,
};
use proptest::prelude::*;

/// Continuous values, or quarter-integers so that ties and collinear points
/// show up.
fn rss_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(0.0f64..50.0, 1..=64),
        prop::collection::vec((0u32..200).prop_map(|k| k as f64 / 4.0), 1..=64),
    ]
}

/// Periods selectable for some `lambda >= 0`: the lower convex hull of
/// `(theta, rss)` from `theta = 1` to the smallest global minimizer, keeping
/// only strict corners.
fn hull_vertices(rss: &[f64]) -> BTreeSet<usize> {
    let mut argmin = 0;
    for (i, r) in rss.iter().enumerate() {
        if *r < rss[argmin] {
            argmin = i;
        }
    }
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..=argmin {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b unless it lies strictly below the chord from a to i
            let cross = (b - a) as f64 * (rss[i] - rss[a]) - (i - a) as f64 * (rss[b] - rss[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull.into_iter().map(|i| i + 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn path_agrees_with_grid_argmin(rss in rss_strategy()) {
        let path = LambdaPath::from_rss(&rss);
        for k in 0..=10_000 {
            let lambda = 0.01 * k as f64;
            prop_assert_eq!(path.theta_at_exact(&rss, lambda), estimate_period(&rss, lambda), "lambda = {}", lambda);
        }
    }

    #[test]
    fn exact_lookup_agrees_at_breakpoints(rss in rss_strategy()) {
        let path = LambdaPath::from_rss(&rss);
        let top = rss.iter().fold(0.0f64, |a, b| a.max(*b)) + 1.0;
        for k in 0..=2_000 {
            let lambda = top * k as f64 / 1_998.0;
            prop_assert_eq!(path.theta_at_exact(&rss, lambda), estimate_period(&rss, lambda));
        }
        for &b in path.breakpoints() {
            for lambda in [b, b.next_down().max(0.0), b.next_up()] {
                prop_assert_eq!(path.theta_at_exact(&rss, lambda), estimate_period(&rss, lambda), "lambda = {}", lambda);
            }
        }
    }

    #[test]
    fn path_is_monotone_and_ends_at_one(rss in rss_strategy()) {
        let path = LambdaPath::from_rss(&rss);
        let thetas = path.thetas();
        prop_assert!(thetas.windows(2).all(|w| w[0] > w[1]));
        prop_assert_eq!(*thetas.last().unwrap(), 1);
        prop_assert_eq!(path.breakpoints()[0], 0.0);
        prop_assert!(path.breakpoints().windows(2).all(|w| w[0] < w[1]));
        for (start, end, theta) in path.segments() {
            let mid = if end.is_finite() { 0.5 * (start + end) } else { start + 1.0 };
            prop_assert_eq!(estimate_period(&rss, mid), theta);
        }
    }

    #[test]
    fn path_periods_are_the_hull_vertices(rss in rss_strategy()) {
        let path: BTreeSet<usize> = LambdaPath::from_rss(&rss).thetas().iter().copied().collect();
        prop_assert_eq!(path, hull_vertices(&rss));
    }

    #[test]
    fn report_invariants(rss in rss_strategy(), g in 0.01f64..2.0, log in any::<bool>()) {
        let len = 2 * rss.len() + 1;
        let kind = if log { Criterion::LogRss } else { Criterion::Rss };
        let rss: Vec<f64> = rss.iter().map(|r| r + 0.5).collect();
        let report = select_from_rss(&rss, len, kind, g).unwrap();
        let min = report.records.iter().map(|r| r.ic).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(report.selected_ic, min);
        for r in &report.records {
            prop_assert_eq!(r.penalty, r.theta as f64 * g);
            prop_assert_eq!(r.ic, information_criterion(&rss, len, r.theta, g, kind).unwrap());
        }
        let path = LambdaPath::from_rss(&rss);
        prop_assert_eq!(path.theta_at(report.selected_lambda), report.selected_theta);
    }
}

fn periodic_series(pattern: &[f64], cycles: usize) -> ObjectSeries<Euclidean> {
    let pts = (0..pattern.len() * cycles)
        .map(|i| EuclideanPoint::scalar(pattern[i % pattern.len()]).unwrap())
        .collect();
    ObjectSeries::new(Euclidean::new(1), pts).unwrap()
}

#[test]
fn true_period_beats_its_multiples() {
    for theta0 in 2..=8 {
        let pattern: Vec<f64> = (0..theta0).map(|i| (i * i) as f64).collect();
        let s = periodic_series(&pattern, 12);
        let r = scan(&s, default_theta_max(s.len())).unwrap();
        let g = g_default(s.len(), r.theta_max()).unwrap();
        let at = |theta| information_criterion(r.rss(), s.len(), theta, g, Criterion::Rss).unwrap();
        for k in 2.. {
            if k * theta0 > r.theta_max() {
                break;
            }
            assert!(at(theta0) < at(k * theta0), "theta0 = {theta0}, k = {k}");
        }
        assert_eq!(
            select(&r, Criterion::Rss, g).unwrap().selected_theta,
            theta0
        );
    }
}

#[test]
fn constant_series_selects_one() {
    let s = periodic_series(&[1.5], 30);
    let r = scan(&s, 20).unwrap();
    let report = select(&r, Criterion::Rss, 0.3).unwrap();
    assert_eq!(report.selected_theta, 1);
}

#[test]
fn regularizer_meets_its_growth_conditions() {
    // g -> 0 while g * (T / Theta)^(1 / 1.02) -> infinity
    let mut prev: Option<(f64, f64)> = None;
    for e in 2..=6 {
        let t = 10usize.pow(e);
        let theta = default_theta_max(t);
        let g = g_default(t, theta).unwrap();
        let ratio = t as f64 / theta as f64;
        let scaled = g * ratio.powf(1.0 / 1.02);
        if let Some((pg, ps)) = prev {
            assert!(g < pg, "g does not decrease at T = {t}");
            assert!(
                scaled > ps,
                "g (T/Theta)^(1/1.02) does not increase at T = {t}"
            );
        }
        prev = Some((g, scaled));
    }
}

#[test]
fn comparisons_near_a_breakpoint_are_exact() {
    // lines 1 and 4 cross at 16/3, which rounds down to f64, so at the
    // stored breakpoint line 4 is still lower by about 9e-16
    let rss = [29.5, 42.25, 24.75, 13.5];
    let lambda = 16.0 / 3.0;
    assert_eq!(estimate_period(&rss, lambda), 4);
    assert_eq!(estimate_period(&rss, lambda.next_up()), 1);
    let path = LambdaPath::from_rss(&rss);
    assert_eq!(path.thetas(), [4, 1]);
    assert_eq!(path.breakpoints()[1], lambda);
    assert_eq!(path.theta_at(lambda), 1);
    assert_eq!(path.theta_at_exact(&rss, lambda), 4);
    assert_eq!(path.theta_at_exact(&rss, lambda.next_up()), 1);

    // a tie that is exact in binary goes to the smaller period
    let rss = [29.5, 42.25, 24.75, 14.5];
    assert_eq!(estimate_period(&rss, 5.0), 1);
    assert_eq!(LambdaPath::from_rss(&rss).theta_at_exact(&rss, 5.0), 1);
}
