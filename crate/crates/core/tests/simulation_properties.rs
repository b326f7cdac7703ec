use objper::component::true_component_dirichlet;
use objper::scan::scan;
use objper::simulation::{
    dirichlet_mean_series, generate_dirichlet, replicate_rng, run_monte_carlo, DirichletConfig,
    DistributionConfig, Generator, NetworkConfig, PipelineOptions,
};
use objper::tuning::{g_default, select, Criterion};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn draws(cfg: &DirichletConfig, t: usize, n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = replicate_rng(seed, 0);
    (0..n)
        .map(|_| {
            let c = cfg.sample_at(&mut rng, t).unwrap();
            [c[0], c[1], c[2]]
        })
        .collect()
}

fn mean_var(x: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let n = x.len() as f64;
    let mut m = [0.0; 3];
    let mut v = [0.0; 3];
    for k in 0..3 {
        m[k] = x.iter().map(|r| r[k]).sum::<f64>() / n;
        v[k] = x.iter().map(|r| (r[k] - m[k]).powi(2)).sum::<f64>() / (n - 1.0);
    }
    (m, v)
}

#[test]
fn dirichlet_sample_mean_matches_closed_form() {
    let cfg = DirichletConfig::default();
    for t in [1, 4, 9] {
        let (m, _) = mean_var(&draws(&cfg, t, 100_000, t as u64));
        let truth = true_component_dirichlet(t, 12);
        for k in 0..3 {
            assert!(
                (m[k] - truth[k]).abs() < 0.01,
                "t = {t}, k = {k}: {} vs {}",
                m[k],
                truth[k]
            );
        }
    }
}

#[test]
fn variance_grows_as_alpha_shrinks() {
    for t in [2, 7] {
        let vars: Vec<[f64; 3]> = [1.0, 0.5, 0.1]
            .iter()
            .map(|&alpha| {
                let cfg = DirichletConfig {
                    alpha,
                    ..Default::default()
                };
                mean_var(&draws(&cfg, t, 10_000, 3)).1
            })
            .collect();
        for k in 0..3 {
            assert!(
                vars[0][k] < vars[1][k] && vars[1][k] < vars[2][k],
                "t = {t}: {vars:?}"
            );
        }
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Two-sample energy statistic on a pooled sample split at `n`.
fn energy(pooled: &[[f64; 3]], n: usize) -> f64 {
    let (x, y) = pooled.split_at(n);
    let mean = |a: &[[f64; 3]], b: &[[f64; 3]]| {
        let mut s = 0.0;
        for p in a {
            for q in b {
                s += dist(p, q);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    2.0 * mean(x, y) - mean(x, x) - mean(y, y)
}

/// Permutation p-value with `b` reshuffles.
fn energy_test(x: &[[f64; 3]], y: &[[f64; 3]], b: usize) -> f64 {
    let mut pooled: Vec<[f64; 3]> = x.iter().chain(y).copied().collect();
    let observed = energy(&pooled, x.len());
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut at_least = 0;
    for _ in 0..b {
        pooled.shuffle(&mut rng);
        if energy(&pooled, x.len()) >= observed {
            at_least += 1;
        }
    }
    (1 + at_least) as f64 / (1 + b) as f64
}

#[test]
fn marginals_repeat_every_period() {
    let cfg = DirichletConfig::default();
    let a = draws(&cfg, 3, 5000, 21);
    let b = draws(&cfg, 15, 5000, 22);
    let p = energy_test(&a, &b, 99);
    assert!(p > 0.01, "Y_3 and Y_15 differ: p = {p}");

    // the test has power against a half-period shift
    let c = draws(&cfg, 9, 1000, 23);
    let p = energy_test(&a[..1000], &c, 99);
    assert!(p <= 0.01, "Y_3 and Y_9 not told apart: p = {p}");
}

#[test]
fn reports_are_reproducible() {
    let cfg = DirichletConfig {
        len: 100,
        alpha: 0.5,
        theta0: 12,
        seed: 8,
    };
    let mut a = run_monte_carlo(&cfg, 12, PipelineOptions::default()).unwrap();
    let mut b = run_monte_carlo(&cfg, 12, PipelineOptions::default()).unwrap();
    a.timing = None;
    b.timing = None;
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );

    let first = cfg.generate_with(&mut replicate_rng(8, 0)).unwrap();
    assert_eq!(first.points(), generate_dirichlet(&cfg).unwrap().points());
    let other = cfg.generate_with(&mut replicate_rng(8, 1)).unwrap();
    assert_ne!(first.points(), other.points());
}

#[test]
fn noiseless_families_are_exactly_periodic() {
    for theta0 in [2, 3, 7, 12] {
        let len = 120;
        let net = NetworkConfig {
            len,
            theta0,
            noise: 0.0,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let r = scan(&net, 44).unwrap();
        let dist = DistributionConfig {
            len,
            theta0,
            noise: 0.0,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let q = scan(&dist, 44).unwrap();
        let sphere = scan(&dirichlet_mean_series(len, theta0).unwrap(), 44).unwrap();
        for k in 1..=44 / theta0 {
            assert_eq!(r.rss_at(k * theta0), 0.0, "network theta0 = {theta0}");
            assert_eq!(q.rss_at(k * theta0), 0.0, "distribution theta0 = {theta0}");
            assert!(
                sphere.rss_at(k * theta0) < 1e-20,
                "sphere theta0 = {theta0}"
            );
        }
        assert!(r.rss_at(1) > 0.0 && q.rss_at(1) > 0.0 && sphere.rss_at(1) > 0.0);
    }
}

#[test]
fn network_default_recovers_the_period() {
    let report =
        run_monte_carlo(&NetworkConfig::default(), 200, PipelineOptions::default()).unwrap();
    assert!(report.failures.is_empty());
    assert!(
        report.hit_probability >= 0.9,
        "p = {}",
        report.hit_probability
    );
}

#[test]
fn flat_families_select_one() {
    let net = NetworkConfig {
        amplitude: 0.0,
        noise: 0.0,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let r = scan(&net, 62).unwrap();
    let g = g_default(240, 62).unwrap();
    assert_eq!(select(&r, Criterion::Rss, g).unwrap().selected_theta, 1);

    let report = run_monte_carlo(
        &DistributionConfig {
            amplitude: 0.0,
            ..Default::default()
        },
        20,
        PipelineOptions::default(),
    )
    .unwrap();
    assert_eq!(report.histogram.get(&1), Some(&20));
}

/// Checks `p(T)` is nondecreasing up to two-sided 95% binomial error.
fn assert_nondecreasing(ps: &[f64], n: usize, label: &str) {
    for w in ps.windows(2) {
        let se = (w[0] * (1.0 - w[0]) / n as f64 + w[1] * (1.0 - w[1]) / n as f64).sqrt();
        assert!(w[1] + 1.96 * se >= w[0], "{label}: {ps:?}");
    }
}

#[test]
fn hit_probability_does_not_fall_with_sample_size() {
    let reps = 100;
    for noise in [1.0, 1.5] {
        let ps: Vec<f64> = [100, 240, 500]
            .iter()
            .map(|&len| {
                let cfg = NetworkConfig {
                    len,
                    noise,
                    seed: 4,
                    ..Default::default()
                };
                run_monte_carlo(&cfg, reps, PipelineOptions::default())
                    .unwrap()
                    .hit_probability
            })
            .collect();
        assert_nondecreasing(&ps, reps, &format!("network noise {noise}"));
    }
    for alpha in [1.0, 0.5, 0.1] {
        let ps: Vec<f64> = [100, 240, 500]
            .iter()
            .map(|&len| {
                let cfg = DirichletConfig {
                    len,
                    alpha,
                    theta0: 12,
                    seed: 4,
                };
                run_monte_carlo(&cfg, 50, PipelineOptions::default())
                    .unwrap()
                    .hit_probability
            })
            .collect();
        assert_nondecreasing(&ps, 50, &format!("dirichlet alpha {alpha}"));
    }
}

#[test]
fn scaled_criterion_recovers_the_dirichlet_period() {
    let cfg = DirichletConfig {
        len: 240,
        alpha: 1.0,
        theta0: 12,
        seed: 5,
    };
    let options = PipelineOptions {
        criterion: Criterion::ScaledRss,
        ..Default::default()
    };
    let report = run_monte_carlo(&cfg, 50, options).unwrap();
    assert_eq!(report.g_value, None);
    assert!(report.hit_probability >= 0.9, "{:?}", report.histogram);
}
