//! Generators for periodic object series and a Monte Carlo harness.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`). A generator seeded with
//! `seed` uses stream 0; Monte Carlo replicate `k` uses stream `k` of the same
//! key, so replicate 0 reproduces a direct call and results do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::component::{
    component_from_scan, component_max_distance, component_mean_distance, component_mse,
    dirichlet_truth, extract_component,
};
use crate::error::{Error, Result};
use crate::metric::{
    laplacian_from_adjacency, sqrt_compositional_transform, GraphLaplacian, Laplacian, MetricSpace,
    QuantileFunction, Sphere, SpherePoint, Wasserstein1d,
};
use crate::scan::{default_theta_max, phase_of, scan, ObjectSeries};
use crate::tuning::{default_weight, g_default, select, Criterion};

/// Random stream for replicate `replicate` under `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// `l_t = sin(0.1 + r / D * (pi - 0.2))` with `r = (t - 1) mod theta0` and
/// `D = max(theta0 - 1, 11)`.
///
/// For `theta0 = 12` this is `D = 11` and `r` runs over `0..=11`, so `l_t`
/// sweeps `sin(0.1)..=sin(pi - 0.1)` once per cycle and stays in `(0, 1)`.
pub fn l_schedule(t: usize, theta0: usize) -> f64 {
    assert!(t >= 1 && theta0 >= 1, "t and theta0 must be positive");
    let r = ((t - 1) % theta0) as f64;
    let denom = theta0.saturating_sub(1).max(11) as f64;
    (0.1 + r / denom * (PI - 0.2)).sin()
}

fn cycle_angle(t: usize, theta0: usize) -> f64 {
    2.0 * PI * phase_of(t, theta0) as f64 / theta0 as f64 + FRAC_PI_4
}

fn check_common(len: usize, theta0: usize) -> Result<()> {
    if theta0 == 0 {
        return Err(Error::InvalidArgument("theta0 must be positive".into()));
    }
    if len < theta0.max(2) {
        return Err(Error::InvalidArgument(format!(
            "T = {len} must be at least theta0 = {theta0} and at least 2"
        )));
    }
    Ok(())
}

fn check_nonnegative(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be finite and nonnegative, got {x}"
        )));
    }
    Ok(())
}

/// A family of periodic object series.
#[allow(clippy::len_without_is_empty)]
pub trait Generator: Sync {
    type Space: MetricSpace;

    fn family(&self) -> Family;
    fn len(&self) -> usize;
    fn theta0(&self) -> usize;
    fn seed(&self) -> u64;
    fn validate(&self) -> Result<()>;
    fn generate_with<R: Rng>(&self, rng: &mut R) -> Result<ObjectSeries<Self::Space>>;
    /// The periodic component `m(1..=T)` the series fluctuates around.
    fn truth(&self) -> Result<Vec<<Self::Space as MetricSpace>::Point>>;

    fn generate(&self) -> Result<ObjectSeries<Self::Space>> {
        self.validate()?;
        self.generate_with(&mut replicate_rng(self.seed(), 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Dirichlet,
    Network,
    Distribution,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Dirichlet => "dirichlet",
            Family::Network => "network",
            Family::Distribution => "distribution",
        }
    }
}

/// `Y_t ~ Dir(l_t alpha, l_t alpha, alpha)`, mapped to the sphere by the
/// square-root transform. Smaller `alpha` means larger variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletConfig {
    pub len: usize,
    pub alpha: f64,
    pub theta0: usize,
    pub seed: u64,
}

impl Default for DirichletConfig {
    fn default() -> Self {
        Self {
            len: 240,
            alpha: 1.0,
            theta0: 12,
            seed: 0,
        }
    }
}

fn sample_dirichlet<R: Rng>(rng: &mut R, shapes: &[f64]) -> Result<Vec<f64>> {
    let gammas = shapes
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0).map_err(|e| Error::InvalidArgument(format!("gamma({a}): {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    // tiny shapes can underflow every draw to zero; redraw in that case
    loop {
        let x: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let sum: f64 = x.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return Ok(x.into_iter().map(|v| v / sum).collect());
        }
    }
}

impl DirichletConfig {
    pub fn shapes(&self, t: usize) -> [f64; 3] {
        let l = l_schedule(t, self.theta0);
        [l * self.alpha, l * self.alpha, self.alpha]
    }

    /// One composition drawn at time `t`.
    pub fn sample_at<R: Rng>(&self, rng: &mut R, t: usize) -> Result<Vec<f64>> {
        sample_dirichlet(rng, &self.shapes(t))
    }

    /// Raw compositions (before the square-root transform).
    pub fn sample_compositions<R: Rng>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        (1..=self.len).map(|t| self.sample_at(rng, t)).collect()
    }
}

impl Generator for DirichletConfig {
    type Space = Sphere;

    fn family(&self) -> Family {
        Family::Dirichlet
    }
    fn len(&self) -> usize {
        self.len
    }
    fn theta0(&self) -> usize {
        self.theta0
    }
    fn seed(&self) -> u64 {
        self.seed
    }

    fn validate(&self) -> Result<()> {
        check_common(self.len, self.theta0)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn generate_with<R: Rng>(&self, rng: &mut R) -> Result<ObjectSeries<Sphere>> {
        let points = self
            .sample_compositions(rng)?
            .iter()
            .map(|c| sqrt_compositional_transform(c))
            .collect::<Result<Vec<_>>>()?;
        ObjectSeries::new(Sphere::new(3), points)
    }

    fn truth(&self) -> Result<Vec<SpherePoint>> {
        Ok(dirichlet_truth(self.len, self.theta0))
    }
}

pub fn generate_dirichlet(config: &DirichletConfig) -> Result<ObjectSeries<Sphere>> {
    config.generate()
}

/// The noiseless Dirichlet series: the mean path itself on the sphere.
pub fn dirichlet_mean_series(len: usize, theta0: usize) -> Result<ObjectSeries<Sphere>> {
    check_common(len, theta0)?;
    ObjectSeries::new(Sphere::new(3), dirichlet_truth(len, theta0))
}

/// Weighted networks on `nodes` nodes with
/// `a_ij(t) = max(0, base + amplitude * sin(angle_t) * pattern_ij + e_ij(t))`,
/// `angle_t = 2 pi r(t, theta0) / theta0 + pi / 4` and
/// `e_ij(t) ~ N(0, noise^2)` independent over edges and time.
///
/// `pattern_ij = 1 + ((i + j) mod 3) / 2` varies the edge response so the
/// periodic signal is not a single scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub len: usize,
    pub theta0: usize,
    pub nodes: usize,
    pub base: f64,
    pub amplitude: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            len: 240,
            theta0: 12,
            nodes: 5,
            base: 3.0,
            amplitude: 1.0,
            noise: 0.5,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn pattern(i: usize, j: usize) -> f64 {
        1.0 + ((i + j) % 3) as f64 / 2.0
    }

    #[allow(clippy::needless_range_loop)]
    fn adjacency(&self, t: usize, mut noise: impl FnMut() -> f64) -> Vec<Vec<f64>> {
        let p = self.nodes;
        let s = cycle_angle(t, self.theta0).sin();
        let mut a = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in i + 1..p {
                let w = (self.base + self.amplitude * s * Self::pattern(i, j) + noise()).max(0.0);
                a[i][j] = w;
                a[j][i] = w;
            }
        }
        a
    }
}

impl Generator for NetworkConfig {
    type Space = Laplacian;

    fn family(&self) -> Family {
        Family::Network
    }
    fn len(&self) -> usize {
        self.len
    }
    fn theta0(&self) -> usize {
        self.theta0
    }
    fn seed(&self) -> u64 {
        self.seed
    }

    fn validate(&self) -> Result<()> {
        check_common(self.len, self.theta0)?;
        if self.nodes < 2 {
            return Err(Error::InvalidArgument(
                "a network needs at least 2 nodes".into(),
            ));
        }
        check_nonnegative("base", self.base)?;
        check_nonnegative("amplitude", self.amplitude)?;
        check_nonnegative("noise", self.noise)
    }

    fn generate_with<R: Rng>(&self, rng: &mut R) -> Result<ObjectSeries<Laplacian>> {
        let normal = Normal::new(0.0, self.noise)
            .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
        let points = (1..=self.len)
            .map(|t| {
                let a = self.adjacency(t, || {
                    if self.noise > 0.0 {
                        normal.sample(rng)
                    } else {
                        0.0
                    }
                });
                laplacian_from_adjacency(&a)
            })
            .collect::<Result<Vec<_>>>()?;
        ObjectSeries::new(Laplacian::new(self.nodes), points)
    }

    /// The noiseless Laplacians. With clipping inactive (`base` above
    /// `2 * amplitude` plus a few noise scales) this is also the mean.
    fn truth(&self) -> Result<Vec<GraphLaplacian>> {
        (1..=self.len)
            .map(|t| laplacian_from_adjacency(&self.adjacency(t, || 0.0)))
            .collect()
    }
}

pub fn generate_networks(config: &NetworkConfig) -> Result<ObjectSeries<Laplacian>> {
    config.generate()
}

/// Quantile functions of `Normal(mu_t, sigma_t^2)` on an `grid`-point grid,
/// `mu_t = amplitude * sin(angle_t) + e_t`, `sigma_t = 1 + 0.2 cos(angle_t)`,
/// with `angle_t` as in [`NetworkConfig`] and `e_t ~ N(0, noise^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionConfig {
    pub len: usize,
    pub theta0: usize,
    pub grid: usize,
    pub amplitude: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        Self {
            len: 240,
            theta0: 12,
            grid: crate::metric::DEFAULT_QUANTILE_GRID,
            amplitude: 4.0,
            noise: 0.5,
            seed: 0,
        }
    }
}

impl DistributionConfig {
    fn point(&self, t: usize, shift: f64) -> Result<QuantileFunction> {
        let angle = cycle_angle(t, self.theta0);
        QuantileFunction::normal(
            self.amplitude * angle.sin() + shift,
            1.0 + 0.2 * angle.cos(),
            self.grid,
        )
    }
}

impl Generator for DistributionConfig {
    type Space = Wasserstein1d;

    fn family(&self) -> Family {
        Family::Distribution
    }
    fn len(&self) -> usize {
        self.len
    }
    fn theta0(&self) -> usize {
        self.theta0
    }
    fn seed(&self) -> u64 {
        self.seed
    }

    fn validate(&self) -> Result<()> {
        check_common(self.len, self.theta0)?;
        if self.grid < 2 {
            return Err(Error::InvalidArgument(
                "the quantile grid needs M >= 2".into(),
            ));
        }
        check_nonnegative("amplitude", self.amplitude)?;
        check_nonnegative("noise", self.noise)
    }

    fn generate_with<R: Rng>(&self, rng: &mut R) -> Result<ObjectSeries<Wasserstein1d>> {
        let normal = Normal::new(0.0, self.noise)
            .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
        let points = (1..=self.len)
            .map(|t| {
                let shift = if self.noise > 0.0 {
                    normal.sample(rng)
                } else {
                    0.0
                };
                self.point(t, shift)
            })
            .collect::<Result<Vec<_>>>()?;
        ObjectSeries::new(Wasserstein1d::new(self.grid), points)
    }

    fn truth(&self) -> Result<Vec<QuantileFunction>> {
        (1..=self.len).map(|t| self.point(t, 0.0)).collect()
    }
}

pub fn generate_distributions(config: &DistributionConfig) -> Result<ObjectSeries<Wasserstein1d>> {
    config.generate()
}

/// Knobs of the estimation pipeline inside each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PipelineOptions {
    pub criterion: Criterion,
    /// Defaults to `round(4 sqrt(T))`.
    pub theta_max: Option<usize>,
    /// Defaults to `g_default(T, theta_max)`, or to the per-series weight
    /// under the scaled criterion.
    pub g_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub theta_hat: usize,
    /// Mean squared distance of the estimated component to the truth.
    pub mse: f64,
    pub mean_distance: f64,
    pub max_distance: f64,
    /// The same measures with the component extracted at the true period.
    pub oracle_mse: f64,
    pub oracle_mean_distance: f64,
    pub oracle_max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub numerical: bool,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Some(Self {
            mean: values.iter().sum::<f64>() / n as f64,
            median,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub seconds_per_replicate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub family: Family,
    pub config: serde_json::Value,
    pub options: PipelineOptions,
    pub seed: u64,
    pub replicates: usize,
    pub len: usize,
    pub theta0: usize,
    pub theta_max: usize,
    /// The per-period weight shared by all replicates; `None` when the
    /// criterion sets it per series.
    pub g_value: Option<f64>,
    /// Successful replicates in replicate order.
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<ReplicateFailure>,
    /// `theta_hat -> count` over successful replicates.
    pub histogram: BTreeMap<usize, usize>,
    /// `p(theta_hat = theta0)`, over all replicates (failures count as misses).
    pub hit_probability: f64,
    pub mse: Option<Summary>,
    pub mean_distance: Option<Summary>,
    pub max_distance: Option<Summary>,
    pub oracle_mse: Option<Summary>,
    pub oracle_mean_distance: Option<Summary>,
    pub oracle_max_distance: Option<Summary>,
    /// Wall-clock figures; left out unless requested so reports stay
    /// byte-identical across runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl MonteCarloReport {
    pub fn thetas(&self) -> Vec<usize> {
        self.outcomes.iter().map(|o| o.theta_hat).collect()
    }

    /// `p(theta_hat = a)` over all replicates.
    pub fn p_equal(&self, a: usize) -> f64 {
        self.p_where(|t| t == a)
    }

    /// `p(b <= theta_hat <= c)` over all replicates.
    pub fn p_between(&self, b: usize, c: usize) -> f64 {
        self.p_where(|t| b <= t && t <= c)
    }

    pub fn p_where(&self, pred: impl Fn(usize) -> bool) -> f64 {
        let hits = self.outcomes.iter().filter(|o| pred(o.theta_hat)).count();
        hits as f64 / self.replicates as f64
    }
}

fn run_replicate<G: Generator>(
    generator: &G,
    replicate: usize,
    theta_max: usize,
    g: Option<f64>,
    criterion: Criterion,
    truth: &[<G::Space as MetricSpace>::Point],
) -> Result<ReplicateOutcome> {
    let mut rng = replicate_rng(generator.seed(), replicate as u64);
    let series = generator.generate_with(&mut rng)?;
    let fit = scan(&series, theta_max)?;
    let g = match g {
        Some(g) => g,
        None => default_weight(criterion, fit.rss(), fit.len(), theta_max)?,
    };
    let report = select(&fit, criterion, g)?;
    let theta_hat = report.selected_theta;
    let component = component_from_scan(&series, &fit, theta_hat)?;
    let oracle = if generator.theta0() <= theta_max {
        component_from_scan(&series, &fit, generator.theta0())?
    } else {
        extract_component(&series, generator.theta0())?
    };
    Ok(ReplicateOutcome {
        replicate,
        theta_hat,
        mse: component_mse(&component, truth)?,
        mean_distance: component_mean_distance(&component, truth)?,
        max_distance: component_max_distance(&component, truth)?,
        oracle_mse: component_mse(&oracle, truth)?,
        oracle_mean_distance: component_mean_distance(&oracle, truth)?,
        oracle_max_distance: component_max_distance(&oracle, truth)?,
    })
}

/// Runs `replicates` independent scan, select and extract pipelines.
///
/// Replicates run on the rayon pool. A replicate that fails is recorded in
/// `failures` and the run continues.
pub fn run_monte_carlo<G>(
    generator: &G,
    replicates: usize,
    options: PipelineOptions,
) -> Result<MonteCarloReport>
where
    G: Generator + Serialize,
{
    generator.validate()?;
    if replicates == 0 {
        return Err(Error::InvalidArgument(
            "at least one replicate is required".into(),
        ));
    }
    let len = generator.len();
    let theta_max = options.theta_max.unwrap_or_else(|| default_theta_max(len));
    if theta_max == 0 || theta_max > len {
        return Err(Error::InvalidArgument(format!(
            "theta_max = {theta_max} must lie in 1..={len}"
        )));
    }
    let g = match (options.g_override, options.criterion) {
        (Some(g), _) => Some(g),
        (None, Criterion::ScaledRss) => None,
        (None, _) => Some(g_default(len, theta_max)?),
    };
    let truth = generator.truth()?;

    let start = Instant::now();
    let results: Vec<Result<ReplicateOutcome>> = (0..replicates)
        .into_par_iter()
        .map(|k| run_replicate(generator, k, theta_max, g, options.criterion, &truth))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push(ReplicateFailure {
                replicate: k,
                numerical: e.is_numerical(),
                message: e.to_string(),
            }),
        }
    }
    let mut histogram = BTreeMap::new();
    for o in &outcomes {
        *histogram.entry(o.theta_hat).or_insert(0) += 1;
    }
    let column =
        |f: fn(&ReplicateOutcome) -> f64| Summary::of(&outcomes.iter().map(f).collect::<Vec<_>>());
    let theta0 = generator.theta0();
    let hits = outcomes.iter().filter(|o| o.theta_hat == theta0).count();
    Ok(MonteCarloReport {
        family: generator.family(),
        config: serde_json::to_value(generator)?,
        options,
        seed: generator.seed(),
        replicates,
        len,
        theta0,
        theta_max,
        g_value: g,
        histogram,
        hit_probability: hits as f64 / replicates as f64,
        mse: column(|o| o.mse),
        mean_distance: column(|o| o.mean_distance),
        max_distance: column(|o| o.max_distance),
        oracle_mse: column(|o| o.oracle_mse),
        oracle_mean_distance: column(|o| o.oracle_mean_distance),
        oracle_max_distance: column(|o| o.oracle_max_distance),
        outcomes,
        failures,
        timing: Some(Timing {
            total_seconds: elapsed,
            seconds_per_replicate: elapsed / replicates as f64,
        }),
    })
}

/// Default replicate count, and the reduced count used by `--fast`.
pub const DEFAULT_REPLICATES: usize = 200;
pub const FAST_REPLICATES: usize = 50;
