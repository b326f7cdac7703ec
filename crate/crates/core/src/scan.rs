//! Residual scanning over candidate periods.
//!
//! For a candidate period `theta`, observation `t` belongs to phase
//! `phase_of(t, theta)`. Regressing on phase indicators gives fitted values
//! that are weighted Fréchet means with weights `1/n_l` on the observations
//! sharing `t`'s phase and zero elsewhere, so each candidate needs only
//! `theta` barycenters. `RSS(theta)` sums the squared distances from each
//! observation to its phase barycenter, and the period estimate minimizes
//! `RSS(theta) + lambda * theta`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{MetricSpace, WeightVector};

/// The phase `r(t, theta) = t + theta - theta * floor((t + theta - 1) / theta)`,
/// a value in `1..=theta`.
///
/// Defined for every `t >= 0`; `phase_of(0, theta) == theta`.
pub fn phase_of(t: usize, theta: usize) -> usize {
    assert!(theta >= 1, "period must be positive");
    t + theta - theta * t.div_ceil(theta)
}

/// Default upper bound on candidate periods, `round(4 sqrt(T))` capped at `T`.
pub fn default_theta_max(len: usize) -> usize {
    ((4.0 * (len as f64).sqrt()).round() as usize).clamp(1, len.max(1))
}

/// A time-ordered, equidistant sample of points in one metric space.
#[derive(Debug, Clone)]
pub struct ObjectSeries<S: MetricSpace> {
    space: S,
    points: Vec<S::Point>,
}

impl<S: MetricSpace> ObjectSeries<S> {
    pub fn new(space: S, points: Vec<S::Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a series needs at least 2 observations, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            space.validate(p).map_err(|e| {
                Error::validation(
                    "point belongs to space",
                    format!("observation {}: {e}", i + 1),
                )
            })?;
        }
        Ok(Self { space, points })
    }

    pub fn space(&self) -> &S {
        &self.space
    }

    pub fn points(&self) -> &[S::Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Observation at 1-based time `t`.
    pub fn at(&self, t: usize) -> &S::Point {
        &self.points[t - 1]
    }

    pub fn into_points(self) -> Vec<S::Point> {
        self.points
    }
}

/// Phase labels and phase sizes for one candidate period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseAssignment {
    theta: usize,
    phases: Vec<usize>,
    counts: Vec<usize>,
}

impl PhaseAssignment {
    pub fn new(len: usize, theta: usize) -> Result<Self> {
        if theta == 0 || theta > len {
            return Err(Error::InvalidArgument(format!(
                "candidate period {theta} outside 1..={len}"
            )));
        }
        let phases: Vec<usize> = (1..=len).map(|t| phase_of(t, theta)).collect();
        let mut counts = vec![0; theta];
        for &p in &phases {
            counts[p - 1] += 1;
        }
        Ok(Self {
            theta,
            phases,
            counts,
        })
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    /// Phase of each time point, 1-based.
    pub fn phases(&self) -> &[usize] {
        &self.phases
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Zero-based indices of the observations in `phase` (1-based).
    pub fn members(&self, phase: usize) -> impl Iterator<Item = usize> + '_ {
        (phase - 1..self.phases.len()).step_by(self.theta)
    }

    /// Regression weights `s^(t)` for 1-based time `t`: `1/n_l` on the
    /// observations in `t`'s phase `l`, zero elsewhere.
    pub fn design_weights(&self, t: usize) -> WeightVector {
        let phase = self.phases[t - 1];
        let w = 1.0 / self.counts[phase - 1] as f64;
        let weights = self
            .phases
            .iter()
            .map(|&p| if p == phase { w } else { 0.0 })
            .collect();
        WeightVector::new(weights).expect("phase indicator weights are a probability vector")
    }
}

fn with_context(theta: usize, phase: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Candidate {
        theta,
        phase,
        source: Box::new(e),
    }
}

/// Per-phase Fréchet barycenters for candidate `theta`; entry `l - 1` is the
/// uniform-weight mean of the observations in phase `l`.
pub fn phase_barycenters<S: MetricSpace>(
    series: &ObjectSeries<S>,
    theta: usize,
) -> Result<Vec<S::Point>> {
    let assignment = PhaseAssignment::new(series.len(), theta)?;
    (1..=theta)
        .into_par_iter()
        .map(|phase| {
            let members: Vec<&S::Point> = assignment
                .members(phase)
                .map(|i| &series.points[i])
                .collect();
            series
                .space
                .mean(&members)
                .map_err(with_context(theta, phase))
        })
        .collect()
}

/// The fitted value at time `t` computed directly from the full weighted
/// objective over all `T` observations, without grouping.
pub fn weighted_fit<S: MetricSpace>(
    series: &ObjectSeries<S>,
    theta: usize,
    t: usize,
) -> Result<S::Point> {
    if t == 0 || t > series.len() {
        return Err(Error::InvalidArgument(format!(
            "time {t} outside 1..={}",
            series.len()
        )));
    }
    let assignment = PhaseAssignment::new(series.len(), theta)?;
    let weights = assignment.design_weights(t);
    let refs: Vec<&S::Point> = series.points.iter().collect();
    series
        .space
        .frechet_mean(&refs, weights.as_slice())
        .map_err(with_context(theta, phase_of(t, theta)))
}

fn residual_sum<S: MetricSpace>(
    series: &ObjectSeries<S>,
    theta: usize,
    barycenters: &[S::Point],
) -> Result<f64> {
    let mut squares = Vec::with_capacity(series.len());
    for (i, y) in series.points.iter().enumerate() {
        let phase = phase_of(i + 1, theta);
        let d = series
            .space
            .distance(y, &barycenters[phase - 1])
            .map_err(with_context(theta, phase))?;
        squares.push(d * d);
    }
    // summed in sorted order so relabeling observations within a phase
    // cannot change the result
    squares.sort_by(f64::total_cmp);
    Ok(squares.iter().sum())
}

/// `RSS(theta) = sum_t d^2(Y_t, m_hat_t(theta))`.
pub fn rss<S: MetricSpace>(series: &ObjectSeries<S>, theta: usize) -> Result<f64> {
    let bary = phase_barycenters(series, theta)?;
    residual_sum(series, theta, &bary)
}

/// RSS for every candidate period `1..=theta_max`, with the fitted
/// barycenters kept for reuse.
#[derive(Debug, Clone, Serialize)]
pub struct ScanResult<P> {
    rss: Vec<f64>,
    #[serde(skip)]
    barycenters: Vec<Vec<P>>,
    theta_max: usize,
    len: usize,
}

impl<P> ScanResult<P> {
    /// Wraps a precomputed RSS curve without barycenters.
    pub fn from_rss(rss: Vec<f64>, len: usize) -> Result<Self> {
        if rss.is_empty() {
            return Err(Error::InvalidArgument("empty RSS curve".into()));
        }
        if let Some(x) = rss.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "RSS values must be finite and nonnegative, found {x}"
            )));
        }
        if rss.len() > len {
            return Err(Error::InvalidArgument(format!(
                "{} candidates exceed the sample size {len}",
                rss.len()
            )));
        }
        Ok(Self {
            theta_max: rss.len(),
            rss,
            barycenters: Vec::new(),
            len,
        })
    }

    /// `RSS(theta)` indexed from `theta = 1`.
    pub fn rss(&self) -> &[f64] {
        &self.rss
    }

    pub fn rss_at(&self, theta: usize) -> f64 {
        self.rss[theta - 1]
    }

    pub fn theta_max(&self) -> usize {
        self.theta_max
    }

    /// Sample size `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cached barycenters for `theta`, if the scan kept them.
    pub fn barycenters(&self, theta: usize) -> Option<&[P]> {
        self.barycenters.get(theta - 1).map(Vec::as_slice)
    }

    /// `L(theta, lambda) = RSS(theta) + lambda * theta` for each candidate.
    pub fn penalized_loss(&self, lambda: f64) -> Vec<f64> {
        penalized_loss(&self.rss, lambda)
    }

    /// Smallest minimizer of the penalized loss.
    pub fn estimate_period(&self, lambda: f64) -> usize {
        estimate_period(&self.rss, lambda)
    }
}

pub fn penalized_loss(rss: &[f64], lambda: f64) -> Vec<f64> {
    assert!(lambda >= 0.0, "penalty weight must be nonnegative");
    rss.iter()
        .enumerate()
        .map(|(i, r)| r + lambda * (i + 1) as f64)
        .collect()
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Exact sign of `terms.iter().sum()`, by growing a nonoverlapping
/// expansion (Shewchuk) and reading its largest nonzero component.
pub(crate) fn exact_sign(terms: &[f64]) -> Ordering {
    let mut e: Vec<f64> = Vec::with_capacity(terms.len());
    for &b in terms {
        let mut q = b;
        for c in e.iter_mut() {
            let (s, err) = two_sum(q, *c);
            *c = err;
            q = s;
        }
        e.push(q);
    }
    e.iter()
        .rev()
        .find(|x| **x != 0.0)
        .map_or(Ordering::Equal, |x| x.partial_cmp(&0.0).unwrap())
}

/// Exact comparison of `RSS(a) + lambda a` with `RSS(b) + lambda b`
/// (periods, 1-based).
pub(crate) fn compare_penalized(rss: &[f64], a: usize, b: usize, lambda: f64) -> Ordering {
    let (p, e) = two_prod(lambda, a as f64 - b as f64);
    exact_sign(&[rss[a - 1], -rss[b - 1], p, e])
}

/// Exact comparison of the products `x * m` and `y * n`.
pub(crate) fn compare_products(x: &[f64], m: f64, y: &[f64], n: f64) -> Ordering {
    let mut terms = Vec::with_capacity(2 * (x.len() + y.len()));
    for v in x {
        let (p, e) = two_prod(*v, m);
        terms.extend([p, e]);
    }
    for v in y {
        let (p, e) = two_prod(*v, -n);
        terms.extend([p, e]);
    }
    exact_sign(&terms)
}

/// `argmin_theta RSS(theta) + lambda * theta`, ties going to the smallest
/// period. An infinite `lambda` selects 1.
///
/// Comparisons are exact, so ties are ties in real arithmetic and not
/// artifacts of rounding.
pub fn estimate_period(rss: &[f64], lambda: f64) -> usize {
    assert!(!rss.is_empty(), "empty RSS curve");
    assert!(lambda >= 0.0, "penalty weight must be nonnegative");
    if lambda.is_infinite() {
        return 1;
    }
    let mut best = 1;
    for theta in 2..=rss.len() {
        if compare_penalized(rss, theta, best, lambda) == Ordering::Less {
            best = theta;
        }
    }
    best
}

/// Computes `RSS(theta)` for `theta = 1..=theta_max`, in parallel over
/// candidates. Results do not depend on the thread count.
pub fn scan<S: MetricSpace>(
    series: &ObjectSeries<S>,
    theta_max: usize,
) -> Result<ScanResult<S::Point>> {
    if theta_max == 0 || theta_max > series.len() {
        return Err(Error::InvalidArgument(format!(
            "theta_max = {theta_max} must lie in 1..={}",
            series.len()
        )));
    }
    let fits: Vec<(f64, Vec<S::Point>)> = (1..=theta_max)
        .into_par_iter()
        .map(|theta| {
            let bary = phase_barycenters(series, theta)?;
            let r = residual_sum(series, theta, &bary)?;
            Ok((r, bary))
        })
        .collect::<Result<_>>()?;
    let (rss, barycenters) = fits.into_iter().unzip();
    Ok(ScanResult {
        rss,
        barycenters,
        theta_max,
        len: series.len(),
    })
}
