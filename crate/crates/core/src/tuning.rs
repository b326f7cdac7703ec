//! Data-driven choice of the penalty weight.
//!
//! `L(theta, lambda) = RSS(theta) + lambda * theta` is affine in `lambda`, so
//! the selected period `theta_hat(lambda)` is piecewise constant: it follows
//! the lower envelope of the lines `RSS(theta) + lambda * theta`. The
//! information criterion depends on `lambda` only through `theta_hat`, so
//! minimizing it over `lambda` means evaluating it once per envelope segment.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::{compare_penalized, compare_products, ScanResult};

/// Goodness-of-fit term of the information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `log(RSS / T) + theta * g(T)`
    LogRss,
    /// `RSS / T + theta * g(T)`
    #[default]
    Rss,
    /// `RSS / T + theta * T^0.01 * C`, with the per-period weight `C`
    /// estimated from the RSS curve itself (see [`scaled_weight`]).
    ScaledRss,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::LogRss => "log-rss",
            Criterion::Rss => "rss",
            Criterion::ScaledRss => "scaled-rss",
        }
    }
}

/// The exact map `lambda -> theta_hat(lambda)` for `lambda >= 0`.
///
/// Segment `k` covers `[breakpoints[k], breakpoints[k + 1])`, the last one is
/// unbounded. Periods strictly decrease along the path and end at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    breakpoints: Vec<f64>,
    thetas: Vec<usize>,
}

impl LambdaPath {
    /// Builds the path from an RSS curve indexed from `theta = 1`.
    ///
    /// Starting from the smallest minimizer at `lambda = 0`, each step moves
    /// to the smaller period whose line crosses the current one first; on a
    /// tie in crossing point the smallest period wins, matching the
    /// smallest-argmin rule at the breakpoint itself.
    pub fn from_rss(rss: &[f64]) -> Self {
        assert!(!rss.is_empty(), "empty RSS curve");
        let mut current = 0;
        for (i, r) in rss.iter().enumerate() {
            if *r < rss[current] {
                current = i;
            }
        }
        let mut breakpoints = vec![0.0];
        let mut thetas = vec![current + 1];
        let mut lambda = 0.0f64;
        while current > 0 {
            let mut next = 0;
            let mut cross = f64::INFINITY;
            for j in 0..current {
                // line j (slope j + 1) meets the current line at
                // (rss[j] - rss[current]) / (current - j)
                let earlier = j == 0
                    || compare_products(
                        &[rss[j], -rss[current]],
                        (current - next) as f64,
                        &[rss[next], -rss[current]],
                        (current - j) as f64,
                    ) == Ordering::Less;
                if earlier {
                    cross = (rss[j] - rss[current]) / (current - j) as f64;
                    next = j;
                }
            }
            lambda = lambda.max(cross);
            breakpoints.push(lambda);
            thetas.push(next + 1);
            current = next;
        }
        Self {
            breakpoints,
            thetas,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn thetas(&self) -> &[usize] {
        &self.thetas
    }

    /// `(start, end, theta)` for each segment; `end` is infinite on the last.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.thetas.iter().enumerate().map(move |(k, &theta)| {
            let end = self
                .breakpoints
                .get(k + 1)
                .copied()
                .unwrap_or(f64::INFINITY);
            (self.breakpoints[k], end, theta)
        })
    }

    /// The selected period at penalty weight `lambda >= 0`, read off the
    /// stored breakpoints. Within rounding of a breakpoint this can differ
    /// from the exact answer; see [`theta_at_exact`](Self::theta_at_exact).
    pub fn theta_at(&self, lambda: f64) -> usize {
        let k = self
            .breakpoints
            .partition_point(|b| *b <= lambda)
            .saturating_sub(1);
        self.thetas[k]
    }

    /// Like [`theta_at`](Self::theta_at), but a `lambda` within rounding of
    /// a breakpoint is settled by comparing the neighbouring periods
    /// exactly, which makes the answer agree with
    /// [`estimate_period`](crate::scan::estimate_period) on the same curve.
    pub fn theta_at_exact(&self, rss: &[f64], lambda: f64) -> usize {
        if lambda.is_infinite() {
            return 1;
        }
        let k = self
            .breakpoints
            .partition_point(|b| *b <= lambda)
            .saturating_sub(1);
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(self.thetas.len() - 1);
        let mut best = self.thetas[hi];
        // thetas descend, so this visits periods in increasing order
        for &theta in self.thetas[lo..hi].iter().rev() {
            if compare_penalized(rss, theta, best, lambda) == Ordering::Less {
                best = theta;
            }
        }
        best
    }
}

/// `g(T) = log(T / Theta_T) / (T / Theta_T)^1.01`.
pub fn g_default(len: usize, theta_max: usize) -> Result<f64> {
    if theta_max == 0 {
        return Err(Error::InvalidRegularizer(
            "theta_max must be positive".into(),
        ));
    }
    let ratio = len as f64 / theta_max as f64;
    if ratio <= 1.0 {
        return Err(Error::InvalidRegularizer(format!(
            "T / theta_max = {ratio} must exceed 1"
        )));
    }
    Ok(ratio.ln() / ratio.powf(1.01))
}

/// Exponent of `T` in the scaled criterion.
pub const SCALED_EXPONENT: f64 = 0.01;

/// `T^0.01 * C`, where `C = (RSS(1) - RSS(b)) / ((b - 1) T)` is the average
/// RSS drop per extra period up to the unpenalized minimizer `b`, and
/// `C = 1 / T` when `b = 1`.
///
/// This puts the penalty on the scale of the data, so the criterion does not
/// depend on the units of the distance.
pub fn scaled_weight(rss: &[f64], len: usize) -> Result<f64> {
    if rss.is_empty() || len == 0 {
        return Err(Error::InvalidArgument("empty RSS curve".into()));
    }
    let t = len as f64;
    let b = crate::scan::estimate_period(rss, 0.0);
    let c = if b == 1 {
        1.0 / t
    } else {
        (rss[0] - rss[b - 1]) / ((b - 1) as f64 * t)
    };
    let g = t.powf(SCALED_EXPONENT) * c;
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidRegularizer(format!(
            "scaled weight must be positive and finite, got {g}"
        )));
    }
    Ok(g)
}

/// The per-period weight a criterion uses when none is given:
/// [`g_default`] for `rss` and `log-rss`, [`scaled_weight`] for
/// `scaled-rss`.
pub fn default_weight(kind: Criterion, rss: &[f64], len: usize, theta_max: usize) -> Result<f64> {
    match kind {
        Criterion::Rss | Criterion::LogRss => g_default(len, theta_max),
        Criterion::ScaledRss => scaled_weight(rss, len),
    }
}

/// Value of the information criterion at `theta_hat`.
pub fn information_criterion(
    rss: &[f64],
    len: usize,
    theta_hat: usize,
    g: f64,
    kind: Criterion,
) -> Result<f64> {
    if theta_hat == 0 || theta_hat > rss.len() {
        return Err(Error::InvalidArgument(format!(
            "theta_hat = {theta_hat} outside 1..={}",
            rss.len()
        )));
    }
    let fit = rss[theta_hat - 1] / len as f64;
    let penalty = theta_hat as f64 * g;
    match kind {
        Criterion::Rss | Criterion::ScaledRss => Ok(fit + penalty),
        Criterion::LogRss if fit > 0.0 => Ok(fit.ln() + penalty),
        Criterion::LogRss => Err(Error::ZeroRss { theta: theta_hat }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcRecord {
    pub theta: usize,
    pub lambda_start: f64,
    /// `None` for the unbounded last segment.
    pub lambda_end: Option<f64>,
    pub rss_over_t: f64,
    pub penalty: f64,
    pub ic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub criterion: Criterion,
    pub g_value: f64,
    pub records: Vec<IcRecord>,
    /// A representative of the winning segment; any lambda in it selects the
    /// same period.
    pub selected_lambda: f64,
    pub selected_theta: usize,
    pub selected_ic: f64,
}

/// Minimizes the information criterion over `lambda` and returns the winning
/// period with one record per path segment.
///
/// Ties in the criterion go to the smaller period. The reported lambda is the
/// midpoint of the winning segment, or its start plus one when unbounded.
pub fn select<P>(scan: &ScanResult<P>, kind: Criterion, g: f64) -> Result<IcReport> {
    select_from_rss(scan.rss(), scan.len(), kind, g)
}

pub fn select_from_rss(rss: &[f64], len: usize, kind: Criterion, g: f64) -> Result<IcReport> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidRegularizer(format!(
            "g must be positive and finite, got {g}"
        )));
    }
    let path = LambdaPath::from_rss(rss);
    let mut records = Vec::with_capacity(path.thetas().len());
    for (start, end, theta) in path.segments() {
        let ic = information_criterion(rss, len, theta, g, kind)?;
        records.push(IcRecord {
            theta,
            lambda_start: start,
            lambda_end: end.is_finite().then_some(end),
            rss_over_t: rss[theta - 1] / len as f64,
            penalty: theta as f64 * g,
            ic,
        });
    }
    let best = records
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.ic.total_cmp(&b.ic).then(a.theta.cmp(&b.theta)))
        .map(|(k, _)| k)
        .expect("the path has at least one segment");
    let winner = &records[best];
    let selected_lambda = match winner.lambda_end {
        Some(end) => 0.5 * (winner.lambda_start + end),
        None => winner.lambda_start + 1.0,
    };
    Ok(IcReport {
        criterion: kind,
        g_value: g,
        selected_lambda,
        selected_theta: winner.theta,
        selected_ic: winner.ic,
        records,
    })
}
