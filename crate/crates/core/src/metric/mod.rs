//! Metric spaces for random objects.
//!
//! Each space pairs a distance with a weighted Fréchet mean solver, i.e. a
//! minimizer of `sum_i w_i d^2(y_i, omega)`:
//!
//! - [`Sphere`]: unit sphere with the geodesic (arc-length) distance; the
//!   natural home for square-root transformed compositions.
//! - [`Laplacian`]: graph Laplacians with the Frobenius distance.
//! - [`Wasserstein1d`]: univariate distributions represented by quantile
//!   functions on a fixed grid, with the 2-Wasserstein distance.
//! - [`Euclidean`]: plain `R^p`.
//!
//! Everything except the sphere has a closed-form mean (a weighted average).

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod euclidean;
mod laplacian;
mod sphere;
mod wasserstein;

pub use euclidean::{Euclidean, EuclideanPoint};
pub use laplacian::{laplacian_from_adjacency, GraphLaplacian, Laplacian};
pub use sphere::{sqrt_compositional_transform, Sphere, SphereMeanReport, SpherePoint};
pub use wasserstein::{quantile_levels, QuantileFunction, Wasserstein1d, DEFAULT_QUANTILE_GRID};

/// Tolerance used when checking point invariants (unit norm, symmetry, ...).
pub const INVARIANT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Sphere,
    Laplacian,
    Wasserstein1d,
    Euclidean,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Sphere => "sphere",
            SpaceKind::Laplacian => "laplacian",
            SpaceKind::Wasserstein1d => "wasserstein1d",
            SpaceKind::Euclidean => "euclidean",
        }
    }
}

/// Settings for iterative mean solvers. Closed-form spaces ignore them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Stop once the Riemannian gradient norm drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Extra solver runs started from the heaviest data points. When any of
    /// them lands more than `10 * tolerance` away from the primary solution
    /// the mean is reported as multimodal. Zero disables the check.
    pub restarts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            restarts: 0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "solver max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A metric space together with its Fréchet mean solver.
///
/// Implementations are immutable descriptors; all methods are pure and may be
/// called from any number of threads.
pub trait MetricSpace: Clone + Debug + Send + Sync {
    type Point: Clone + Debug + PartialEq + Send + Sync;

    fn kind(&self) -> SpaceKind;

    /// Checks that `point` belongs to this space (dimensions and structure).
    fn validate(&self, point: &Self::Point) -> Result<()>;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> Result<f64>;

    /// Weighted Fréchet mean of `points`.
    ///
    /// Weights must be nonnegative with a positive sum; they are normalized
    /// internally, so only their ratios matter.
    fn frechet_mean(&self, points: &[&Self::Point], weights: &[f64]) -> Result<Self::Point>;

    /// The weighted Fréchet objective `sum_i w_i d^2(y_i, omega)` with weights
    /// used as given.
    fn objective(
        &self,
        points: &[&Self::Point],
        weights: &[f64],
        omega: &Self::Point,
    ) -> Result<f64> {
        if points.len() != weights.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                found: weights.len(),
            });
        }
        let mut total = 0.0;
        for (p, &w) in points.iter().zip(weights) {
            if w != 0.0 {
                let d = self.distance(p, omega)?;
                total += w * d * d;
            }
        }
        Ok(total)
    }

    /// Unweighted Fréchet mean.
    fn mean(&self, points: &[&Self::Point]) -> Result<Self::Point> {
        let w = vec![1.0; points.len()];
        self.frechet_mean(points, &w)
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateWeights(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::DegenerateWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        Ok(Self(normalize_weights(weights)?))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::DegenerateWeights("no points supplied".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::DegenerateWeights(format!(
            "weights must be finite and nonnegative, found {w}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateWeights("weights sum to zero".into()));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

pub(crate) fn check_lengths(points: usize, weights: usize) -> Result<()> {
    if points != weights {
        return Err(Error::Dimension {
            expected: points,
            found: weights,
        });
    }
    Ok(())
}

/// Weighted average of equal-length coordinate vectors.
///
/// Computed per coordinate as `a + sum_i w_i (x_i - a)` with `a` the smallest
/// value among positively weighted rows, summing the nonnegative terms in
/// sorted order. The result does not depend on the order of the rows, and a
/// set of identical rows averages to that row bit for bit.
pub(crate) fn weighted_average(rows: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let active: Vec<(&[f64], f64)> = rows
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(r, w)| (*r, *w))
        .collect();
    assert!(
        !active.is_empty(),
        "normalized weights have a positive entry"
    );
    let dim = active[0].0.len();
    let mut terms = Vec::with_capacity(active.len());
    (0..dim)
        .map(|k| {
            let anchor = active
                .iter()
                .map(|(r, _)| r[k])
                .fold(f64::INFINITY, f64::min);
            terms.clear();
            terms.extend(active.iter().map(|(r, w)| w * (r[k] - anchor)));
            terms.sort_by(f64::total_cmp);
            anchor + terms.iter().sum::<f64>()
        })
        .collect()
}

pub(crate) fn check_finite(coords: &[f64], what: &str) -> Result<()> {
    if coords.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidPoint(format!(
            "{what} has non-finite coordinates"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
