//! Univariate distributions under the 2-Wasserstein distance.
//!
//! A distribution is represented by its quantile function sampled at the
//! mid-levels `(k - 0.5) / M`, `k = 1..M`. On this grid `W_2` is the
//! root-mean-square difference of quantile values and the barycenter is the
//! weighted average of quantile vectors, which stays monotone.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{
    check_finite, check_lengths, normalize_weights, weighted_average, MetricSpace, SpaceKind,
};
use crate::error::{Error, Result};

pub const DEFAULT_QUANTILE_GRID: usize = 100;

/// The quantile levels `(k - 0.5) / m` for `k = 1..m`.
pub fn quantile_levels(m: usize) -> Vec<f64> {
    (1..=m).map(|k| (k as f64 - 0.5) / m as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileFunction(Vec<f64>);

impl QuantileFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPoint("empty quantile function".into()));
        }
        check_finite(&values, "quantile function")?;
        if let Some(k) = values.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::InvalidPoint(format!(
                "quantile function decreases between grid points {k} and {}",
                k + 1
            )));
        }
        Ok(Self(values))
    }

    /// Quantiles of `Normal(mean, sd^2)` on an `m`-point grid.
    pub fn normal(mean: f64, sd: f64, m: usize) -> Result<Self> {
        let dist = Normal::new(mean, sd)
            .map_err(|e| Error::InvalidArgument(format!("normal distribution: {e}")))?;
        Self::new(
            quantile_levels(m)
                .into_iter()
                .map(|u| dist.inverse_cdf(u))
                .collect(),
        )
    }

    /// Converts a nonnegative curve sampled on an increasing `grid` into the
    /// quantile function of the density it defines.
    ///
    /// The curve is normalized by its trapezoid-rule integral and treated as
    /// piecewise linear, so the CDF is piecewise quadratic and inverted exactly
    /// on each cell.
    pub fn from_density(grid: &[f64], density: &[f64], m: usize) -> Result<Self> {
        if grid.len() != density.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: density.len(),
            });
        }
        if grid.len() < 2 {
            return Err(Error::validation(
                "density",
                "a curve needs at least 2 samples",
            ));
        }
        check_finite(grid, "curve grid")?;
        check_finite(density, "curve")?;
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(
                "density",
                "grid must be strictly increasing",
            ));
        }
        if let Some((i, v)) = density.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::validation(
                "density",
                format!("negative mass {v} at sample {i}"),
            ));
        }
        let cells: Vec<f64> = grid
            .windows(2)
            .zip(density.windows(2))
            .map(|(x, f)| 0.5 * (f[0] + f[1]) * (x[1] - x[0]))
            .collect();
        let total: f64 = cells.iter().sum();
        if total <= 0.0 {
            return Err(Error::validation("density", "curve has zero total mass"));
        }
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        for c in &cells {
            cdf.push(cdf.last().unwrap() + c / total);
        }

        let mut values = Vec::with_capacity(m);
        let mut cell = 0;
        for u in quantile_levels(m) {
            while cell + 1 < cells.len() && cdf[cell + 1] < u {
                cell += 1;
            }
            let (x0, x1) = (grid[cell], grid[cell + 1]);
            let h = x1 - x0;
            let (f0, f1) = (density[cell] / total, density[cell + 1] / total);
            let need = u - cdf[cell];
            // mass on [x0, x0 + s] is f0 s + (f1 - f0) s^2 / (2h)
            let a = 0.5 * (f1 - f0) / h;
            let s = if a.abs() < 1e-14 * (f0.abs() + f1.abs()).max(f64::MIN_POSITIVE) {
                if f0 > 0.0 {
                    need / f0
                } else {
                    0.0
                }
            } else {
                let disc = (f0 * f0 + 4.0 * a * need).max(0.0);
                // numerically stable root of a s^2 + f0 s - need = 0
                2.0 * need / (f0 + disc.sqrt())
            };
            values.push(x0 + s.clamp(0.0, h));
        }
        // rounding can leave adjacent cells a hair out of order
        for k in 1..values.len() {
            if values[k] < values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for QuantileFunction {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileFunction> for Vec<f64> {
    fn from(q: QuantileFunction) -> Self {
        q.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wasserstein1d {
    grid: usize,
}

impl Wasserstein1d {
    pub fn new(grid: usize) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }
}

impl Default for Wasserstein1d {
    fn default() -> Self {
        Self::new(DEFAULT_QUANTILE_GRID)
    }
}

impl MetricSpace for Wasserstein1d {
    type Point = QuantileFunction;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Wasserstein1d
    }

    fn validate(&self, point: &QuantileFunction) -> Result<()> {
        if point.len() != self.grid {
            return Err(Error::Dimension {
                expected: self.grid,
                found: point.len(),
            });
        }
        Ok(())
    }

    fn distance(&self, a: &QuantileFunction, b: &QuantileFunction) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        let ss: f64 = a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok((ss / self.grid as f64).sqrt())
    }

    fn frechet_mean(
        &self,
        points: &[&QuantileFunction],
        weights: &[f64],
    ) -> Result<QuantileFunction> {
        check_lengths(points.len(), weights.len())?;
        let weights = normalize_weights(weights)?;
        for p in points {
            self.validate(p)?;
        }
        let rows: Vec<&[f64]> = points.iter().map(|p| p.0.as_slice()).collect();
        QuantileFunction::new(weighted_average(&rows, &weights))
    }
}
