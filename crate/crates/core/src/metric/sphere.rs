//! Unit sphere `S^{p-1}` with the geodesic distance `arccos(a . b)`.
//!
//! The Fréchet mean is found by Riemannian gradient descent with exact
//! exponential and logarithm maps, started from the normalized extrinsic mean.
//! For data inside an open hemisphere (e.g. square-root transformed
//! compositions, which live in the positive orthant) the minimizer is unique.

use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_lengths, dot, norm, normalize_weights, MetricSpace, SolverSettings,
    SpaceKind, INVARIANT_TOLERANCE,
};
use crate::error::{Error, Result};

/// Entries of a composition below this magnitude are treated as exact zeros.
const COMPOSITION_ZERO: f64 = 1e-12;
/// Maximum number of step halvings in one line search.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidPoint(format!(
                "sphere points need at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        check_finite(&coords, "sphere point")?;
        let n = norm(&coords);
        if (n - 1.0).abs() > INVARIANT_TOLERANCE {
            return Err(Error::InvalidPoint(format!(
                "sphere point has norm {n}, expected 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Scales a nonzero vector onto the sphere.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords, "sphere point")?;
        let n = norm(&coords);
        if n == 0.0 {
            return Err(Error::InvalidPoint(
                "cannot normalize the zero vector".into(),
            ));
        }
        Self::new(coords.into_iter().map(|x| x / n).collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

/// Maps a composition in the simplex to the sphere by component-wise square
/// roots.
pub fn sqrt_compositional_transform(composition: &[f64]) -> Result<SpherePoint> {
    if composition.len() < 2 {
        return Err(Error::InvalidComposition(
            "a composition needs at least 2 parts".into(),
        ));
    }
    if let Some(x) = composition.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidComposition(format!(
            "negative or non-finite entry {x}"
        )));
    }
    let sum: f64 = composition.iter().sum();
    if (sum - 1.0).abs() > INVARIANT_TOLERANCE {
        return Err(Error::InvalidComposition(format!(
            "entries sum to {sum}, expected 1"
        )));
    }
    let coords = composition
        .iter()
        .map(|&x| if x < COMPOSITION_ZERO { 0.0 } else { x.sqrt() })
        .collect();
    SpherePoint::new(coords)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereMeanReport {
    pub mean: SpherePoint,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
    /// Set when a restart converged to a different point.
    pub multimodal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    ambient_dim: usize,
    settings: SolverSettings,
}

impl Sphere {
    /// The unit sphere in `R^ambient_dim`.
    pub fn new(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            settings: SolverSettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        self.settings = settings;
        Ok(self)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Riemannian logarithm: the tangent vector at `base` pointing to `target`
    /// with length `d(base, target)`.
    pub fn log_map(base: &[f64], target: &[f64]) -> Vec<f64> {
        let c = dot(base, target);
        let mut v: Vec<f64> = target.iter().zip(base).map(|(t, b)| t - c * b).collect();
        let s = norm(&v);
        if s == 0.0 {
            return vec![0.0; base.len()];
        }
        let angle = s.atan2(c);
        let scale = angle / s;
        v.iter_mut().for_each(|x| *x *= scale);
        v
    }

    /// Riemannian exponential at `base` applied to tangent vector `v`.
    pub fn exp_map(base: &[f64], v: &[f64]) -> Vec<f64> {
        let len = norm(v);
        if len == 0.0 {
            return base.to_vec();
        }
        let (s, c) = len.sin_cos();
        let mut out: Vec<f64> = base
            .iter()
            .zip(v)
            .map(|(b, x)| c * b + s * x / len)
            .collect();
        // keep the iterate on the sphere despite rounding
        let n = norm(&out);
        out.iter_mut().for_each(|x| *x /= n);
        out
    }

    fn geodesic(a: &[f64], b: &[f64]) -> f64 {
        let chord: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        2.0 * (0.5 * chord).min(1.0).asin()
    }

    fn objective_raw(points: &[&[f64]], weights: &[f64], omega: &[f64]) -> f64 {
        points
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(p, w)| {
                let d = Self::geodesic(p, omega);
                w * d * d
            })
            .sum()
    }

    /// `sum_i w_i log_omega(y_i)`; the objective gradient is `-2` times this.
    fn mean_log(points: &[&[f64]], weights: &[f64], omega: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; omega.len()];
        for (p, &w) in points.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let v = Self::log_map(omega, p);
            out.iter_mut().zip(&v).for_each(|(o, x)| *o += w * x);
        }
        out
    }

    fn descend(
        &self,
        points: &[&[f64]],
        weights: &[f64],
        start: Vec<f64>,
    ) -> Result<(Vec<f64>, usize, f64, f64)> {
        let mut omega = start;
        let mut f = Self::objective_raw(points, weights, &omega);
        for iteration in 0..self.settings.max_iterations {
            let direction = Self::mean_log(points, weights, &omega);
            let grad_norm = 2.0 * norm(&direction);
            if grad_norm < self.settings.tolerance {
                return Ok((omega, iteration, grad_norm, f));
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let scaled: Vec<f64> = direction.iter().map(|x| x * step).collect();
                let candidate = Self::exp_map(&omega, &scaled);
                let fc = Self::objective_raw(points, weights, &candidate);
                // non-increase up to rounding in the objective
                if fc <= f + 8.0 * f64::EPSILON * f.abs() {
                    omega = candidate;
                    f = fc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // no representable descent step remains
                return Ok((omega, iteration, grad_norm, f));
            }
        }
        let grad_norm = 2.0 * norm(&Self::mean_log(points, weights, &omega));
        if grad_norm < self.settings.tolerance {
            return Ok((omega, self.settings.max_iterations, grad_norm, f));
        }
        Err(Error::Convergence {
            iterations: self.settings.max_iterations,
            gradient_norm: grad_norm,
            last_iterate: omega,
        })
    }

    /// Fréchet mean together with solver diagnostics.
    pub fn frechet_mean_report(
        &self,
        points: &[&SpherePoint],
        weights: &[f64],
    ) -> Result<SphereMeanReport> {
        check_lengths(points.len(), weights.len())?;
        let weights = normalize_weights(weights)?;
        for p in points {
            self.validate(p)?;
        }
        let coords: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();

        let active: Vec<usize> = (0..coords.len()).filter(|&i| weights[i] > 0.0).collect();
        if active.len() == 1 {
            return Ok(SphereMeanReport {
                mean: points[active[0]].clone(),
                iterations: 0,
                gradient_norm: 0.0,
                objective: 0.0,
                multimodal: false,
            });
        }

        let extrinsic = super::weighted_average(&coords, &weights);
        let len = norm(&extrinsic);
        if len < 1e-12 {
            return Err(Error::DegenerateConfiguration(
                "the extrinsic mean is at the origin; the Fréchet mean is not unique".into(),
            ));
        }
        let start: Vec<f64> = extrinsic.iter().map(|x| x / len).collect();
        let (omega, iterations, gradient_norm, objective) =
            self.descend(&coords, &weights, start)?;

        let mut multimodal = false;
        if self.settings.restarts > 0 {
            let mut order = active.clone();
            order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
            for &i in order.iter().take(self.settings.restarts) {
                if let Ok((other, ..)) = self.descend(&coords, &weights, coords[i].to_vec()) {
                    if Self::geodesic(&other, &omega) > 10.0 * self.settings.tolerance {
                        multimodal = true;
                    }
                }
            }
        }

        Ok(SphereMeanReport {
            mean: SpherePoint(omega),
            iterations,
            gradient_norm,
            objective,
            multimodal,
        })
    }
}

impl MetricSpace for Sphere {
    type Point = SpherePoint;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Sphere
    }

    fn validate(&self, point: &SpherePoint) -> Result<()> {
        if point.dim() != self.ambient_dim {
            return Err(Error::Dimension {
                expected: self.ambient_dim,
                found: point.dim(),
            });
        }
        Ok(())
    }

    fn distance(&self, a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        let c = dot(a.coords(), b.coords());
        if c.abs() > 1.0 + INVARIANT_TOLERANCE {
            return Err(Error::InvalidPoint(format!(
                "inner product {c} outside [-1, 1]"
            )));
        }
        Ok(Self::geodesic(a.coords(), b.coords()))
    }

    fn frechet_mean(&self, points: &[&SpherePoint], weights: &[f64]) -> Result<SpherePoint> {
        Ok(self.frechet_mean_report(points, weights)?.mean)
    }
}
