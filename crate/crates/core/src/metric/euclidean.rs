use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_lengths, normalize_weights, weighted_average, MetricSpace, SpaceKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EuclideanPoint(Vec<f64>);

impl EuclideanPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords, "euclidean point")?;
        Ok(Self(coords))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::new(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EuclideanPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EuclideanPoint> for Vec<f64> {
    fn from(p: EuclideanPoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl MetricSpace for Euclidean {
    type Point = EuclideanPoint;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Euclidean
    }

    fn validate(&self, point: &EuclideanPoint) -> Result<()> {
        if point.0.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: point.0.len(),
            });
        }
        Ok(())
    }

    fn distance(&self, a: &EuclideanPoint, b: &EuclideanPoint) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(a.0
            .iter()
            .zip(&b.0)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }

    fn frechet_mean(&self, points: &[&EuclideanPoint], weights: &[f64]) -> Result<EuclideanPoint> {
        check_lengths(points.len(), weights.len())?;
        let weights = normalize_weights(weights)?;
        for p in points {
            self.validate(p)?;
        }
        let rows: Vec<&[f64]> = points.iter().map(|p| p.0.as_slice()).collect();
        EuclideanPoint::new(weighted_average(&rows, &weights))
    }
}
