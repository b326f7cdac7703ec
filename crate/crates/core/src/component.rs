//! The estimated periodic component `m_hat(1..theta_hat)` and its periodic
//! extension, plus error measures against a known truth.

use crate::error::{Error, Result};
use crate::metric::{sqrt_compositional_transform, MetricSpace, SpherePoint};
use crate::scan::{phase_barycenters, phase_of, ObjectSeries, PhaseAssignment, ScanResult};
use crate::simulation::l_schedule;

#[derive(Debug, Clone)]
pub struct PeriodicComponent<S: MetricSpace> {
    space: S,
    period: usize,
    values: Vec<S::Point>,
    phase_counts: Vec<usize>,
}

impl<S: MetricSpace> PeriodicComponent<S> {
    /// Wraps per-phase values; `values[l - 1]` is the value at phase `l`.
    pub fn new(space: S, values: Vec<S::Point>, phase_counts: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "a component needs at least one phase".into(),
            ));
        }
        if phase_counts.len() != values.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                found: phase_counts.len(),
            });
        }
        for v in &values {
            space.validate(v)?;
        }
        Ok(Self {
            space,
            period: values.len(),
            values,
            phase_counts,
        })
    }

    pub fn space(&self) -> &S {
        &self.space
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn values(&self) -> &[S::Point] {
        &self.values
    }

    pub fn phase_counts(&self) -> &[usize] {
        &self.phase_counts
    }

    /// The extension at time `t >= 0`: the stored value of phase
    /// `phase_of(t, period)`, so `at(t)` and `at(t + period)` are the same
    /// object.
    pub fn at(&self, t: usize) -> &S::Point {
        &self.values[phase_of(t, self.period) - 1]
    }

    /// The extension over times `1..=len`.
    pub fn extend(&self, len: usize) -> Vec<S::Point> {
        (1..=len).map(|t| self.at(t).clone()).collect()
    }

    /// Per-phase mean squared distance from the observations to the value.
    pub fn dispersion(&self, series: &ObjectSeries<S>) -> Result<Vec<f64>> {
        let assignment = PhaseAssignment::new(series.len(), self.period)?;
        (1..=self.period)
            .map(|phase| {
                let mut total = 0.0;
                let mut n = 0;
                for i in assignment.members(phase) {
                    let d = self
                        .space
                        .distance(&series.points()[i], &self.values[phase - 1])?;
                    total += d * d;
                    n += 1;
                }
                Ok(total / n as f64)
            })
            .collect()
    }
}

/// `m_hat(l)` for `l = 1..=theta_hat`: the phase barycenters at `theta_hat`.
pub fn extract_component<S: MetricSpace>(
    series: &ObjectSeries<S>,
    theta_hat: usize,
) -> Result<PeriodicComponent<S>> {
    let values = phase_barycenters(series, theta_hat)?;
    let counts = PhaseAssignment::new(series.len(), theta_hat)?
        .counts()
        .to_vec();
    PeriodicComponent::new(series.space().clone(), values, counts)
}

/// Like [`extract_component`] but reuses barycenters cached by the scan.
pub fn component_from_scan<S: MetricSpace>(
    series: &ObjectSeries<S>,
    scan: &ScanResult<S::Point>,
    theta_hat: usize,
) -> Result<PeriodicComponent<S>> {
    let cached = if theta_hat >= 1 && scan.len() == series.len() {
        scan.barycenters(theta_hat)
    } else {
        None
    };
    match cached {
        Some(values) => {
            let counts = PhaseAssignment::new(series.len(), theta_hat)?
                .counts()
                .to_vec();
            PeriodicComponent::new(series.space().clone(), values.to_vec(), counts)
        }
        None => extract_component(series, theta_hat),
    }
}

fn distances_to_truth<S: MetricSpace>(
    estimated: &PeriodicComponent<S>,
    truth: &[S::Point],
) -> Result<Vec<f64>> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty truth sequence".into()));
    }
    truth
        .iter()
        .enumerate()
        .map(|(i, m)| estimated.space.distance(estimated.at(i + 1), m))
        .collect()
}

/// `T^-1 sum_t d^2(m_hat(t), m(t))` over the length of `truth`.
pub fn component_mse<S: MetricSpace>(
    estimated: &PeriodicComponent<S>,
    truth: &[S::Point],
) -> Result<f64> {
    let d = distances_to_truth(estimated, truth)?;
    Ok(d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64)
}

/// `T^-1 sum_t d(m_hat(t), m(t))`, the unsquared average distance.
pub fn component_mean_distance<S: MetricSpace>(
    estimated: &PeriodicComponent<S>,
    truth: &[S::Point],
) -> Result<f64> {
    let d = distances_to_truth(estimated, truth)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// `max_t d(m_hat(t), m(t))`.
pub fn component_max_distance<S: MetricSpace>(
    estimated: &PeriodicComponent<S>,
    truth: &[S::Point],
) -> Result<f64> {
    let d = distances_to_truth(estimated, truth)?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// Mean composition `(l/(2l+1), l/(2l+1), 1/(2l+1))` of the Dirichlet family
/// at time `t`, with `l = l_schedule(t, theta0)`.
pub fn true_component_dirichlet(t: usize, theta0: usize) -> [f64; 3] {
    let l = l_schedule(t, theta0);
    let s = 2.0 * l + 1.0;
    [l / s, l / s, 1.0 / s]
}

/// The Dirichlet mean path over `1..=len`, mapped to the sphere.
pub fn dirichlet_truth(len: usize, theta0: usize) -> Vec<SpherePoint> {
    (1..=len)
        .map(|t| {
            sqrt_compositional_transform(&true_component_dirichlet(t, theta0))
                .expect("the Dirichlet mean is a valid composition")
        })
        .collect()
}
