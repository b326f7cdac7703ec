use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_lengths, normalize_weights, weighted_average, MetricSpace, SpaceKind,
    INVARIANT_TOLERANCE,
};
use crate::error::{Error, Result};

/// A graph Laplacian `L = D - A`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GraphLaplacian {
    nodes: usize,
    entries: Vec<f64>,
}

impl GraphLaplacian {
    /// Validates symmetry, zero row sums and nonpositive off-diagonals.
    pub fn from_row_major(nodes: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != nodes * nodes {
            return Err(Error::Dimension {
                expected: nodes * nodes,
                found: entries.len(),
            });
        }
        check_finite(&entries, "laplacian")?;
        let l = Self { nodes, entries };
        l.check_structure()?;
        Ok(l)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nodes = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != nodes) {
            return Err(Error::Dimension {
                expected: nodes,
                found: r.len(),
            });
        }
        Self::from_row_major(nodes, rows.into_iter().flatten().collect())
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.nodes;
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                let x = self.get(i, j);
                row_sum += x;
                if i != j && x > INVARIANT_TOLERANCE {
                    return Err(Error::InvalidPoint(format!(
                        "laplacian off-diagonal ({i}, {j}) = {x} is positive"
                    )));
                }
                if (x - self.get(j, i)).abs() > INVARIANT_TOLERANCE {
                    return Err(Error::InvalidPoint(format!(
                        "laplacian is not symmetric at ({i}, {j})"
                    )));
                }
            }
            if row_sum.abs() > INVARIANT_TOLERANCE {
                return Err(Error::InvalidPoint(format!(
                    "laplacian row {i} sums to {row_sum}"
                )));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.nodes + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.nodes.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Total edge weight, `trace(L) / 2`.
    pub fn network_size(&self) -> f64 {
        (0..self.nodes).map(|i| self.get(i, i)).sum::<f64>() / 2.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for GraphLaplacian {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<GraphLaplacian> for Vec<Vec<f64>> {
    fn from(l: GraphLaplacian) -> Self {
        l.rows()
    }
}

/// Builds `L = D - A` with `d_ii = sum_j a_ij`.
pub fn laplacian_from_adjacency(adjacency: &[Vec<f64>]) -> Result<GraphLaplacian> {
    let n = adjacency.len();
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidAdjacency(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, &a) in row.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidAdjacency(format!(
                    "entry ({i}, {j}) = {a} is not a nonnegative weight"
                )));
            }
            if (a - adjacency[j][i]).abs() > INVARIANT_TOLERANCE {
                return Err(Error::InvalidAdjacency(format!(
                    "not symmetric at ({i}, {j})"
                )));
            }
        }
        if row[i] != 0.0 {
            return Err(Error::InvalidAdjacency(format!(
                "diagonal entry ({i}, {i}) must be zero"
            )));
        }
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if i != j {
                // symmetrize so the result is exactly symmetric
                let a = 0.5 * (adjacency[i][j] + adjacency[j][i]);
                entries[i * n + j] = -a;
                degree += a;
            }
        }
        entries[i * n + i] = degree;
    }
    GraphLaplacian::from_row_major(n, entries)
}

/// Graph Laplacians on a fixed node set with the Frobenius distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    nodes: usize,
}

impl Laplacian {
    pub fn new(nodes: usize) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl MetricSpace for Laplacian {
    type Point = GraphLaplacian;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Laplacian
    }

    fn validate(&self, point: &GraphLaplacian) -> Result<()> {
        if point.nodes != self.nodes {
            return Err(Error::Dimension {
                expected: self.nodes,
                found: point.nodes,
            });
        }
        Ok(())
    }

    fn distance(&self, a: &GraphLaplacian, b: &GraphLaplacian) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(a.entries
            .iter()
            .zip(&b.entries)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }

    fn frechet_mean(&self, points: &[&GraphLaplacian], weights: &[f64]) -> Result<GraphLaplacian> {
        check_lengths(points.len(), weights.len())?;
        let weights = normalize_weights(weights)?;
        for p in points {
            self.validate(p)?;
        }
        let rows: Vec<&[f64]> = points.iter().map(|p| p.entries.as_slice()).collect();
        let entries = weighted_average(&rows, &weights);
        // convex combinations stay Laplacians; a failure here is a bug, not
        // something to project away
        GraphLaplacian::from_row_major(self.nodes, entries)
    }
}
