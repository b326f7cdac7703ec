#![allow(dead_code, clippy::needless_range_loop)]

use objper::metric::SpherePoint;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// A point within `radius` of `center` on S^2.
pub fn near(rng: &mut impl Rng, center: &[f64], radius: f64) -> SpherePoint {
    let dir = random_unit(rng, 3);
    let c: f64 = dir.iter().zip(center).map(|(a, b)| a * b).sum();
    let tangent: Vec<f64> = dir.iter().zip(center).map(|(d, m)| d - c * m).collect();
    let tn = tangent.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>();
    let coords: Vec<f64> = center
        .iter()
        .zip(&tangent)
        .map(|(m, t)| m * r.cos() + t / tn * r.sin())
        .collect();
    SpherePoint::normalize(coords).unwrap()
}

pub fn arccos_distance(a: &[f64], b: &[f64]) -> f64 {
    let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    c.clamp(-1.0, 1.0).acos()
}

pub fn oracle_objective(points: &[SpherePoint], weights: &[f64], omega: &[f64]) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * arccos_distance(p.coords(), omega).powi(2))
        .sum()
}

/// Orthonormal tangent basis at `m` on S^2.
pub fn tangent_basis(m: &[f64]) -> ([f64; 3], [f64; 3]) {
    let pick = if m[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let c: f64 = pick.iter().zip(m).map(|(a, b)| a * b).sum();
    let mut e1 = [pick[0] - c * m[0], pick[1] - c * m[1], pick[2] - c * m[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|x| *x /= n);
    let e2 = [
        m[1] * e1[2] - m[2] * e1[1],
        m[2] * e1[0] - m[0] * e1[2],
        m[0] * e1[1] - m[1] * e1[0],
    ];
    (e1, e2)
}

pub fn exp_at(m: &[f64], e1: &[f64; 3], e2: &[f64; 3], u: f64, v: f64) -> [f64; 3] {
    let r = (u * u + v * v).sqrt();
    if r == 0.0 {
        return [m[0], m[1], m[2]];
    }
    let (s, c) = r.sin_cos();
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = c * m[k] + s * (u * e1[k] + v * e2[k]) / r;
    }
    out
}

/// Brute-force minimizer of the weighted Frechet objective over a geodesic
/// grid of half-width 0.25 rad and step 0.002 around the normalized
/// extrinsic mean. Returns the objective value and the grid point.
pub fn cap_grid_minimum(pts: &[SpherePoint], weights: &[f64]) -> (f64, [f64; 3]) {
    let step = 0.002;
    let n = (0.25 / step) as i64;
    // grid centered on the normalized extrinsic mean, in geodesic polar
    // coordinates
    let mut ext = [0.0; 3];
    for (p, w) in pts.iter().zip(weights) {
        for k in 0..3 {
            ext[k] += w * p.coords()[k];
        }
    }
    let en = (ext[0] * ext[0] + ext[1] * ext[1] + ext[2] * ext[2]).sqrt();
    ext.iter_mut().for_each(|x| *x /= en);
    let (e1, e2) = tangent_basis(&ext);
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in -n..=n {
        for j in -n..=n {
            let q = exp_at(&ext, &e1, &e2, i as f64 * step, j as f64 * step);
            let f = oracle_objective(pts, weights, &q);
            if f < best.0 {
                best = (f, q);
            }
        }
    }
    best
}
