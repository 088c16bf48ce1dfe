//! Bump functions, the partition of unity subordinate to {10B_{j,k}}, and the maps σ_k.

use serde::{Deserialize, Serialize};

use super::ccbp::{radius, Ccbp};
use crate::geometry::{dist, Point};

/// φ(s) = 1 on [0, 8], 0 on [10, ∞), quintic smootherstep in between (C², monotone).
pub fn bump(s: f64) -> f64 {
    if s <= 8.0 {
        1.0
    } else if s >= 10.0 {
        0.0
    } else {
        let t = (10.0 - s) / 2.0;
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// (j, θ_{j,k}(y)) for the centres with θ > 0, ascending j.
    pub weights: Vec<(usize, f64)>,
    pub psi: f64,
}

impl Partition {
    pub fn total(&self) -> f64 {
        self.weights.iter().map(|w| w.1).sum()
    }
}

/// θ_{j,k}(y) = φ(|y − x_{j,k}|/r_k) / max(Φ(y), 1), ψ_k = 1 − Σθ. Φ ≥ 1 on V_k^8, so Σθ = 1 there.
pub fn partition_of_unity(c: &Ccbp, k: usize, y: &[f64]) -> Partition {
    if k >= c.depth() {
        return Partition { weights: Vec::new(), psi: 1.0 };
    }
    let rk = radius(k);
    let layer = &c.layers[k];
    let raw: Vec<(usize, f64)> = c
        .centers_near(k, y, 10.0 * rk, false)
        .into_iter()
        .map(|j| (j, bump(dist(y, &layer.centers[j]) / rk)))
        .filter(|w| w.1 > 0.0)
        .collect();
    let phi: f64 = raw.iter().map(|w| w.1).sum();
    if phi == 0.0 {
        return Partition { weights: Vec::new(), psi: 1.0 };
    }
    let norm = phi.max(1.0);
    let weights: Vec<(usize, f64)> = raw.into_iter().map(|(j, v)| (j, v / norm)).collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let psi = if phi >= 1.0 { 0.0 } else { 1.0 - total };
    Partition { weights, psi }
}

/// σ_k(y) = y + Σ_j θ_{j,k}(y)[π_{j,k}(y) − y].
pub fn sigma_k(c: &Ccbp, k: usize, y: &[f64]) -> Point {
    let part = partition_of_unity(c, k, y);
    let mut out = y.to_vec();
    for (j, th) in part.weights {
        let p = c.layers[k].planes[j].project(y);
        for ((o, pi), yi) in out.iter_mut().zip(&p).zip(y) {
            *o += th * (pi - yi);
        }
    }
    out
}
