//! f_0 = id on a lattice of P0, f_{k+1} = σ_k ∘ f_k.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ccbp::{radius, Ccbp};
use super::partition::sigma_k;
use crate::error::{Result, TstError};
use crate::geometry::{dist, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateConfig {
    /// Lattice pitch h in P0 frame coordinates.
    pub pitch: f64,
    /// The lattice covers [-extent, extent]^d around the base point of P0.
    pub extent: f64,
    /// Upper bound on the number of σ_k applications.
    pub max_steps: usize,
}

impl Default for IterateConfig {
    fn default() -> Self {
        Self { pitch: 0.01, extent: 3.0, max_steps: usize::MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceIterate {
    pub d: usize,
    pub pitch: f64,
    /// Points per axis of the lattice.
    pub side: usize,
    /// Frame coordinates of the lattice points, row-major with axis 0 fastest.
    pub coords: Vec<Vec<f64>>,
    /// images[k] = f_k(lattice), k = 0..=steps.
    pub images: Vec<Vec<Point>>,
    /// sup |f_{k+1} − f_k| per step.
    pub displacement: Vec<f64>,
}

impl SurfaceIterate {
    pub fn steps(&self) -> usize {
        self.images.len() - 1
    }

    /// The surface sample Σ = f_K(lattice).
    pub fn surface(&self) -> &[Point] {
        self.images.last().expect("f_0 always present")
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Number of steps actually applied: stops at the last layer, at `max_steps`, or once
/// 10·r_k < h/10.
pub fn effective_steps(c: &Ccbp, cfg: &IterateConfig) -> usize {
    (0..c.depth().min(cfg.max_steps)).take_while(|&k| 10.0 * radius(k) >= cfg.pitch / 10.0).count()
}

pub fn iterate(c: &Ccbp, cfg: &IterateConfig) -> Result<SurfaceIterate> {
    if !(cfg.pitch > 0.0 && cfg.extent > 0.0) {
        return Err(TstError::InvalidInput("pitch and extent must be positive".into()));
    }
    let d = c.d();
    let m = (cfg.extent / cfg.pitch).round() as usize;
    let side = 2 * m + 1;
    let total = side
        .checked_pow(d as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| TstError::InvalidInput(format!("lattice with {side}^{d} points is too large")))?;
    let coords: Vec<Vec<f64>> = (0..total)
        .map(|mut t| {
            (0..d)
                .map(|_| {
                    let v = ((t % side) as f64 - m as f64) * cfg.pitch;
                    t /= side;
                    v
                })
                .collect()
        })
        .collect();
    let f0: Vec<Point> = coords.iter().map(|z| c.base.point_at(z)).collect();
    let mut images = vec![f0];
    let mut displacement = Vec::new();
    for k in 0..effective_steps(c, cfg) {
        let prev = images.last().expect("nonempty");
        let next: Vec<Point> = prev.par_iter().map(|y| sigma_k(c, k, y)).collect();
        let disp = prev.iter().zip(&next).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        let bound = 10.0 * radius(k);
        if disp > bound * (1.0 + 1e-12) {
            return Err(TstError::DisplacementBound { layer: k, observed: disp, bound });
        }
        displacement.push(disp);
        images.push(next);
    }
    Ok(SurfaceIterate { d, pitch: cfg.pitch, side, coords, images, displacement })
}
