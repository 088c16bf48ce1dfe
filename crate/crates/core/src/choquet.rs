//! Choquet integrals against the content estimate, with the layer-cake convention
//! ∫ f^p := ∫ ℋ({f > t}) t^{p-1} dt (no factor p).

use serde::{Deserialize, Serialize};

use crate::content::{ContentAccumulator, ContentHierarchy};
use crate::error::{Result, TstError};
use crate::geometry::{Ball, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ChoquetRange {
    /// t over [0, ∞).
    #[default]
    Full,
    /// t over [0, 1]; values are clipped at 1.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoquetConfig {
    pub p: f64,
    pub range: ChoquetRange,
}

impl Default for ChoquetConfig {
    fn default() -> Self {
        Self { p: 1.0, range: ChoquetRange::Full }
    }
}

/// Critical exponent p(d) = 2d/(d-2) for d > 2, ∞ otherwise.
pub fn critical_exponent(d: f64) -> f64 {
    if d > 2.0 {
        2.0 * d / (d - 2.0)
    } else {
        f64::INFINITY
    }
}

/// Exact piecewise evaluation on the points `idx` with values `vals`.
pub fn choquet_on(cloud: &PointCloud, idx: &[usize], vals: &[f64], d: f64, cfg: ChoquetConfig) -> Result<f64> {
    if idx.len() != vals.len() {
        return Err(TstError::InvalidInput("index and value lists differ in length".into()));
    }
    if !(cfg.p >= 1.0) {
        return Err(TstError::InvalidInput(format!("p must be >= 1, got {}", cfg.p)));
    }
    if let Some(v) = vals.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(TstError::InvalidInput(format!("Choquet integrand must be finite and nonnegative, got {v}")));
    }
    let h = ContentHierarchy::of(cloud);
    let mut acc = ContentAccumulator::new(&h, cloud, d);
    Ok(choquet_with(&mut acc, idx, vals, cfg))
}

/// Same as [`choquet_on`] on a fresh accumulator, skipping validation.
pub(crate) fn choquet_with(acc: &mut ContentAccumulator<'_>, idx: &[usize], vals: &[f64], cfg: ChoquetConfig) -> f64 {
    let clip = |v: f64| match cfg.range {
        ChoquetRange::Full => v,
        ChoquetRange::Unit => v.min(1.0),
    };
    let mut order: Vec<usize> = (0..idx.len()).collect();
    order.sort_by(|&a, &b| clip(vals[b]).total_cmp(&clip(vals[a])).then(idx[a].cmp(&idx[b])));
    let p = cfg.p;
    let pw = |v: f64| if p == 1.0 { v } else { v.powf(p) };
    let mut total = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = clip(vals[order[i]]);
        if v <= 0.0 {
            break;
        }
        while i < order.len() && clip(vals[order[i]]) == v {
            acc.insert(idx[order[i]]);
            i += 1;
        }
        let next = if i < order.len() { clip(vals[order[i]]).max(0.0) } else { 0.0 };
        total += acc.value() * (pw(v) - pw(next)) / p;
    }
    total
}

/// ∫_{E∩B} f^p dℋ^d_∞ for f given as a function of the point.
pub fn choquet_integral<F>(cloud: &PointCloud, ball: &Ball, d: f64, cfg: ChoquetConfig, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let idx = cloud.indices_in_ball(ball);
    let vals: Vec<f64> = idx.iter().map(|&i| f(cloud.point(i))).collect();
    choquet_on(cloud, &idx, &vals, d, cfg)
}
