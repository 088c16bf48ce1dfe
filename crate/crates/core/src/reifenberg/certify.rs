//! Measured constants for the properties of the limit surface, the local graph fit, and the
//! bi-Lipschitz certificate.

use std::fmt::Write as _;

use kdtree::distance::squared_euclidean;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ccbp::{epsilon_at_cached, radius, Ccbp, PairCache};
use super::iterate::SurfaceIterate;
use crate::beta::{bbeta, BetaConfig};
use crate::content::hausdorff_content;
use crate::error::{Result, TstError};
use crate::geometry::{build_index, dist, norm, Ball, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ceilings {
    pub item2: f64,
    /// Upper bound on the fitted τ.
    pub item3_tau: f64,
    pub item4: f64,
    pub item9: f64,
    pub item10: f64,
    pub item11: f64,
    /// Lower bound on min ℋ^d_∞(Σ ∩ B(x,r))/r^d.
    pub item13: f64,
}

impl Default for Ceilings {
    fn default() -> Self {
        Self { item2: 0.0, item3_tau: 0.5, item4: 20.0, item9: 20.0, item10: 20.0, item11: 20.0, item13: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub seed: u64,
    pub pairs: usize,
    /// Centres z sampled for the flatness and content items.
    pub samples: usize,
    pub radii: Vec<f64>,
    pub ceilings: Ceilings,
    pub beta: BetaConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            pairs: 2000,
            samples: 12,
            radii: vec![0.1, 0.25, 0.5, 0.9],
            ceilings: Ceilings::default(),
            beta: BetaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertItem {
    pub item: u32,
    pub name: String,
    /// Raw measured quantity.
    pub measured: f64,
    /// measured/ε for the ≲ ε items, measured otherwise.
    pub constant: f64,
    pub ceiling: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub eps: f64,
    pub steps: usize,
    pub items: Vec<CertItem>,
    pub tau: f64,
    /// sup |σ_k(y) − y|/r_k over Σ_k, per k.
    pub item10_per_layer: Vec<f64>,
    /// sup |σ_k(y) − π_{i,k}(y)|/(ε_k(y) r_k) over Σ_k ∩ V_k^8, per k.
    pub item11_per_layer: Vec<f64>,
    /// (t, d_{B(z,t)}(Σ, P)) for every sampled ball, raw.
    pub flatness: Vec<(f64, f64)>,
}

impl Certificate {
    pub fn item(&self, n: u32) -> Option<&CertItem> {
        self.items.iter().find(|i| i.item == n)
    }

    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }
}

/// Lattice pairs with separation spread log-uniformly over [h, 1].
fn sample_pairs(s: &SurfaceIterate, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = s.side as i64;
    let mut out = Vec::with_capacity(count);
    let max_steps = ((1.0 / s.pitch).round() as i64).max(1);
    let mut tries = 0;
    while out.len() < count && tries < 20 * count {
        tries += 1;
        let i = rng.random_range(0..s.len());
        let len = (max_steps as f64).powf(rng.random_range(0.0..1.0f64)).round() as i64;
        let mut dir: Vec<f64> = (0..s.d).map(|_| rng.random_range(-1.0..1.0f64)).collect();
        let nd = norm(&dir);
        if nd == 0.0 {
            continue;
        }
        dir.iter_mut().for_each(|v| *v *= len as f64 / nd);
        let mut t = i as i64;
        let mut j = 0i64;
        let mut mult = 1i64;
        let mut ok = true;
        for v in &dir {
            let c = t % side + v.round() as i64;
            t /= side;
            if !(0..side).contains(&c) {
                ok = false;
                break;
            }
            j += c * mult;
            mult *= side;
        }
        let j = j as usize;
        if !ok || j == i || dist(&s.coords[i], &s.coords[j]) > 1.0 + 1e-12 {
            continue;
        }
        out.push((i, j));
    }
    out
}

/// Lattice indices whose frame coordinates all lie within `inner` of the origin.
fn interior(s: &SurfaceIterate, inner: f64) -> Vec<usize> {
    (0..s.len()).filter(|&i| s.coords[i].iter().all(|v| v.abs() <= inner)).collect()
}

pub fn certify(s: &SurfaceIterate, c: &Ccbp, eps: f64, cfg: &CertifyConfig) -> Result<Certificate> {
    if !(eps > 0.0) {
        return Err(TstError::InvalidInput("ε must be positive".into()));
    }
    let ceil = &cfg.ceilings;
    let f0 = &s.images[0];
    let fk = s.surface();
    let mut items = Vec::new();
    let mut push = |item: u32, name: &str, measured: f64, constant: f64, ceiling: f64, pass: bool| {
        items.push(CertItem { item, name: name.into(), measured, constant, ceiling, pass });
    };

    // identity far from the layer-0 centres
    let far = c.layers.first().map(|l| l.centers.clone()).unwrap_or_default();
    let m2 = (0..s.len())
        .filter(|&i| far.iter().all(|x| dist(x, &f0[i]) > 10.0))
        .map(|i| dist(&fk[i], &f0[i]))
        .fold(0.0, f64::max);
    push(2, "fixed beyond 10 r_0 of the layer-0 centres", m2, m2, ceil.item2, m2 <= ceil.item2);

    // bi-Hölder exponent
    let pairs = sample_pairs(s, cfg.pairs, cfg.seed);
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(i, j)| (dist(&f0[i], &f0[j]), dist(&fk[i], &fk[j])))
        .filter(|&(a, b)| a > 0.0 && b > 0.0)
        .collect();
    let (slope, _) = log_log_fit(&pts);
    let tau = (slope - 1.0).abs();
    let holds = pts.iter().all(|&(a, b)| 0.25 * a.powf(1.0 + tau) <= b && b <= 10.0 * a.powf(1.0 - tau));
    push(3, "bi-Hölder exponent τ", tau, tau, ceil.item3_tau, tau <= ceil.item3_tau && holds);

    // distance from the identity
    let m4 = (0..s.len()).map(|i| dist(&fk[i], &f0[i])).fold(0.0, f64::max);
    push(4, "sup |f − id|", m4, m4 / eps, ceil.item4, m4 / eps <= ceil.item4);

    // flatness of Σ in sampled balls
    let sigma = PointCloud::from_points(fk)?;
    let extent = s.coords.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    let rmax = cfg.radii.iter().copied().fold(0.0, f64::max);
    let inner_idx = interior(s, (extent - rmax - 0.5).max(0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    // the lattice origin first, where every layer acts
    let mut centres = vec![s.len() / 2];
    if !inner_idx.is_empty() {
        centres.extend((1..cfg.samples).map(|_| inner_idx[rng.random_range(0..inner_idx.len())]));
    }
    let jobs: Vec<(usize, f64)> = centres.iter().flat_map(|&z| cfg.radii.iter().map(move |&t| (z, t))).collect();
    let flatness: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(z, t)| {
            let ball = Ball { center: fk[z].clone(), radius: t };
            bbeta(&sigma, &ball, s.d, &cfg.beta).map(|b| (t, b.value))
        })
        .collect::<Result<_>>()?;
    let m9 = flatness.iter().map(|f| f.1).fold(0.0, f64::max);
    push(9, "Reifenberg flatness of Σ", m9, m9 / eps, ceil.item9, m9 / eps <= ceil.item9);

    // per-step displacement
    let item10_per_layer: Vec<f64> = s.displacement.iter().enumerate().map(|(k, d)| d / radius(k)).collect();
    let m10 = item10_per_layer.iter().copied().fold(0.0, f64::max);
    push(10, "sup |σ_k(y) − y|/r_k", m10, m10 / eps, ceil.item10, m10 / eps <= ceil.item10);

    // σ_k against the local projections
    let item11_per_layer: Vec<f64> = (0..s.steps())
        .map(|k| {
            let rk = radius(k);
            s.images[k]
                .par_iter()
                .zip(&s.images[k + 1])
                .map_init(PairCache::new, |cache, (y, sy)| {
                    let near = c.centers_near(k, y, 10.0 * rk, false);
                    if !c.in_v(k, 8.0, y) {
                        return None;
                    }
                    let i = *near.iter().min_by(|&&a, &&b| {
                        dist(y, &c.layers[k].centers[a]).total_cmp(&dist(y, &c.layers[k].centers[b]))
                    })?;
                    let num = dist(sy, &c.layers[k].planes[i].project(y));
                    let e = epsilon_at_cached(c, k, y, 100.0, cache);
                    if num <= 1e-12 * rk {
                        Some(0.0)
                    } else if e == 0.0 {
                        Some(f64::INFINITY)
                    } else {
                        Some(num / (e * rk))
                    }
                })
                .flatten()
                .reduce(|| 0.0, f64::max)
        })
        .collect();
    let m11 = item11_per_layer.iter().copied().fold(0.0, f64::max);
    push(11, "sup |σ_k(y) − π_{i,k}(y)|/(ε_k(y) r_k)", m11, m11, ceil.item11, m11 <= ceil.item11);

    // lower content density
    let lower: Vec<f64> = jobs
        .par_iter()
        .map(|&(z, t)| {
            let ball = Ball { center: fk[z].clone(), radius: t };
            hausdorff_content(&sigma, s.d as f64, &ball).map(|e| e.value / t.powi(s.d as i32))
        })
        .collect::<Result<_>>()?;
    let m13 = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let m13 = if m13.is_finite() { m13 } else { 0.0 };
    push(13, "min ℋ^d_∞(Σ ∩ B(x,r))/r^d", m13, m13, ceil.item13, jobs.is_empty() || m13 >= ceil.item13);

    Ok(Certificate { eps, steps: s.steps(), items, tau, item10_per_layer, item11_per_layer, flatness })
}

/// Least-squares slope and intercept of log b against log a.
fn log_log_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 2 {
        return (1.0, 0.0);
    }
    let m = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (1.0, my - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFit {
    pub layer: usize,
    pub index: usize,
    /// |A(x_{j,k})| from the sample nearest to the centre.
    pub a_center: f64,
    /// Largest |ΔA|/|Δz| over tangential neighbours at separation in [h/2, 3h].
    pub lipschitz: f64,
    /// Largest normal gap between samples within h tangentially.
    pub residual: f64,
    pub floor: f64,
    pub samples: usize,
}

/// Reads Σ_k ∩ D(x_{j,k}, P_{j,k}, 49 r_k) as a graph over P_{j,k}. Two samples within one lattice
/// pitch tangentially whose normal parts differ by more than `gap_factor`·h mean Σ_k folds.
pub fn local_graph_fit(s: &SurfaceIterate, c: &Ccbp, k: usize, j: usize, gap_factor: f64) -> Result<GraphFit> {
    if k > s.steps() || k >= c.depth() || j >= c.layers[k].centers.len() {
        return Err(TstError::InvalidInput(format!("no Σ_k sample or centre for ({k},{j})")));
    }
    let plane = &c.layers[k].planes[j];
    let x = &c.layers[k].centers[j];
    let r = 49.0 * radius(k);
    let zx = plane.coords(x);
    let mut zs: Vec<Vec<f64>> = Vec::new();
    let mut ws: Vec<Vec<f64>> = Vec::new();
    for y in &s.images[k] {
        let z: Vec<f64> = plane.coords(y).iter().zip(&zx).map(|(a, b)| a - b).collect();
        let w = plane.normal_component(y);
        if norm(&z) < r && norm(&w) < r {
            zs.push(z);
            ws.push(w);
        }
    }
    let h = s.pitch;
    let floor = gap_factor * h;
    if zs.is_empty() {
        return Ok(GraphFit { layer: k, index: j, a_center: 0.0, lipschitz: 0.0, residual: 0.0, floor, samples: 0 });
    }
    let tree = build_index(s.d, &zs);
    let (residual, lipschitz) = (0..zs.len())
        .into_par_iter()
        .map(|a| {
            let mut gap = 0.0f64;
            let mut lip = 0.0f64;
            for (d2, &b) in tree.within(&zs[a], 9.0 * h * h, &squared_euclidean).expect("valid query") {
                if b == a {
                    continue;
                }
                let dz = d2.sqrt();
                let dw = dist(&ws[a], &ws[b]);
                if dz <= h {
                    gap = gap.max(dw);
                }
                if dz >= 0.5 * h {
                    lip = lip.max(dw / dz);
                }
            }
            (gap, lip)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    if residual > floor {
        return Err(TstError::NotAGraph { layer: k, index: j, gap: residual, floor });
    }
    let near = tree.nearest(&vec![0.0; s.d], 1, &squared_euclidean).expect("valid query");
    let a_center = norm(&ws[*near[0].1]);
    Ok(GraphFit { layer: k, index: j, a_center, lipschitz, residual, floor, samples: zs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilipCertificate {
    /// sup_z Σ_k ε'_k(f_k(z))².
    pub m: f64,
    /// max |f(x) − f(y)|/|x − y| over the sampled pairs.
    pub upper: f64,
    /// max |x − y|/|f(x) − f(y)|.
    pub lower: f64,
    /// max(upper, lower).
    pub distortion: f64,
}

pub fn bilip_certificate(s: &SurfaceIterate, c: &Ccbp, pairs: usize, seed: u64) -> BilipCertificate {
    let m = (0..s.len())
        .into_par_iter()
        .map_init(PairCache::new, |cache, z| {
            (0..s.steps()).map(|k| epsilon_at_cached(c, k, &s.images[k][z], 10.0, cache).powi(2)).sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    let f0 = &s.images[0];
    let fk = s.surface();
    let mut upper = 1.0f64;
    let mut lower = 1.0f64;
    for (i, j) in sample_pairs(s, pairs, seed) {
        let a = dist(&f0[i], &f0[j]);
        let b = dist(&fk[i], &fk[j]);
        if a > 0.0 {
            upper = upper.max(b / a);
            lower = lower.max(if b > 0.0 { a / b } else { f64::INFINITY });
        }
    }
    BilipCertificate { m, upper, lower, distortion: upper.max(lower) }
}

/// Triangulated OFF mesh of f_k for d = 2, n = 3.
pub fn write_off(s: &SurfaceIterate, k: usize) -> Result<String> {
    if s.d != 2 {
        return Err(TstError::InvalidInput(format!("OFF export needs d = 2, got {}", s.d)));
    }
    let img = s.images.get(k).ok_or_else(|| TstError::InvalidInput(format!("no iterate {k}")))?;
    if img.first().is_some_and(|p| p.len() != 3) {
        return Err(TstError::InvalidInput("OFF export needs ambient dimension 3".into()));
    }
    let side = s.side;
    let faces = 2 * (side - 1) * (side - 1);
    let mut out = String::new();
    writeln!(out, "OFF").unwrap();
    writeln!(out, "{} {} 0", img.len(), faces).unwrap();
    for p in img {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
    }
    for b in 0..side - 1 {
        for a in 0..side - 1 {
            let v = a + side * b;
            writeln!(out, "3 {} {} {}", v, v + 1, v + side + 1).unwrap();
            writeln!(out, "3 {} {} {}", v, v + side + 1, v + side).unwrap();
        }
    }
    Ok(out)
}
