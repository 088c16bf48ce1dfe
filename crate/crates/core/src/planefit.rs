//! Derivative-free minimisation of plane-dependent objectives.
//!
//! Start from the PCA plane of the points, then run a compass search over translations along the
//! leading principal normals and rotations of each frame vector toward those normals (about the
//! base point and about base ± r/2·f_i). The step halves whenever a full sweep fails to improve.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::geometry::{dot, AffinePlane, Point, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_sweeps: usize,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_sweeps: 200, initial_step: 0.125, min_step: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct PcaFit {
    pub plane: AffinePlane,
    /// Principal directions after the frame, most significant first.
    pub normals: Vec<Point>,
    /// Affine rank of the point set.
    pub rank: usize,
}

/// Unweighted PCA plane through the centroid.
pub fn pca_plane(cloud: &PointCloud, idx: &[usize], d: usize) -> Option<PcaFit> {
    let n = cloud.dim();
    if idx.is_empty() || d == 0 || d >= n {
        return None;
    }
    let m = idx.len() as f64;
    let mut c = vec![0.0; n];
    for &i in idx {
        for (cj, xj) in c.iter_mut().zip(cloud.point(i)) {
            *cj += xj;
        }
    }
    c.iter_mut().for_each(|v| *v /= m);
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for &i in idx {
        let x = cloud.point(i);
        for a in 0..n {
            let da = x[a] - c[a];
            if da == 0.0 {
                continue;
            }
            for b in a..n {
                cov[(a, b)] += da * (x[b] - c[b]);
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let scale = idx.iter().map(|&i| crate::geometry::dist2(cloud.point(i), &c)).fold(0.0, f64::max);
    let rank = order.iter().filter(|&&k| eig.eigenvalues[k] > 1e-24 * scale.max(top).max(1e-300)).count();
    let vecs: Vec<Point> = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    let plane = AffinePlane::from_spanning(c, &vecs[..d]).ok()?;
    let normals = vecs[d..n.min(2 * d)].to_vec();
    Some(PcaFit { plane, normals, rank })
}

/// Rotate the plane by angle `a` in span(f, nu) about the pivot `q`.
fn rotate(plane: &AffinePlane, i: usize, nu: &[f64], a: f64, q: &[f64]) -> Option<(AffinePlane, Point)> {
    let f = &plane.frame()[i];
    let (s, c) = a.sin_cos();
    let rot = |v: &[f64]| -> Point {
        let vf = dot(v, f);
        let vn = dot(v, nu);
        v.iter()
            .zip(f.iter().zip(nu))
            .map(|(vi, (fi, ni))| vi + (c - 1.0) * (vf * fi + vn * ni) + s * (vf * ni - vn * fi))
            .collect()
    };
    let rel: Point = plane.base().iter().zip(q).map(|(b, qq)| b - qq).collect();
    let rr = rot(&rel);
    let base: Point = q.iter().zip(&rr).map(|(a, b)| a + b).collect();
    let frame: Vec<Point> = plane.frame().iter().map(|v| rot(v)).collect();
    let new_nu = rot(nu);
    let p = AffinePlane::from_spanning(base, &frame).ok()?;
    Some((p, new_nu))
}

/// Coarse starting planes through the projection of `anchor`: `init` with each frame vector turned
/// toward each normal by multiples of π/8, each shifted by 0 or ±r/2 along the turned normal.
/// Returned with matching normals.
pub fn plane_starts(init: &AffinePlane, normals: &[Point], r: f64, anchor: &[f64]) -> Vec<(AffinePlane, Vec<Point>)> {
    let centred = init.through(&init.project(anchor));
    let pivot = centred.base().to_vec();
    let mut turned = vec![(centred.clone(), normals.to_vec())];
    for (j, nu) in normals.iter().enumerate() {
        for i in 0..centred.dim() {
            for k in 1..8 {
                if let Some((p, new_nu)) = rotate(&centred, i, nu, k as f64 * std::f64::consts::PI / 8.0, &pivot) {
                    let mut ns = normals.to_vec();
                    ns[j] = new_nu;
                    turned.push((p, ns));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(turned.len() * (1 + 2 * normals.len()));
    for (p, ns) in turned {
        for nu in &ns {
            for off in [0.5, -0.5] {
                let base: Point = pivot.iter().zip(nu).map(|(b, v)| b + off * r * v).collect();
                out.push((p.through(&base), ns.clone()));
            }
        }
        out.push((p, ns));
    }
    out
}

#[derive(Debug, Clone)]
pub struct PlaneSearch {
    pub plane: AffinePlane,
    pub value: f64,
    pub evaluations: usize,
    pub sweeps: usize,
}

/// Compass search from `init`. `r` sets the translation unit; `anchor` is re-projected onto the
/// plane after each move to keep the base point near the region of interest.
pub fn refine_plane<F>(
    init: AffinePlane,
    normals: Vec<Point>,
    r: f64,
    anchor: &[f64],
    cfg: OptimizerConfig,
    objective: F,
) -> PlaneSearch
where
    F: Fn(&AffinePlane) -> f64,
{
    let mut plane = init.through(&init.project(anchor));
    let mut normals = normals;
    let mut best = objective(&plane);
    let mut evals = 1;
    let mut step = cfg.initial_step;
    let mut sweeps = 0;
    let d = plane.dim();
    while sweeps < cfg.max_sweeps && step >= cfg.min_step && best > 0.0 {
        sweeps += 1;
        let mut improved = false;
        for j in 0..normals.len() {
            // translations
            for sgn in [1.0, -1.0] {
                let base: Point =
                    plane.base().iter().zip(&normals[j]).map(|(b, nu)| b + sgn * step * r * nu).collect();
                let cand = plane.through(&base);
                let v = objective(&cand);
                evals += 1;
                if v < best {
                    best = v;
                    plane = cand;
                    improved = true;
                }
            }
            // rotations about three pivots
            for i in 0..d {
                for piv in [0.0, 0.5, -0.5] {
                    for sgn in [1.0, -1.0] {
                        let q: Point =
                            plane.base().iter().zip(&plane.frame()[i]).map(|(b, f)| b + piv * r * f).collect();
                        let Some((cand, nu)) = rotate(&plane, i, &normals[j], sgn * step, &q) else {
                            continue;
                        };
                        let v = objective(&cand);
                        evals += 1;
                        if v < best {
                            best = v;
                            plane = cand.through(&cand.project(anchor));
                            normals[j] = nu;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    PlaneSearch { plane, value: best, evaluations: evals, sweeps }
}
