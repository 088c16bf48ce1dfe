//! Coherent collections of balls and planes: storage, validation and the ε profile.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubes::CubeTree;
use crate::error::{Result, TstError};
use crate::geometry::{build_index, dist, plane_local_distance, AffinePlane, Ball, Point};
use crate::stopping::StoppingTimeRegion;

pub const SCHEMA_VERSION: u32 = 1;

/// r_k = 10^{-k}.
pub fn radius(k: usize) -> f64 {
    10f64.powi(-(k as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcbpLayer {
    pub centers: Vec<Point>,
    pub planes: Vec<AffinePlane>,
}

type Tree = KdTree<f64, usize, Vec<f64>>;

#[derive(Serialize, Deserialize)]
pub struct Ccbp {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub base: AffinePlane,
    pub layers: Vec<CcbpLayer>,
    #[serde(skip)]
    index: OnceLock<Vec<Tree>>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Clone for Ccbp {
    fn clone(&self) -> Self {
        Self { schema_version: self.schema_version, base: self.base.clone(), layers: self.layers.clone(), index: OnceLock::new() }
    }
}

impl std::fmt::Debug for Ccbp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sizes: Vec<usize> = self.layers.iter().map(|l| l.centers.len()).collect();
        f.debug_struct("Ccbp").field("base", &self.base).field("layers", &sizes).finish()
    }
}

impl PartialEq for Ccbp {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.layers == other.layers
    }
}

impl Ccbp {
    /// Checks shapes only; see [`validate_ccbp`] for the coherence conditions.
    pub fn new(base: AffinePlane, layers: Vec<CcbpLayer>) -> Result<Self> {
        let c = Self { schema_version: SCHEMA_VERSION, base, layers, index: OnceLock::new() };
        c.check_shapes()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Ccbp = serde_json::from_str(s)?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(TstError::Format(format!("unsupported CCBP schema version {}", c.schema_version)));
        }
        c.check_shapes()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    fn check_shapes(&self) -> Result<()> {
        let (n, d) = (self.n(), self.d());
        for (k, l) in self.layers.iter().enumerate() {
            if l.centers.len() != l.planes.len() {
                return Err(TstError::InvalidInput(format!("layer {k}: {} centers but {} planes", l.centers.len(), l.planes.len())));
            }
            for (j, (x, p)) in l.centers.iter().zip(&l.planes).enumerate() {
                if x.len() != n || p.ambient() != n {
                    return Err(TstError::DimensionMismatch { expected: n, got: x.len().max(p.ambient()) });
                }
                if p.dim() != d {
                    return Err(TstError::InvalidInput(format!("plane ({k},{j}) has dimension {} not {d}", p.dim())));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(TstError::InvalidInput(format!("center ({k},{j}) is not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.base.ambient()
    }

    pub fn d(&self) -> usize {
        self.base.dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    fn trees(&self) -> &[Tree] {
        self.index.get_or_init(|| self.layers.iter().map(|l| build_index(self.n(), &l.centers)).collect())
    }

    /// Indices j of layer k with |y − x_{j,k}| < radius (or ≤ when `closed`), ascending.
    pub fn centers_near(&self, k: usize, y: &[f64], radius: f64, closed: bool) -> Vec<usize> {
        let Some(t) = self.trees().get(k) else {
            return Vec::new();
        };
        if t.size() == 0 {
            return Vec::new();
        }
        let layer = &self.layers[k];
        let mut v: Vec<usize> = t
            .within(y, radius * radius * (1.0 + 1e-12), &squared_euclidean)
            .expect("valid query")
            .into_iter()
            .map(|(_, &j)| j)
            .filter(|&j| {
                let dd = dist(y, &layer.centers[j]);
                if closed {
                    dd <= radius
                } else {
                    dd < radius
                }
            })
            .collect();
        v.sort_unstable();
        v
    }

    /// y ∈ V_k^λ.
    pub fn in_v(&self, k: usize, lambda: f64, y: &[f64]) -> bool {
        !self.centers_near(k, y, lambda * radius(k), true).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMaxima {
    /// max dist(x_{j,0}, P0).
    pub c2: f64,
    /// max d_{x_{j,k},100r_k}(P_{i,k}, P_{j,k}) over |x_i − x_j| ≤ 100 r_k.
    pub c3: f64,
    /// max d_{x_{j,0},100}(P_{j,0}, P0).
    pub c4: f64,
    /// max d_{x_{i,k},20r_k}(P_{i,k}, P_{j,k+1}) over |x_{i,k} − x_{j,k+1}| ≤ 2 r_k.
    pub c5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonProfile {
    /// ε_k(x_{j,k}) indexed [k][j].
    pub values: Vec<Vec<f64>>,
    pub max: f64,
    pub conditions: ConditionMaxima,
    pub eps: f64,
    /// max < ε and every condition maximum ≤ ε.
    pub valid: bool,
}

fn structural(condition: &str, indices: String) -> TstError {
    TstError::CcbpStructure { condition: condition.into(), indices }
}

/// Memo of d_{x_{i,l},10^4 r_l}(P_{j,k}, P_{i,l}) keyed by (k, j, l, i).
pub type PairCache = HashMap<(usize, usize, usize, usize), f64>;

/// sup of d_{x_{i,l},10^4 r_l}(P_{j,k}, P_{i,l}) over |l − k| ≤ 2 and pairs of balls λB_{j,k}, λB_{i,l}
/// both containing x. λ = 100 gives ε_k, λ = 10 gives ε'_k.
pub fn epsilon_at(c: &Ccbp, k: usize, x: &[f64], lambda: f64) -> f64 {
    epsilon_at_cached(c, k, x, lambda, &mut PairCache::new())
}

pub fn epsilon_at_cached(c: &Ccbp, k: usize, x: &[f64], lambda: f64, cache: &mut PairCache) -> f64 {
    let near_k = c.centers_near(k, x, lambda * radius(k), true);
    if near_k.is_empty() {
        return 0.0;
    }
    let mut sup = 0.0f64;
    let lo = k.saturating_sub(2);
    let hi = (k + 2).min(c.depth().saturating_sub(1));
    for l in lo..=hi {
        let rl = radius(l);
        for i in c.centers_near(l, x, lambda * rl, true) {
            for &j in &near_k {
                let v = *cache.entry((k, j, l, i)).or_insert_with(|| {
                    let ball = Ball { center: c.layers[l].centers[i].clone(), radius: 1e4 * rl };
                    plane_local_distance(&c.layers[k].planes[j], &c.layers[l].planes[i], &ball).expect("shapes checked")
                });
                sup = sup.max(v);
            }
        }
    }
    sup
}

/// Checks separation, layer descent and x_{j,k} ∈ P_{j,k} (structural, hard errors), then
/// measures the compatibility maxima and the ε profile.
pub fn validate_ccbp(c: &Ccbp, eps: f64) -> Result<EpsilonProfile> {
    c.check_shapes()?;
    for (k, layer) in c.layers.iter().enumerate() {
        let rk = radius(k);
        for (j, x) in layer.centers.iter().enumerate() {
            let off = layer.planes[j].dist(x);
            if off > 1e-9 * rk {
                return Err(structural("center on its plane", format!("({k},{j}): offset {off:e}")));
            }
            if let Some(&i) = c.centers_near(k, x, rk * (1.0 - 1e-12), false).iter().find(|&&i| i != j) {
                return Err(structural("separation", format!("({k},{i}) and ({k},{j})")));
            }
            if k > 0 && !c.in_v(k - 1, 2.0, x) {
                return Err(structural("x_{j,k} in V^2_{k-1}", format!("({k},{j})")));
            }
        }
    }

    let mut cond = ConditionMaxima { c2: 0.0, c3: 0.0, c4: 0.0, c5: 0.0 };
    if let Some(l0) = c.layers.first() {
        for (x, p) in l0.centers.iter().zip(&l0.planes) {
            cond.c2 = cond.c2.max(c.base.dist(x));
            let b = Ball { center: x.clone(), radius: 100.0 };
            cond.c4 = cond.c4.max(plane_local_distance(p, &c.base, &b)?);
        }
    }
    for (k, layer) in c.layers.iter().enumerate() {
        let rk = radius(k);
        for (j, x) in layer.centers.iter().enumerate() {
            let b = Ball { center: x.clone(), radius: 100.0 * rk };
            for i in c.centers_near(k, x, 100.0 * rk, true) {
                cond.c3 = cond.c3.max(plane_local_distance(&layer.planes[i], &layer.planes[j], &b)?);
            }
        }
        if k + 1 < c.depth() {
            for (i, x) in layer.centers.iter().enumerate() {
                let b = Ball { center: x.clone(), radius: 20.0 * rk };
                for j in c.centers_near(k + 1, x, 2.0 * rk, true) {
                    cond.c5 = cond.c5.max(plane_local_distance(&layer.planes[i], &c.layers[k + 1].planes[j], &b)?);
                }
            }
        }
    }

    let values: Vec<Vec<f64>> = (0..c.depth())
        .map(|k| c.layers[k].centers.par_iter().map(|x| epsilon_at(c, k, x, 100.0)).collect())
        .collect();
    let max = values.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let valid = max < eps && cond.c2 <= eps && cond.c3 <= eps && cond.c4 <= eps && cond.c5 <= eps;
    Ok(EpsilonProfile { values, max, conditions: cond, eps, valid })
}

/// s(k): the first level with 5ρ^s·scale0 ≤ r_k.
pub fn tree_level_for(tree: &CubeTree, k: usize) -> Option<usize> {
    (0..=tree.depth()).find(|&s| tree.side(s) <= radius(k))
}

#[derive(Debug, Clone)]
pub struct TreeCcbp {
    pub ccbp: Ccbp,
    /// Cube id behind each center, [k][j].
    pub cubes: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Layers are maximal r_k-separated subsets (greedy in cube-id order) of the centres of the
/// region's cubes at level s(k); planes are the witness planes moved through the centres.
pub fn ccbp_from_tree<F>(tree: &CubeTree, region: &StoppingTimeRegion, max_layers: usize, witness: F) -> Result<TreeCcbp>
where
    F: Fn(usize) -> Result<AffinePlane>,
{
    let mut planes: BTreeMap<usize, AffinePlane> = BTreeMap::new();
    let mut plane_of = |q: usize| -> Result<AffinePlane> {
        if let Some(p) = planes.get(&q) {
            return Ok(p.clone());
        }
        let p = witness(q)?;
        planes.insert(q, p.clone());
        Ok(p)
    };
    let base = plane_of(region.top)?;
    let top_level = tree.cubes[region.top].level;
    let mut layers = Vec::new();
    let mut cubes = Vec::new();
    let mut warnings = Vec::new();
    for k in 0..max_layers {
        let Some(s) = tree_level_for(tree, k) else {
            warnings.push(format!("layer {k}: tree has no level with ℓ ≤ r_k; stopping"));
            break;
        };
        let members: Vec<usize> = if s < top_level {
            vec![region.top]
        } else {
            region.members.iter().copied().filter(|&q| tree.cubes[q].level == s).collect()
        };
        let mut chosen: Vec<usize> = Vec::new();
        for q in members {
            let x = tree.center(q);
            if chosen.iter().all(|&o| dist(tree.center(o), x) >= radius(k)) {
                chosen.push(q);
            }
        }
        if chosen.is_empty() {
            warnings.push(format!("layer {k} is empty; stopping"));
            break;
        }
        let mut centers = Vec::with_capacity(chosen.len());
        let mut pl = Vec::with_capacity(chosen.len());
        for &q in &chosen {
            let x = tree.center(q).to_vec();
            pl.push(plane_of(q)?.through(&x));
            centers.push(x);
        }
        layers.push(CcbpLayer { centers, planes: pl });
        cubes.push(chosen);
    }
    Ok(TreeCcbp { ccbp: Ccbp::new(base, layers)?, cubes, warnings })
}

/// Rotation of the coordinate d-plane of R^n by angle `a` in the (e_0, e_d) plane.
fn tilted_frame(n: usize, d: usize, a: f64) -> Vec<Point> {
    (0..d)
        .map(|i| {
            let mut v = vec![0.0; n];
            if i == 0 {
                v[0] = a.cos();
                v[d] = a.sin();
            } else {
                v[i] = 1.0;
            }
            v
        })
        .collect()
}

/// Layers k = 0..layers, each the lattice {Σ m_i r_k f_i : |m_i| ≤ half_width} on one plane through
/// the origin tilted by (−1)^k·a/2 from P0 = R^d × {0}; consecutive layers differ by angle a.
pub fn tilt_chain(n: usize, d: usize, a: f64, layers: usize, half_width: usize) -> Result<Ccbp> {
    if d == 0 || d >= n {
        return Err(TstError::InvalidInput(format!("need 1 <= d < n, got d = {d}, n = {n}")));
    }
    let base = AffinePlane::coordinate(vec![0.0; n], d)?;
    let side = 2 * half_width + 1;
    let mut out = Vec::with_capacity(layers);
    for k in 0..layers {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let plane = AffinePlane::new(vec![0.0; n], tilted_frame(n, d, sign * a / 2.0))?;
        let rk = radius(k);
        let mut centers = Vec::new();
        for idx in 0..side.pow(d as u32) {
            let mut t = idx;
            let coords: Vec<f64> = (0..d)
                .map(|_| {
                    let m = (t % side) as f64 - half_width as f64;
                    t /= side;
                    m * rk
                })
                .collect();
            centers.push(plane.point_at(&coords));
        }
        let planes = centers.iter().map(|x| plane.through(x)).collect();
        out.push(CcbpLayer { centers, planes });
    }
    Ccbp::new(base, out)
}

/// All layers on P0 itself.
pub fn flat_ccbp(n: usize, d: usize, layers: usize, half_width: usize) -> Result<Ccbp> {
    tilt_chain(n, d, 0.0, layers, half_width)
}

/// A single layer-0 centre at the origin whose plane is tilted by `a`.
pub fn single_tilt(n: usize, d: usize, a: f64) -> Result<Ccbp> {
    let base = AffinePlane::coordinate(vec![0.0; n], d)?;
    let plane = AffinePlane::new(vec![0.0; n], tilted_frame(n, d, a))?;
    Ccbp::new(base, vec![CcbpLayer { centers: vec![vec![0.0; n]], planes: vec![plane] }])
}
