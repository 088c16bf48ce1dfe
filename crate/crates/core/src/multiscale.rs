//! Cube-indexed β tables, BWGL classification, the TST aggregate, and two geometric checks
//! (disjoint-ball packing near a plane, angle control between witness planes).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{bbeta, beta_dp, BetaConfig, BetaValue};
use crate::choquet::critical_exponent;
use crate::cubes::CubeTree;
use crate::error::{Result, TstError};
use crate::geometry::{dist, plane_angle, AffinePlane, Ball};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TstParams {
    pub d: usize,
    pub p: f64,
    /// Ball enlargement C0 for the β^{d,p} terms.
    pub c0: f64,
    /// Ball enlargement A for the bilateral test.
    pub a: f64,
    pub eps: f64,
    /// Number of levels below Q0 that enter the sums.
    pub depth: usize,
}

impl Default for TstParams {
    fn default() -> Self {
        Self { d: 1, p: 1.0, c0: 2.0, a: 3.0, eps: 0.05, depth: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeBeta {
    pub id: usize,
    pub level: usize,
    pub ell: f64,
    /// β^{d,p}(C0·B_Q).
    pub beta: f64,
    /// bβ(A·B_Q).
    pub bbeta: f64,
    pub bwgl: bool,
    /// β² ℓ(Q)^d.
    pub term: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TstReport {
    pub root: usize,
    pub root_level: usize,
    /// Finest level entering the sums, relative to the root.
    pub depth: usize,
    pub params: TstParams,
    pub ell_root_d: f64,
    pub beta_sum: f64,
    /// ℓ(Q0)^d + Σ β²ℓ^d.
    pub tst_sum: f64,
    /// Σ over the cubes of the finest level below Q0 of ℓ^d.
    pub measure_estimate: f64,
    pub bwgl_sum: f64,
    pub bwgl_count: usize,
    /// Partial tst sums including levels 0..=j below the root.
    pub partial_tst: Vec<f64>,
    pub partial_bwgl: Vec<f64>,
    /// Sorted by cube id.
    pub cubes: Vec<CubeBeta>,
}

impl TstReport {
    /// (ℓ(Q0)^d + Σβ²ℓ^d + BWGL) / (ℋ^d proxy + BWGL).
    pub fn two_sided_ratio(&self) -> f64 {
        (self.tst_sum + self.bwgl_sum) / (self.measure_estimate + self.bwgl_sum)
    }
}

/// bβ(A·B_Q) ≥ ε.
pub fn bwgl_classify(tree: &CubeTree, q: usize, a: f64, eps: f64, d: usize, cfg: &BetaConfig) -> Result<bool> {
    let ball = tree.ball(q).scaled(a);
    Ok(bbeta(tree.cloud(), &ball, d, cfg)?.value >= eps)
}

/// Cubes of `q` and its descendants down to `depth` levels below it, sorted by id.
pub fn subtree(tree: &CubeTree, q: usize, depth: usize) -> Vec<usize> {
    let top = tree.cubes[q].level;
    let mut out = vec![q];
    let mut frontier = vec![q];
    while let Some(c) = frontier.pop() {
        if tree.cubes[c].level >= top + depth {
            continue;
        }
        for &ch in &tree.cubes[c].children {
            out.push(ch);
            frontier.push(ch);
        }
    }
    out.sort_unstable();
    out
}

pub fn cube_beta(tree: &CubeTree, q: usize, params: &TstParams, cfg: &BetaConfig) -> Result<CubeBeta> {
    let cube = &tree.cubes[q];
    let ell = tree.ell(q);
    let bq = tree.ball(q);
    let b = beta_dp(tree.cloud(), &bq.scaled(params.c0), params.d, params.p, None, cfg)?;
    let bb = bbeta(tree.cloud(), &bq.scaled(params.a), params.d, cfg)?;
    let ld = ell.powi(params.d as i32);
    Ok(CubeBeta {
        id: q,
        level: cube.level,
        ell,
        beta: b.value,
        bbeta: bb.value,
        bwgl: bb.value >= params.eps,
        term: b.value * b.value * ld,
        degenerate: b.degenerate,
    })
}

pub fn tst_report(tree: &CubeTree, q0: usize, params: &TstParams, cfg: &BetaConfig) -> Result<TstReport> {
    if q0 >= tree.cubes.len() {
        return Err(TstError::InvalidInput(format!("cube {q0} not in tree")));
    }
    if !(params.p >= 1.0 && params.p < critical_exponent(params.d as f64)) {
        return Err(TstError::InvalidInput(format!("p = {} outside [1, p(d))", params.p)));
    }
    let root_level = tree.cubes[q0].level;
    let depth = params.depth.min(tree.depth() - root_level);
    let ids = subtree(tree, q0, depth);
    let cubes: Vec<CubeBeta> = ids.par_iter().map(|&q| cube_beta(tree, q, params, cfg)).collect::<Result<_>>()?;

    Ok(aggregate(q0, root_level, depth, *params, tree.ell(q0).powi(params.d as i32), cubes))
}

fn aggregate(root: usize, root_level: usize, depth: usize, params: TstParams, ell_root_d: f64, cubes: Vec<CubeBeta>) -> TstReport {
    let dd = params.d as i32;
    let mut partial_tst = vec![0.0; depth + 1];
    let mut partial_bwgl = vec![0.0; depth + 1];
    for c in &cubes {
        let rel = c.level - root_level;
        partial_tst[rel] += c.term;
        if c.bwgl {
            partial_bwgl[rel] += c.ell.powi(dd);
        }
    }
    let mut acc_t = ell_root_d;
    let mut acc_b = 0.0;
    for j in 0..=depth {
        acc_t += partial_tst[j];
        acc_b += partial_bwgl[j];
        partial_tst[j] = acc_t;
        partial_bwgl[j] = acc_b;
    }
    let beta_sum = acc_t - ell_root_d;
    let measure_estimate = cubes
        .iter()
        .filter(|c| c.level == root_level + depth)
        .map(|c| c.ell.powi(dd))
        .sum();
    TstReport {
        root,
        root_level,
        depth,
        params,
        ell_root_d,
        beta_sum,
        tst_sum: acc_t,
        measure_estimate,
        bwgl_sum: acc_b,
        bwgl_count: cubes.iter().filter(|c| c.bwgl).count(),
        partial_tst,
        partial_bwgl,
        cubes,
    }
}

impl TstReport {
    /// The report the same tree would give with `depth` levels (no-op when `depth` is not smaller).
    /// Every per-cube value depends only on its cube, so this equals a fresh run.
    pub fn truncated(&self, depth: usize) -> TstReport {
        if depth >= self.depth {
            return self.clone();
        }
        let cubes = self.cubes.iter().filter(|c| c.level <= self.root_level + depth).cloned().collect();
        let params = TstParams { depth, ..self.params };
        aggregate(self.root, self.root_level, depth, params, self.ell_root_d, cubes)
    }
}

/// Geometric growth rate of the level increments of a partial-sum series: exp of the
/// least-squares slope of log(S_j − S_{j−1}) against j. Non-positive increments are skipped;
/// `None` when fewer than two remain.
pub fn increment_growth_rate(partial: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = partial
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(j, w)| ((j + 1) as f64, (w[1] - w[0]).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some((sxy / sxx).exp())
}

/// Σ r_i^d / R^d for disjoint balls inside `outer` whose centres lie within r_i/2 of `plane`.
pub fn env_packing_check(balls: &[Ball], plane: &AffinePlane, outer: &Ball, d: usize) -> Result<f64> {
    let slack = 1e-12 * outer.radius;
    for (i, b) in balls.iter().enumerate() {
        if b.dim() != outer.dim() || plane.ambient() != outer.dim() {
            return Err(TstError::DimensionMismatch { expected: outer.dim(), got: b.dim() });
        }
        if dist(&b.center, &outer.center) + b.radius > outer.radius + slack {
            return Err(TstError::Precondition(format!("ball {i} is not contained in the outer ball")));
        }
        if !(plane.dist(&b.center) < b.radius / 2.0) {
            return Err(TstError::Precondition(format!("ball {i} is not centred within r/2 of the plane")));
        }
        for (j, c) in balls.iter().enumerate().take(i) {
            if dist(&b.center, &c.center) < b.radius + c.radius - slack {
                return Err(TstError::Precondition(format!("balls {j} and {i} overlap")));
            }
        }
    }
    let s: f64 = balls.iter().map(|b| b.radius.powi(d as i32)).sum();
    Ok(s / outer.radius.powi(d as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleControl {
    pub angle: f64,
    /// Largest β^{d,1}(M·B_T) over the cubes T ⊆ Q0 containing Q or R.
    pub sup_beta: f64,
    pub dist: f64,
}

/// Angle between the witness planes of `q` and `r`. Returns `None` when the separation condition
/// fails or some ancestor has β ≥ ε. `witness` maps cube ids to β^{d,1}(M·B_T) with its plane.
pub fn angle_control_check(
    tree: &CubeTree,
    q0: usize,
    q: usize,
    r: usize,
    lambda: f64,
    eps: f64,
    witness: &BTreeMap<usize, BetaValue>,
) -> Result<Option<AngleControl>> {
    let (lq, lr) = (tree.ell(q), tree.ell(r));
    let dqr = tree.dist_cubes(q, r);
    if !(dqr <= lambda * lq.max(lr) && lambda * lq.max(lr) <= lambda * lambda * lq.min(lr)) {
        return Ok(None);
    }
    let mut chain = Vec::new();
    for start in [q, r] {
        let mut t = Some(start);
        while let Some(c) = t {
            chain.push(c);
            if c == q0 {
                break;
            }
            t = tree.cubes[c].parent;
        }
        if t.is_none() {
            return Err(TstError::InvalidInput(format!("cube {start} is not below {q0}")));
        }
    }
    let mut sup = 0.0f64;
    for c in chain {
        let w = witness
            .get(&c)
            .ok_or_else(|| TstError::InvalidInput(format!("no witness plane for cube {c}")))?;
        sup = sup.max(w.value);
    }
    if sup >= eps {
        return Ok(None);
    }
    let angle = plane_angle(&witness[&q].plane, &witness[&r].plane)?;
    Ok(Some(AngleControl { angle, sup_beta: sup, dist: dqr }))
}
