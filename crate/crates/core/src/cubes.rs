//! Dyadic cubes over nested nets.
//!
//! Every net point that first appears at level m gets a parent in X_{m-1}, and every cloud point
//! gets a leaf in the finest net; the cube Q_k(x) is the set of points whose leaf has x as its
//! level-k ancestor. Parents and leaves are the nearest admissible choice, where admissibility
//! encodes the inner-ball requirement: if the component of p in the graph linking each point of a
//! core B(y, c0·ℓ_j), j > k, to y meets the level-k core of x, then p must end up in Q_k(x).
//! Points sharing such a component carry identical constraints, so an admissible choice always
//! exists. The outer-ball clause is verified afterwards.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TstError};
use crate::geometry::{dist, dist2, insertion_order, Point, PointCloud};
use crate::nets::NetHierarchy;

pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_C0: f64 = 1.0 / 30.0;
const NEIGHBOURS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub id: usize,
    pub level: usize,
    /// Cloud index of the net point x_Q.
    pub center: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Ascending cloud indices.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CubeTree {
    pub nets: NetHierarchy,
    pub c0: f64,
    pub cubes: Vec<Cube>,
    /// Cube ids per level.
    pub levels: Vec<Vec<usize>>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

impl CubeTree {
    pub fn build(nets: NetHierarchy, c0: f64) -> Result<Self> {
        let rho = nets.rho;
        if !(c0 > 0.0) || 5.0 * c0 >= 0.5 {
            return Err(TstError::InvalidInput(format!(
                "c0 = {c0} violates 0 < 5·c0 < 1/2 (cores of one level must stay disjoint)"
            )));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(TstError::InvalidInput(format!("rho must lie in (0,1), got {rho}")));
        }
        let cloud = nets.cloud.clone();
        let npts = cloud.len();
        let kmax = nets.k_max();
        let n = cloud.dim();
        let first_level = {
            let mut f = vec![usize::MAX; npts];
            for k in (0..=kmax).rev() {
                for &x in &nets.levels[k] {
                    f[x] = k;
                }
            }
            f
        };

        // forced[j][p]: the level-j net point whose core meets the component of p
        let mut forced: Vec<Vec<Option<usize>>> = vec![Vec::new(); kmax + 1];
        let mut uf = UnionFind::new(npts);
        for j in (0..=kmax).rev() {
            let core_r = c0 * 5.0 * nets.scale(j);
            let mut cores: Vec<(usize, Vec<usize>)> = Vec::with_capacity(nets.levels[j].len());
            for &x in &nets.levels[j] {
                let ball = crate::geometry::Ball { center: cloud.point(x).to_vec(), radius: core_r };
                cores.push((x, cloud.indices_in_ball(&ball)));
            }
            let mut by_root: Vec<Option<usize>> = vec![None; npts];
            for (x, pts) in &cores {
                for &p in pts {
                    let r = uf.find(p);
                    match by_root[r] {
                        None => by_root[r] = Some(*x),
                        Some(y) if y != *x => {
                            return Err(TstError::CubeInvariant {
                                clause: "construction".into(),
                                detail: format!("level {j}: one core component meets the cores of {y} and {x}"),
                            })
                        }
                        _ => {}
                    }
                }
            }
            forced[j] = (0..npts).map(|p| by_root[uf.find(p)]).collect();
            for (x, pts) in &cores {
                for &p in pts {
                    uf.union(p, *x);
                }
            }
        }

        // anc[j][x] for net points x with first_level <= ... ; usize::MAX elsewhere
        let mut anc: Vec<Vec<usize>> = vec![vec![usize::MAX; npts]; kmax + 1];
        let admissible = |anc: &Vec<Vec<usize>>, p: usize, cand: usize, upto: usize| -> bool {
            (0..upto).all(|j| forced[j][p].map_or(true, |x| anc[j][cand] == x))
        };
        let fallback = |p: usize, upto: usize| -> usize {
            (0..upto).rev().find_map(|j| forced[j][p]).expect("constrained point")
        };
        for k in 0..=kmax {
            let level = &nets.levels[k];
            let mut tree: KdTree<f64, usize, Vec<f64>> = KdTree::with_capacity(n, 16);
            if k > 0 {
                let prev = &nets.levels[k - 1];
                for r in insertion_order(prev.len()) {
                    tree.add(cloud.point(prev[r]).to_vec(), prev[r]).expect("finite");
                }
            }
            for &x in level {
                if first_level[x] == k && k > 0 {
                    let near = tree
                        .nearest(cloud.point(x), NEIGHBOURS.min(nets.levels[k - 1].len()), &squared_euclidean)
                        .expect("valid query");
                    let parent = near
                        .iter()
                        .map(|(_, &c)| c)
                        .find(|&c| admissible(&anc, x, c, k))
                        .unwrap_or_else(|| fallback(x, k));
                    for j in 0..k {
                        anc[j][x] = anc[j][parent];
                    }
                }
                anc[k][x] = x;
            }
            if k > 0 {
                // net points carried over from the previous level keep their chain
                for &x in &nets.levels[k - 1] {
                    anc[k][x] = x;
                }
            }
        }
        for k in 0..=kmax {
            for &x in &nets.levels[k] {
                for j in k..=kmax {
                    anc[j][x] = x;
                }
            }
        }

        // leaves
        let finest = &nets.levels[kmax];
        let mut ftree: KdTree<f64, usize, Vec<f64>> = KdTree::with_capacity(n, 16);
        for r in insertion_order(finest.len()) {
            ftree.add(cloud.point(finest[r]).to_vec(), finest[r]).expect("finite");
        }
        let leaf: Vec<usize> = (0..npts)
            .map(|p| {
                if first_level[p] != usize::MAX {
                    return p;
                }
                let near = ftree
                    .nearest(cloud.point(p), NEIGHBOURS.min(finest.len()), &squared_euclidean)
                    .expect("valid query");
                near.iter()
                    .map(|(_, &c)| c)
                    .find(|&c| admissible(&anc, p, c, kmax + 1))
                    .unwrap_or_else(|| fallback(p, kmax + 1))
            })
            .collect();

        // built[k]: (center, child indices into built[k+1], members)
        let mut built: Vec<Vec<(usize, Vec<usize>, Vec<usize>)>> = Vec::with_capacity(kmax + 1);
        for k in 0..=kmax {
            let rank: BTreeMap<usize, usize> = nets.levels[k].iter().enumerate().map(|(r, &x)| (x, r)).collect();
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); nets.levels[k].len()];
            for p in 0..npts {
                members[rank[&anc[k][leaf[p]]]].push(p);
            }
            built.push(nets.levels[k].iter().zip(members).map(|(&x, m)| (x, Vec::new(), m)).collect());
        }
        for k in 0..kmax {
            let rank: BTreeMap<usize, usize> = nets.levels[k].iter().enumerate().map(|(r, &x)| (x, r)).collect();
            for (ci, &y) in nets.levels[k + 1].iter().enumerate() {
                let pr = rank[&anc[k][y]];
                built[k][pr].1.push(ci);
            }
        }

        // number cubes top-down, children in net-rank order
        let mut cubes: Vec<Cube> = Vec::new();
        let mut levels: Vec<Vec<usize>> = vec![Vec::new(); kmax + 1];
        let mut frontier: Vec<(usize, Option<usize>)> = (0..built[0].len()).map(|i| (i, None)).collect();
        for k in 0..=kmax {
            let mut next = Vec::new();
            let ranks: BTreeMap<usize, usize> = if k < kmax {
                nets.levels[k + 1].iter().enumerate().map(|(r, &x)| (x, r)).collect()
            } else {
                BTreeMap::new()
            };
            for (bi, parent) in frontier {
                let (center, kids, members) = &built[k][bi];
                let id = cubes.len();
                cubes.push(Cube { id, level: k, center: *center, parent, children: Vec::new(), members: members.clone() });
                if let Some(p) = parent {
                    cubes[p].children.push(id);
                }
                levels[k].push(id);
                if k < kmax {
                    let mut kids = kids.clone();
                    kids.sort_by_key(|&c| ranks[&built[k + 1][c].0]);
                    next.extend(kids.into_iter().map(|c| (c, Some(id))));
                }
            }
            frontier = next;
        }
        let tree = CubeTree { nets, c0, cubes, levels };
        tree.check()?;
        Ok(tree)
    }

    pub fn cloud(&self) -> &Arc<PointCloud> {
        &self.nets.cloud
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// ℓ(Q) = 5ρ^k·scale0.
    pub fn side(&self, level: usize) -> f64 {
        5.0 * self.nets.scale(level)
    }

    pub fn ell(&self, id: usize) -> f64 {
        self.side(self.cubes[id].level)
    }

    pub fn center(&self, id: usize) -> &[f64] {
        self.nets.cloud.point(self.cubes[id].center)
    }

    /// B_Q = B(x_Q, ℓ(Q)).
    pub fn ball(&self, id: usize) -> crate::geometry::Ball {
        crate::geometry::Ball { center: self.center(id).to_vec(), radius: self.ell(id) }
    }

    pub fn roots(&self) -> &[usize] {
        &self.levels[0]
    }

    /// Q and all its descendants, in id order.
    pub fn descendants(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.cubes[out[i]].children);
            i += 1;
        }
        out.sort_unstable();
        out
    }

    /// Verifies nesting, inner/outer balls, cover and partition. O(N·levels + N² per level
    /// for the inner-ball clause via the cores).
    pub fn check(&self) -> Result<()> {
        let cloud = &self.nets.cloud;
        let npts = cloud.len();
        for (k, ids) in self.levels.iter().enumerate() {
            // each level partitions the points
            let mut owner = vec![usize::MAX; npts];
            for &id in ids {
                for &p in &self.cubes[id].members {
                    if owner[p] != usize::MAX {
                        return Err(TstError::CubeInvariant {
                            clause: "(4) partition".into(),
                            detail: format!("point {p} in cubes {} and {id} at level {k}", owner[p]),
                        });
                    }
                    owner[p] = id;
                }
            }
            if let Some(p) = owner.iter().position(|&o| o == usize::MAX) {
                return Err(TstError::CubeInvariant {
                    clause: "(4) partition".into(),
                    detail: format!("point {p} in no level-{k} cube"),
                });
            }
            let ell = self.side(k);
            let inner = self.c0 * ell;
            for &id in ids {
                let q = &self.cubes[id];
                let x = cloud.point(q.center);
                // outer ball, which also bounds the diameter
                for &p in &q.members {
                    if dist(x, cloud.point(p)) > ell {
                        return Err(TstError::CubeInvariant {
                            clause: "(2) outer ball".into(),
                            detail: format!("point {p} outside B_Q of cube {id}"),
                        });
                    }
                }
                // inner ball
                let ball = crate::geometry::Ball { center: x.to_vec(), radius: inner };
                for p in cloud.indices_in_ball(&ball) {
                    if owner[p] != id {
                        return Err(TstError::CubeInvariant {
                            clause: "(2) inner ball".into(),
                            detail: format!("point {p} in B(x_Q, c0·ℓ) of cube {id} but in cube {}", owner[p]),
                        });
                    }
                }
                // nesting: children partition the parent
                if k < self.depth() {
                    let mut kid_pts: Vec<usize> =
                        q.children.iter().flat_map(|&c| self.cubes[c].members.iter().copied()).collect();
                    kid_pts.sort_unstable();
                    if kid_pts != q.members {
                        return Err(TstError::CubeInvariant {
                            clause: "(1) nesting".into(),
                            detail: format!("children of cube {id} do not partition it"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Line-oriented dump: `level id c1..cn parent count` (parent -1 for roots).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# level id c0..c{} parent count", self.cloud().dim() - 1);
        for q in &self.cubes {
            let _ = write!(s, "{} {}", q.level, q.id);
            for c in self.center(q.id) {
                let _ = write!(s, " {c:.16e}");
            }
            let parent = q.parent.map(|p| p as i64).unwrap_or(-1);
            let _ = writeln!(s, " {parent} {}", q.members.len());
        }
        s
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    /// dist(x, R) with R as a point set.
    pub fn dist_point_cube(&self, x: &[f64], id: usize) -> f64 {
        let cloud = self.cloud();
        self.cubes[id].members.iter().map(|&p| dist2(x, cloud.point(p))).fold(f64::INFINITY, f64::min).sqrt()
    }

    pub fn dist_cubes(&self, a: usize, b: usize) -> f64 {
        let cloud = self.cloud();
        let mb = &self.cubes[b].members;
        self.cubes[a]
            .members
            .par_iter()
            .map(|&p| {
                let pp = cloud.point(p);
                mb.iter().map(|&q| dist2(pp, cloud.point(q))).fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Argument of [`cube_distance`].
pub enum CubeTarget<'a> {
    Point(&'a Point),
    Cube(usize),
}

/// d_C(·) = inf over R ∈ C of ℓ(R) + dist(·, R); +∞ for empty C.
pub fn cube_distance(tree: &CubeTree, from: CubeTarget<'_>, family: &[usize]) -> f64 {
    family
        .iter()
        .map(|&r| {
            let d = match &from {
                CubeTarget::Point(x) => tree.dist_point_cube(x, r),
                CubeTarget::Cube(q) => tree.dist_cubes(*q, r),
            };
            tree.ell(r) + d
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_tree() {
        let c = Arc::new(PointCloud::from_points(&[vec![0.5, 0.5]]).unwrap());
        let nets = NetHierarchy::build(c, DEFAULT_RHO, 5).unwrap();
        let t = CubeTree::build(nets, DEFAULT_C0).unwrap();
        assert_eq!(t.level_counts(), vec![1; 6]);
    }

    #[test]
    fn rejects_large_c0() {
        let c = Arc::new(PointCloud::from_points(&[vec![0.5, 0.5]]).unwrap());
        let nets = NetHierarchy::build(c, DEFAULT_RHO, 2).unwrap();
        assert!(CubeTree::build(nets, 0.2).is_err());
    }

    #[test]
    fn text_dump_has_all_cubes() {
        let pts: Vec<Point> = (0..20).map(|i| vec![i as f64 / 19.0, 0.0]).collect();
        let c = Arc::new(PointCloud::from_points(&pts).unwrap());
        let nets = NetHierarchy::build(c, DEFAULT_RHO, 4).unwrap();
        let t = CubeTree::build(nets, DEFAULT_C0).unwrap();
        let txt = t.to_text();
        assert_eq!(txt.lines().count(), t.cubes.len() + 1);
        assert!(txt.lines().nth(1).unwrap().ends_with("-1 20"));
    }
}
