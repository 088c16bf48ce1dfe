//! Upper estimates of d-dimensional Hausdorff content at a fixed resolution.
//!
//! Each cloud carries one cover hierarchy: nested greedy nets (ρ = 1/2) turned into a tree by
//! sending every level-k net point to its nearest level-(k-1) net point, with single-child chains
//! collapsed. A node covers its piece of a subset S by one ball centred at the bounding-box centre
//! of its full piece, enlarged by half the sample spacing so that every sample carries its cell.
//! The estimate for S is the cheapest cover obtained by choosing, node by node, between that ball
//! and the best covers of the children. Because the hierarchy is shared by all queries on a
//! cloud, the estimate is monotone under inclusion of index sets.

use std::sync::Arc;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TstError};
use crate::geometry::{dist, insertion_order, Ball, PointCloud};
use crate::nets::{default_scale0, greedy_levels};

const NONE: u32 = u32::MAX;
const MAX_LEVELS: usize = 60;

#[derive(Debug)]
pub struct ContentHierarchy {
    n: usize,
    parent: Vec<u32>,
    children: Vec<Vec<u32>>,
    centers: Vec<f64>,
    point_leaf: Vec<u32>,
    root: u32,
    /// Median nearest-neighbour spacing of the cloud.
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentEstimate {
    pub value: f64,
    pub d: f64,
    /// Finest cover radius.
    pub resolution: f64,
    pub cover: Vec<Ball>,
}

impl ContentHierarchy {
    /// The cloud's shared hierarchy, built on first use.
    pub fn of(cloud: &PointCloud) -> Arc<ContentHierarchy> {
        cloud.content.get_or_init(|| Arc::new(Self::build(cloud))).clone()
    }

    fn build(cloud: &PointCloud) -> Self {
        let n = cloud.dim();
        let npts = cloud.len();
        if npts == 0 {
            return Self {
                n,
                parent: vec![],
                children: vec![],
                centers: vec![],
                point_leaf: vec![],
                root: NONE,
                resolution: 0.0,
            };
        }
        let rho = 0.5;
        let s0 = default_scale0(cloud.diameter(), rho);
        let (levels, _) = greedy_levels(cloud, rho, s0, MAX_LEVELS, true);
        let nl = levels.len();

        // raw nodes: (level, net point)
        let mut offset = vec![0usize; nl + 1];
        for k in 0..nl {
            offset[k + 1] = offset[k] + levels[k].len();
        }
        let total = offset[nl];
        let mut raw_parent = vec![NONE; total];
        for k in 1..nl {
            let prev = &levels[k - 1];
            let mut tree: KdTree<f64, usize, Vec<f64>> = KdTree::with_capacity(n, 16);
            for r in insertion_order(prev.len()) {
                tree.add(cloud.point(prev[r]).to_vec(), r).expect("finite");
            }
            for (r, &x) in levels[k].iter().enumerate() {
                let pr = if r < prev.len() {
                    r
                } else {
                    let nn = tree.nearest(cloud.point(x), 1, &squared_euclidean).expect("valid");
                    *nn[0].1
                };
                raw_parent[offset[k] + r] = (offset[k - 1] + pr) as u32;
            }
        }
        let finest = &levels[nl - 1];
        let mut fine_rank = vec![usize::MAX; npts];
        for (r, &x) in finest.iter().enumerate() {
            fine_rank[x] = r;
        }
        let mut ftree: KdTree<f64, usize, Vec<f64>> = KdTree::with_capacity(n, 16);
        for r in insertion_order(finest.len()) {
            ftree.add(cloud.point(finest[r]).to_vec(), r).expect("finite");
        }
        let raw_leaf: Vec<usize> = (0..npts)
            .map(|p| {
                let r = if fine_rank[p] != usize::MAX {
                    fine_rank[p]
                } else {
                    *ftree.nearest(cloud.point(p), 1, &squared_euclidean).expect("valid")[0].1
                };
                offset[nl - 1] + r
            })
            .collect();

        // collapse single-child chains
        let mut raw_children: Vec<Vec<usize>> = vec![Vec::new(); total];
        for (i, &p) in raw_parent.iter().enumerate() {
            if p != NONE {
                raw_children[p as usize].push(i);
            }
        }
        let is_leaf_level = |i: usize| i >= offset[nl - 1];
        let rep = |mut i: usize| {
            while !is_leaf_level(i) && raw_children[i].len() == 1 {
                i = raw_children[i][0];
            }
            i
        };
        let mut new_id = vec![NONE; total];
        let mut parent: Vec<u32> = Vec::new();
        let mut children: Vec<Vec<u32>> = Vec::new();
        let root_raw = rep(0);
        new_id[root_raw] = 0;
        parent.push(NONE);
        children.push(Vec::new());
        let mut stack = vec![root_raw];
        while let Some(i) = stack.pop() {
            let me = new_id[i];
            if is_leaf_level(i) {
                continue;
            }
            for &c in &raw_children[i] {
                let rc = rep(c);
                let id = parent.len() as u32;
                new_id[rc] = id;
                parent.push(me);
                children.push(Vec::new());
                children[me as usize].push(id);
                stack.push(rc);
            }
        }
        let nodes = parent.len();
        let point_leaf: Vec<u32> = raw_leaf.iter().map(|&l| new_id[l]).collect();

        // bounding boxes bottom-up (children always have larger ids)
        let mut lo = vec![f64::INFINITY; nodes * n];
        let mut hi = vec![f64::NEG_INFINITY; nodes * n];
        for p in 0..npts {
            let l = point_leaf[p] as usize;
            for (j, &v) in cloud.point(p).iter().enumerate() {
                lo[l * n + j] = lo[l * n + j].min(v);
                hi[l * n + j] = hi[l * n + j].max(v);
            }
        }
        for i in (1..nodes).rev() {
            let p = parent[i] as usize;
            for j in 0..n {
                lo[p * n + j] = lo[p * n + j].min(lo[i * n + j]);
                hi[p * n + j] = hi[p * n + j].max(hi[i * n + j]);
            }
        }
        let centers: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        Self { n, parent, children, centers, point_leaf, root: 0, resolution: cloud.median_spacing() }
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// Radius of the cell each sample stands for; a piece of radius r is covered at radius r + r_floor.
    pub fn r_floor(&self) -> f64 {
        0.5 * self.resolution
    }

    fn center(&self, node: usize) -> &[f64] {
        &self.centers[node * self.n..(node + 1) * self.n]
    }
}

/// Incremental evaluator: points are inserted one at a time and the estimate of the inserted
/// set is available after each insertion in O(1); an insertion costs O(tree depth).
pub struct ContentAccumulator<'a> {
    h: &'a ContentHierarchy,
    cloud: &'a PointCloud,
    d: f64,
    rf: f64,
    r: Vec<f64>,
    cost: Vec<f64>,
    childsum: Vec<f64>,
    touched: Vec<bool>,
    touched_list: Vec<u32>,
    first: Option<usize>,
    distinct: bool,
    count: usize,
}

impl<'a> ContentAccumulator<'a> {
    pub fn new(h: &'a ContentHierarchy, cloud: &'a PointCloud, d: f64) -> Self {
        let m = h.node_count();
        Self {
            h,
            cloud,
            d,
            rf: h.r_floor(),
            r: vec![0.0; m],
            cost: vec![0.0; m],
            childsum: vec![0.0; m],
            touched: vec![false; m],
            touched_list: Vec::new(),
            first: None,
            distinct: false,
            count: 0,
        }
    }

    #[inline]
    fn touch(&mut self, node: usize) {
        if !self.touched[node] {
            self.touched[node] = true;
            self.touched_list.push(node as u32);
        }
    }

    /// Empty the inserted set; cost proportional to the nodes touched since the last reset.
    pub fn reset(&mut self) {
        for &i in &self.touched_list {
            let i = i as usize;
            self.touched[i] = false;
            self.r[i] = 0.0;
            self.cost[i] = 0.0;
            self.childsum[i] = 0.0;
        }
        self.touched_list.clear();
        self.first = None;
        self.distinct = false;
        self.count = 0;
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    #[inline]
    fn single(&self, node: usize) -> f64 {
        let t = 2.0 * (self.r[node] + self.rf);
        if self.d == 1.0 {
            t
        } else if self.d == 2.0 {
            t * t
        } else {
            t.powf(self.d)
        }
    }

    pub fn insert(&mut self, p: usize) {
        let x = self.cloud.point(p);
        match self.first {
            None => self.first = Some(p),
            Some(f) if !self.distinct => {
                if self.cloud.point(f) != x {
                    self.distinct = true;
                }
            }
            _ => {}
        }
        self.count += 1;
        let mut node = self.h.point_leaf[p] as usize;
        self.touch(node);
        let old = self.cost[node];
        self.r[node] = self.r[node].max(dist(x, self.h.center(node)));
        let mut new = self.single(node);
        self.cost[node] = new;
        let mut delta = new - old;
        loop {
            let parent = self.h.parent[node];
            if parent == NONE {
                break;
            }
            node = parent as usize;
            self.touch(node);
            let old = self.cost[node];
            self.childsum[node] += delta;
            self.r[node] = self.r[node].max(dist(x, self.h.center(node)));
            new = self.single(node).min(self.childsum[node]);
            self.cost[node] = new;
            delta = new - old;
        }
    }

    /// Estimate of the inserted set; 0 while it has fewer than two distinct points.
    pub fn value(&self) -> f64 {
        if !self.distinct || self.h.root == NONE {
            return 0.0;
        }
        self.cost[self.h.root as usize]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Balls realising [`Self::value`].
    pub fn cover(&self) -> Vec<Ball> {
        let mut out = Vec::new();
        if !self.distinct || self.h.root == NONE {
            return out;
        }
        let mut stack = vec![self.h.root as usize];
        while let Some(i) = stack.pop() {
            let kids = &self.h.children[i];
            if kids.is_empty() || self.single(i) <= self.childsum[i] {
                out.push(Ball { center: self.h.center(i).to_vec(), radius: self.r[i] + self.rf });
            } else {
                for &c in kids.iter().rev() {
                    if self.touched[c as usize] {
                        stack.push(c as usize);
                    }
                }
            }
        }
        out
    }
}

/// Estimate for the points of `cloud` with the given indices.
pub fn content_of_indices(cloud: &PointCloud, idx: &[usize], d: f64) -> ContentEstimate {
    let h = ContentHierarchy::of(cloud);
    let mut acc = ContentAccumulator::new(&h, cloud, d);
    for &i in idx {
        acc.insert(i);
    }
    let cover = acc.cover();
    let value = cover.iter().map(|b| b.diam().powf(d)).sum();
    ContentEstimate { value, d, resolution: h.r_floor(), cover }
}

/// Estimate of ℋ^d_∞(E ∩ B).
pub fn hausdorff_content(cloud: &PointCloud, d: f64, ball: &Ball) -> Result<ContentEstimate> {
    if d < 1.0 {
        return Err(TstError::InvalidInput(format!("content dimension must be >= 1, got {d}")));
    }
    if ball.dim() != cloud.dim() {
        return Err(TstError::DimensionMismatch { expected: cloud.dim(), got: ball.dim() });
    }
    let idx = cloud.indices_in_ball(ball);
    Ok(content_of_indices(cloud, &idx, d))
}
