//! Points, balls, affine planes, point clouds and the distances between them.

use std::sync::{Arc, OnceLock};

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::ContentHierarchy;
use crate::error::{Result, Side, TstError};
use crate::tolerance::DEFAULT_TOL;

pub type Point = Vec<f64>;

/// Relative threshold below which a projection residual is treated as zero.
const SNAP: f64 = 1e-13;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
/// A fixed pseudo-random permutation of 0..len. The kd-tree splits buckets at the midpoint of
/// their bounds, so inserting sorted data (a sampled curve, a lattice) degenerates it into a list.
pub(crate) fn insertion_order(len: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..len).collect();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    v
}

/// kd-tree over `points`, payload = position in the slice.
pub(crate) fn build_index<P: AsRef<[f64]>>(n: usize, points: &[P]) -> KdTree<f64, usize, Vec<f64>> {
    let mut t = KdTree::with_capacity(n, 16);
    for i in insertion_order(points.len()) {
        t.add(points[i].as_ref().to_vec(), i).expect("finite point");
    }
    t
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(TstError::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(TstError::InvalidInput(format!("ball radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(TstError::InvalidInput("ball center has non-finite entries".into()));
        }
        Ok(Self { center, radius })
    }

    /// Same center, radius multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius * lambda }
    }

    pub fn diam(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(x, &self.center) <= self.radius * self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// A d-plane stored as a base point and an orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRepr", into = "PlaneRepr")]
pub struct AffinePlane {
    base: Point,
    frame: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct PlaneRepr {
    base: Point,
    frame: Vec<Point>,
}

impl TryFrom<PlaneRepr> for AffinePlane {
    type Error = TstError;
    fn try_from(r: PlaneRepr) -> Result<Self> {
        AffinePlane::new(r.base, r.frame)
    }
}

impl From<AffinePlane> for PlaneRepr {
    fn from(p: AffinePlane) -> Self {
        PlaneRepr { base: p.base, frame: p.frame }
    }
}

impl AffinePlane {
    pub fn new(base: Point, frame: Vec<Point>) -> Result<Self> {
        let n = base.len();
        let d = frame.len();
        if d == 0 || d >= n {
            return Err(TstError::InvalidInput(format!("plane dimension {d} must satisfy 1 <= d < n = {n}")));
        }
        for f in &frame {
            check_dim(n, f.len())?;
        }
        let tol = DEFAULT_TOL.frame;
        for i in 0..d {
            if (norm(&frame[i]) - 1.0).abs() > tol {
                return Err(TstError::InvalidInput(format!("frame vector {i} is not unit length")));
            }
            for j in 0..i {
                if dot(&frame[i], &frame[j]).abs() > tol {
                    return Err(TstError::InvalidInput(format!("frame vectors {j},{i} not orthogonal")));
                }
            }
        }
        if base.iter().chain(frame.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(TstError::InvalidInput("plane has non-finite entries".into()));
        }
        Ok(Self { base, frame })
    }

    /// Gram-Schmidt on `spanning` (twice, for stability).
    pub fn from_spanning(base: Point, spanning: &[Point]) -> Result<Self> {
        let n = base.len();
        let mut frame: Vec<Point> = Vec::with_capacity(spanning.len());
        for v in spanning {
            check_dim(n, v.len())?;
            let scale0 = norm(v);
            let mut w = v.clone();
            for _ in 0..2 {
                for f in &frame {
                    let c = dot(&w, f);
                    for (wi, fi) in w.iter_mut().zip(f) {
                        *wi -= c * fi;
                    }
                }
            }
            let nw = norm(&w);
            if !(nw > 1e-10 * scale0.max(1e-300)) {
                return Err(TstError::InvalidInput("spanning vectors are linearly dependent".into()));
            }
            frame.push(w.iter().map(|x| x / nw).collect());
        }
        Self::new(base, frame)
    }

    /// The plane spanned by the first `d` coordinate axes through `base`.
    pub fn coordinate(base: Point, d: usize) -> Result<Self> {
        let n = base.len();
        let frame = (0..d)
            .map(|i| {
                let mut e = vec![0.0; n];
                if i < n {
                    e[i] = 1.0;
                }
                e
            })
            .collect();
        Self::new(base, frame)
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn frame(&self) -> &[Point] {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn ambient(&self) -> usize {
        self.base.len()
    }

    /// Frame coordinates of the projection of `x`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        let r = sub(x, &self.base);
        self.frame.iter().map(|f| dot(&r, f)).collect()
    }

    pub fn point_at(&self, coords: &[f64]) -> Point {
        let mut p = self.base.clone();
        for (c, f) in coords.iter().zip(&self.frame) {
            for (pi, fi) in p.iter_mut().zip(f) {
                *pi += c * fi;
            }
        }
        p
    }

    /// Component of `x - base` orthogonal to the plane.
    pub fn normal_component(&self, x: &[f64]) -> Point {
        let mut r = sub(x, &self.base);
        let cs: Vec<f64> = self.frame.iter().map(|f| dot(&r, f)).collect();
        for (c, f) in cs.iter().zip(&self.frame) {
            for (ri, fi) in r.iter_mut().zip(f) {
                *ri -= c * fi;
            }
        }
        r
    }

    /// Orthogonal projection. Points already on the plane (up to rounding) are returned unchanged.
    pub fn project(&self, x: &[f64]) -> Point {
        let nc = self.normal_component(x);
        let s = norm(&nc);
        if s <= SNAP * (1.0 + norm(x).max(norm(&self.base))) {
            return x.to_vec();
        }
        sub(x, &nc)
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        let nc = self.normal_component(x);
        let s = norm(&nc);
        if s <= SNAP * (1.0 + norm(x).max(norm(&self.base))) {
            0.0
        } else {
            s
        }
    }

    /// Same direction space, passing through `p`.
    pub fn through(&self, p: &[f64]) -> AffinePlane {
        AffinePlane { base: p.to_vec(), frame: self.frame.clone() }
    }

    /// Radius of the disc P ∩ B, or None when the plane misses the ball.
    pub fn disc_in_ball(&self, ball: &Ball) -> Option<(Point, f64)> {
        let c = self.project(&ball.center);
        let h2 = dist2(&c, &ball.center);
        let r2 = ball.radius * ball.radius;
        if h2 > r2 {
            return None;
        }
        Some((c, (r2 - h2).max(0.0).sqrt()))
    }

    /// Deterministic sample of P ∩ B: a lattice of pitch `pitch` in frame coordinates plus
    /// boundary points. The lattice is coarsened so that at most `max_points` are produced.
    pub fn grid_in_ball(&self, ball: &Ball, pitch: f64, max_points: usize) -> Vec<Point> {
        let Some((c, rho)) = self.disc_in_ball(ball) else {
            return Vec::new();
        };
        let d = self.dim();
        if rho == 0.0 {
            return vec![c];
        }
        let mut h = pitch.min(rho);
        let est = |h: f64| (2.0 * rho / h + 1.0).powi(d as i32);
        while est(h) > max_points as f64 {
            h *= 1.25;
        }
        let m = (rho / h).floor() as i64;
        let cc = self.coords(&c);
        let mut out = Vec::new();
        let mut idx = vec![-m; d];
        loop {
            let off: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
            if dot(&off, &off) <= rho * rho {
                let u: Vec<f64> = cc.iter().zip(&off).map(|(a, b)| a + b).collect();
                out.push(self.point_at(&u));
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] <= m {
                    break;
                }
                idx[k] = -m;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        // boundary
        match d {
            1 => {
                for s in [-1.0, 1.0] {
                    out.push(self.point_at(&[cc[0] + s * rho]));
                }
            }
            2 => {
                let steps = ((2.0 * std::f64::consts::PI * rho / h).ceil() as usize).max(8);
                for i in 0..steps {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
                    out.push(self.point_at(&[cc[0] + rho * a.cos(), cc[1] + rho * a.sin()]));
                }
            }
            _ => {
                for i in 0..d {
                    for s in [-1.0, 1.0] {
                        let mut u = cc.clone();
                        u[i] += s * rho;
                        out.push(self.point_at(&u));
                    }
                }
            }
        }
        out
    }
}

/// π_P(x).
pub fn project_point(x: &[f64], p: &AffinePlane) -> Result<Point> {
    check_dim(p.ambient(), x.len())?;
    Ok(p.project(x))
}

pub fn dist_point_plane(x: &[f64], p: &AffinePlane) -> Result<f64> {
    check_dim(p.ambient(), x.len())?;
    Ok(p.dist(x))
}

/// sin of the largest principal angle between the direction spaces; equals d_{B(0,1)} of the
/// planes translated to the origin.
pub fn plane_angle(p: &AffinePlane, q: &AffinePlane) -> Result<f64> {
    check_dim(p.ambient(), q.ambient())?;
    if p.dim() != q.dim() {
        return Err(TstError::InvalidInput(format!("plane dimensions differ: {} vs {}", p.dim(), q.dim())));
    }
    let n = p.ambient();
    let d = p.dim();
    let mut m = DMatrix::<f64>::zeros(n, d);
    for (j, u) in p.frame().iter().enumerate() {
        let mut w = u.clone();
        for v in q.frame() {
            let c = dot(u, v);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
        for i in 0..n {
            m[(i, j)] = w[i];
        }
    }
    let sv = m.singular_values();
    Ok(sv.max().clamp(0.0, 1.0))
}

/// sup over the disc {c + U v : |v| <= rho} of the distance to `q`.
fn sup_dist_disc_to_plane(c: &[f64], frame: &[Point], rho: f64, q: &AffinePlane) -> f64 {
    let d = frame.len();
    let a = q.normal_component(c);
    if rho == 0.0 {
        return norm(&a);
    }
    // M = (I - Π_q) U
    let cols: Vec<Point> = frame
        .iter()
        .map(|u| {
            let mut w = u.clone();
            for v in q.frame() {
                let cc = dot(u, v);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= cc * vi;
                }
            }
            w
        })
        .collect();
    let g_mat = DMatrix::from_fn(d, d, |i, j| dot(&cols[i], &cols[j]));
    let g_vec = DVector::from_fn(d, |i, _| dot(&cols[i], &a));
    let eig = SymmetricEigen::new(g_mat.clone());
    let lam = eig.eigenvalues.clone();
    let vecs = eig.eigenvectors.clone();
    let gi: Vec<f64> = (0..d).map(|i| vecs.column(i).dot(&g_vec)).collect();
    let lmax = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = lmax.abs().max(1.0);
    let objective = |v: &DVector<f64>| -> f64 {
        let q = (v.transpose() * &g_mat * v)[(0, 0)];
        q + 2.0 * g_vec.dot(v)
    };
    let vnorm2 = |mu: f64| -> f64 { (0..d).map(|i| gi[i] * gi[i] / ((mu - lam[i]) * (mu - lam[i]))).sum() };
    let build = |mu: f64| -> DVector<f64> {
        let mut v = DVector::zeros(d);
        for i in 0..d {
            let denom = mu - lam[i];
            if denom.abs() > 0.0 {
                v += vecs.column(i) * (gi[i] / denom);
            }
        }
        v
    };
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    // secular equation |v(mu)| = rho on (lmax, inf)
    let mut lo = lmax + 1e-14 * scale;
    if vnorm2(lo) >= rho * rho {
        let mut hi = lmax + (g_vec.norm() / rho).max(1e-300) + 1e-12 * scale;
        while vnorm2(hi) > rho * rho {
            hi = lmax + 2.0 * (hi - lmax);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if vnorm2(mid) > rho * rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut v = build(hi);
        let nv = v.norm();
        if nv > 0.0 {
            v *= rho / nv;
        }
        candidates.push(v);
    } else {
        // hard case: top eigen-direction is free
        let mut v = DVector::zeros(d);
        for i in 0..d {
            if lam[i] < lmax - 1e-12 * scale {
                v += vecs.column(i) * (gi[i] / (lmax - lam[i]));
            }
        }
        let rem = (rho * rho - v.norm_squared()).max(0.0).sqrt();
        for i in 0..d {
            if lam[i] >= lmax - 1e-12 * scale {
                let e = vecs.column(i).into_owned();
                candidates.push(&v + &e * rem);
                candidates.push(&v - &e * rem);
            }
        }
    }
    for i in 0..d {
        let e = vecs.column(i).into_owned();
        candidates.push(&e * rho);
        candidates.push(&e * -rho);
    }
    let best = candidates.iter().map(&objective).fold(f64::NEG_INFINITY, f64::max);
    (dot(&a, &a) + best).max(0.0).sqrt()
}

/// d_{x,r}(P, Q): normalized two-sided distance between two planes inside B(x, r), computed
/// exactly. A side whose disc is empty contributes 0.
pub fn plane_local_distance(p: &AffinePlane, q: &AffinePlane, ball: &Ball) -> Result<f64> {
    check_dim(p.ambient(), q.ambient())?;
    check_dim(p.ambient(), ball.dim())?;
    let mut s: f64 = 0.0;
    if let Some((c, rho)) = p.disc_in_ball(ball) {
        s = s.max(sup_dist_disc_to_plane(&c, p.frame(), rho, q));
    }
    if let Some((c, rho)) = q.disc_in_ball(ball) {
        s = s.max(sup_dist_disc_to_plane(&c, q.frame(), rho, p));
    }
    Ok(s / ball.radius)
}

/// Finite sample of a set in R^n with a lazily built k-d tree.
pub struct PointCloud {
    n: usize,
    data: Vec<f64>,
    tree: OnceLock<KdTree<f64, usize, Vec<f64>>>,
    diam: OnceLock<f64>,
    spacing: OnceLock<f64>,
    pub(crate) content: OnceLock<Arc<ContentHierarchy>>,
}

impl Clone for PointCloud {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.clone(),
            tree: OnceLock::new(),
            diam: self.diam.clone(),
            spacing: self.spacing.clone(),
            content: self.content.clone(),
        }
    }
}

impl std::fmt::Debug for PointCloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointCloud").field("n", &self.n).field("len", &self.len()).finish()
    }
}

impl PartialEq for PointCloud {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.data == other.data
    }
}

impl PointCloud {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(TstError::InvalidInput("ambient dimension must be positive".into()));
        }
        if data.len() % n != 0 {
            return Err(TstError::InvalidInput(format!("{} coordinates is not a multiple of n = {n}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TstError::InvalidInput("point cloud has non-finite coordinates".into()));
        }
        Ok(Self { n, data, tree: OnceLock::new(), diam: OnceLock::new(), spacing: OnceLock::new(), content: OnceLock::new() })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(TstError::InvalidInput("cannot infer dimension of an empty point list".into()));
        };
        let n = first.len();
        let mut data = Vec::with_capacity(n * points.len());
        for p in points {
            check_dim(n, p.len())?;
            data.extend_from_slice(p);
        }
        Self::new(n, data)
    }

    pub fn empty(n: usize) -> Self {
        Self { n, data: Vec::new(), tree: OnceLock::new(), diam: OnceLock::new(), spacing: OnceLock::new(), content: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn subset(&self, idx: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(idx.len() * self.n);
        for &i in idx {
            data.extend_from_slice(self.point(i));
        }
        PointCloud { n: self.n, data, tree: OnceLock::new(), diam: OnceLock::new(), spacing: OnceLock::new(), content: OnceLock::new() }
    }

    fn tree(&self) -> &KdTree<f64, usize, Vec<f64>> {
        self.tree.get_or_init(|| {
            let mut t = KdTree::with_capacity(self.n, 16);
            for i in insertion_order(self.len()) {
                t.add(self.point(i).to_vec(), i).expect("finite points");
            }
            t
        })
    }

    /// Indices of points in the closed ball, ascending.
    pub fn indices_in_ball(&self, ball: &Ball) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        assert_eq!(ball.dim(), self.n, "ball dimension differs from cloud dimension");
        let r2 = ball.radius * ball.radius;
        let found = self
            .tree()
            .within(&ball.center, r2 * (1.0 + 1e-9) + 1e-300, &squared_euclidean)
            .expect("valid query");
        let mut idx: Vec<usize> = found.into_iter().map(|(_, &i)| i).filter(|&i| ball.contains(self.point(i))).collect();
        idx.sort_unstable();
        idx
    }

    /// Nearest cloud point and its distance.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let found = self.tree().nearest(x, 1, &squared_euclidean).expect("valid query");
        found.first().map(|&(_, &i)| (i, dist(x, self.point(i))))
    }

    pub fn dist_to(&self, x: &[f64]) -> f64 {
        self.nearest(x).map(|(_, d)| d).unwrap_or(f64::INFINITY)
    }

    /// Exact diameter, O(N²).
    pub fn diameter(&self) -> f64 {
        *self.diam.get_or_init(|| {
            let m = self.len();
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let p = self.point(i);
                    ((i + 1)..m).map(|j| dist2(p, self.point(j))).fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max)
                .sqrt()
        })
    }

    /// Median nearest-neighbour distance (0 for fewer than two points).
    pub fn median_spacing(&self) -> f64 {
        *self.spacing.get_or_init(|| {
            let m = self.len();
            if m < 2 {
                return 0.0;
            }
            let tree = self.tree();
            let mut nn: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let p = self.point(i);
                    let found = tree.nearest(p, 2, &squared_euclidean).expect("valid query");
                    found.iter().filter(|(_, &j)| j != i).map(|(d2, _)| d2.sqrt()).next().unwrap_or(0.0)
                })
                .collect();
            nn.sort_by(|a, b| a.total_cmp(b));
            nn[m / 2]
        })
    }

    /// Covering radius of a cubic d-lattice with the median spacing, (√d/2)·spacing.
    pub fn sampling_radius(&self, d: usize) -> f64 {
        0.5 * (d as f64).sqrt() * self.median_spacing()
    }
}

/// Second argument of [`local_hausdorff_distance`].
pub enum Target<'a> {
    Cloud(&'a PointCloud),
    Plane(&'a AffinePlane),
}

/// Grid settings for sups over a plane inside a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    /// Pitch as a fraction of r_B.
    pub pitch_frac: f64,
    pub max_points: usize,
}

impl Default for PlaneGrid {
    fn default() -> Self {
        Self { pitch_frac: 1.0 / 64.0, max_points: 20_000 }
    }
}

/// d_B(E, F) = (2/diam B)·max(sup_{E∩B} dist(·,F), sup_{F∩B} dist(·,E)).
pub fn local_hausdorff_distance(e: &PointCloud, f: Target<'_>, ball: &Ball, grid: PlaneGrid) -> Result<f64> {
    check_dim(e.dim(), ball.dim())?;
    let e_in = e.indices_in_ball(ball);
    if e_in.is_empty() {
        return Err(TstError::EmptyIntersection { side: Side::First });
    }
    let (s1, s2) = match f {
        Target::Cloud(fc) => {
            check_dim(e.dim(), fc.dim())?;
            let f_in = fc.indices_in_ball(ball);
            if f_in.is_empty() {
                return Err(TstError::EmptyIntersection { side: Side::Second });
            }
            let s1 = e_in.par_iter().map(|&i| fc.dist_to(e.point(i))).reduce(|| 0.0, f64::max);
            let s2 = f_in.par_iter().map(|&i| e.dist_to(fc.point(i))).reduce(|| 0.0, f64::max);
            (s1, s2)
        }
        Target::Plane(p) => {
            check_dim(e.dim(), p.ambient())?;
            let g = p.grid_in_ball(ball, grid.pitch_frac * ball.radius, grid.max_points);
            if g.is_empty() {
                return Err(TstError::EmptyIntersection { side: Side::Second });
            }
            let s1 = e_in.iter().map(|&i| p.dist(e.point(i))).fold(0.0, f64::max);
            let s2 = g.par_iter().map(|y| e.dist_to(y)).reduce(|| 0.0, f64::max);
            (s1, s2)
        }
    };
    Ok(s1.max(s2) * 2.0 / ball.diam())
}
