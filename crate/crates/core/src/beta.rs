//! β-type flatness coefficients of a cloud inside a ball.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::choquet::{choquet_with, ChoquetConfig, ChoquetRange};
use crate::content::{ContentAccumulator, ContentHierarchy};
use crate::error::{Result, TstError};
use crate::geometry::{AffinePlane, Ball, PlaneGrid, Point, PointCloud};
use crate::planefit::{pca_plane, plane_starts, refine_plane, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    BetaInf,
    BetaDp,
    Bbeta,
    Eta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaValue {
    pub value: f64,
    pub plane: AffinePlane,
    pub kind: BetaKind,
    pub ball: Ball,
    pub p: Option<f64>,
    /// Fewer than d+1 affinely independent points in the ball.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaConfig {
    pub optimizer: OptimizerConfig,
    /// Grid for reported bilateral values.
    pub grid: PlaneGrid,
    /// Coarser grid used inside the bilateral plane search.
    pub search_grid: PlaneGrid,
    /// Subtract the sampling radius of the cloud from plane-to-cloud distances in bβ, so that a
    /// sampled plane scores 0 instead of spacing/diameter.
    #[serde(default = "yes")]
    pub resolution_correction: bool,
}

fn yes() -> bool {
    true
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            grid: PlaneGrid::default(),
            search_grid: PlaneGrid { pitch_frac: 1.0 / 16.0, max_points: 2_000 },
            resolution_correction: true,
        }
    }
}

struct Prepared {
    idx: Vec<usize>,
    fit: Option<crate::planefit::PcaFit>,
    degenerate: bool,
}

fn prepare(cloud: &PointCloud, ball: &Ball, d: usize) -> Result<Prepared> {
    if ball.dim() != cloud.dim() {
        return Err(TstError::DimensionMismatch { expected: cloud.dim(), got: ball.dim() });
    }
    if d == 0 || d >= cloud.dim() {
        return Err(TstError::InvalidInput(format!("plane dimension {d} must satisfy 1 <= d < n")));
    }
    let idx = cloud.indices_in_ball(ball);
    if idx.is_empty() {
        return Err(TstError::EmptyIntersection { side: crate::error::Side::First });
    }
    let fit = pca_plane(cloud, &idx, d);
    let degenerate = fit.as_ref().map(|f| f.rank < d).unwrap_or(true);
    Ok(Prepared { idx, fit, degenerate })
}

fn degenerate_value(cloud: &PointCloud, prep: &Prepared, ball: &Ball, d: usize, kind: BetaKind, p: Option<f64>) -> BetaValue {
    let plane = match &prep.fit {
        Some(f) => f.plane.clone(),
        None => AffinePlane::coordinate(cloud.point(prep.idx[0]).to_vec(), d).expect("valid d"),
    };
    BetaValue { value: 0.0, plane, kind, ball: ball.clone(), p, degenerate: true }
}

/// (2/r)·sup over E∩B of dist(·, L) at a fixed plane.
pub fn beta_inf_at(cloud: &PointCloud, idx: &[usize], ball: &Ball, plane: &AffinePlane) -> f64 {
    let s = idx.iter().map(|&i| plane.dist(cloud.point(i))).fold(0.0, f64::max);
    2.0 * s / ball.radius
}

pub fn beta_inf(cloud: &PointCloud, ball: &Ball, d: usize, cfg: &BetaConfig) -> Result<BetaValue> {
    let prep = prepare(cloud, ball, d)?;
    if prep.degenerate {
        return Ok(degenerate_value(cloud, &prep, ball, d, BetaKind::BetaInf, None));
    }
    let fit = prep.fit.clone().expect("non-degenerate");
    let res = refine_plane(fit.plane, fit.normals, ball.radius, &ball.center, cfg.optimizer, |pl| {
        beta_inf_at(cloud, &prep.idx, ball, pl)
    });
    Ok(BetaValue { value: res.value, plane: res.plane, kind: BetaKind::BetaInf, ball: ball.clone(), p: None, degenerate: false })
}

fn beta_dp_with(acc: &mut ContentAccumulator<'_>, cloud: &PointCloud, idx: &[usize], ball: &Ball, p: f64, plane: &AffinePlane) -> f64 {
    acc.reset();
    let r = ball.radius;
    let vals: Vec<f64> = idx.iter().map(|&i| plane.dist(cloud.point(i)) / r).collect();
    let integral = choquet_with(acc, idx, &vals, ChoquetConfig { p, range: ChoquetRange::Unit });
    (integral / r.powf(acc.d())).max(0.0).powf(1.0 / p)
}

/// β^{d,p}(B, L) at a fixed plane.
pub fn beta_dp_at(cloud: &PointCloud, ball: &Ball, d: usize, p: f64, plane: &AffinePlane) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(TstError::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    if plane.ambient() != cloud.dim() {
        return Err(TstError::DimensionMismatch { expected: cloud.dim(), got: plane.ambient() });
    }
    let idx = cloud.indices_in_ball(ball);
    let h = ContentHierarchy::of(cloud);
    let mut acc = ContentAccumulator::new(&h, cloud, d as f64);
    Ok(beta_dp_with(&mut acc, cloud, &idx, ball, p, plane))
}

/// β^{d,p}(B) (minimised over planes), or β^{d,p}(B, L) when `plane` is given.
pub fn beta_dp(
    cloud: &PointCloud,
    ball: &Ball,
    d: usize,
    p: f64,
    plane: Option<&AffinePlane>,
    cfg: &BetaConfig,
) -> Result<BetaValue> {
    if !(p >= 1.0) {
        return Err(TstError::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    if let Some(pl) = plane {
        let value = beta_dp_at(cloud, ball, d, p, pl)?;
        return Ok(BetaValue { value, plane: pl.clone(), kind: BetaKind::BetaDp, ball: ball.clone(), p: Some(p), degenerate: false });
    }
    let prep = prepare(cloud, ball, d)?;
    if prep.degenerate {
        return Ok(degenerate_value(cloud, &prep, ball, d, BetaKind::BetaDp, Some(p)));
    }
    let fit = prep.fit.clone().expect("non-degenerate");
    let h = ContentHierarchy::of(cloud);
    let acc = RefCell::new(ContentAccumulator::new(&h, cloud, d as f64));
    let res = refine_plane(fit.plane, fit.normals, ball.radius, &ball.center, cfg.optimizer, |pl| {
        beta_dp_with(&mut acc.borrow_mut(), cloud, &prep.idx, ball, p, pl)
    });
    Ok(BetaValue { value: res.value, plane: res.plane, kind: BetaKind::BetaDp, ball: ball.clone(), p: Some(p), degenerate: false })
}

/// d_B(E, P) at a fixed plane (with the sampling correction of `cfg`); +∞ when P misses B or E∩B
/// is empty.
pub fn bbeta_at(cloud: &PointCloud, ball: &Ball, plane: &AffinePlane, cfg: &BetaConfig) -> f64 {
    let idx = cloud.indices_in_ball(ball);
    if idx.is_empty() {
        return f64::INFINITY;
    }
    LocalSet::new(cloud, ball, &idx, plane.dim(), cfg).bbeta_at(ball, plane, cfg.grid)
}

/// E∩B and E∩3B, cut out once for repeated bilateral evaluations. For y ∈ B the nearest point of
/// E lies within 2r as soon as E∩B is nonempty, so distances from B to E∩3B are exact.
struct LocalSet {
    inner: Vec<Point>,
    near: PointCloud,
    slack: f64,
}

impl LocalSet {
    fn new(cloud: &PointCloud, ball: &Ball, idx: &[usize], d: usize, cfg: &BetaConfig) -> Self {
        let inner = idx.iter().map(|&i| cloud.point(i).to_vec()).collect();
        let wide = Ball { center: ball.center.clone(), radius: 3.0 * ball.radius };
        let near = cloud.subset(&cloud.indices_in_ball(&wide));
        let slack = if cfg.resolution_correction { cloud.sampling_radius(d) } else { 0.0 };
        Self { inner, near, slack }
    }

    fn bbeta_at(&self, ball: &Ball, plane: &AffinePlane, grid: PlaneGrid) -> f64 {
        let g = plane.grid_in_ball(ball, grid.pitch_frac * ball.radius, grid.max_points);
        if g.is_empty() {
            return f64::INFINITY;
        }
        let s1 = self.inner.iter().map(|x| plane.dist(x)).fold(0.0, f64::max);
        let s2 = g.iter().map(|y| (self.near.dist_to(y) - self.slack).max(0.0)).fold(0.0, f64::max);
        s1.max(s2) * 2.0 / ball.diam()
    }
}

pub fn bbeta(cloud: &PointCloud, ball: &Ball, d: usize, cfg: &BetaConfig) -> Result<BetaValue> {
    let prep = prepare(cloud, ball, d)?;
    let (start, normals) = match &prep.fit {
        Some(f) => (f.plane.clone(), f.normals.clone()),
        None => return Ok(degenerate_value(cloud, &prep, ball, d, BetaKind::Bbeta, None)),
    };
    let local = LocalSet::new(cloud, ball, &prep.idx, d, cfg);
    // the sup over the plane grid has wide plateaus (a far grid end pinned at distance r), so the
    // compass search starts from the best of a coarse set of turned and shifted planes
    let (start, normals) = plane_starts(&start, &normals, ball.radius, &ball.center)
        .into_iter()
        .map(|(p, ns)| (local.bbeta_at(ball, &p, cfg.search_grid), p, ns))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p, ns)| (p, ns))
        .expect("at least the initial plane");
    let res = refine_plane(start, normals, ball.radius, &ball.center, cfg.optimizer, |pl| {
        local.bbeta_at(ball, pl, cfg.search_grid)
    });
    let value = local.bbeta_at(ball, &res.plane, cfg.grid);
    Ok(BetaValue { value, plane: res.plane, kind: BetaKind::Bbeta, ball: ball.clone(), p: None, degenerate: prep.degenerate })
}

/// η(B, L) = (1/r)·sup over the grid of L ∩ B of dist(·, E).
pub fn eta_inf(cloud: &PointCloud, ball: &Ball, plane: &AffinePlane, grid: PlaneGrid) -> Result<f64> {
    if plane.ambient() != cloud.dim() {
        return Err(TstError::DimensionMismatch { expected: cloud.dim(), got: plane.ambient() });
    }
    let g = plane.grid_in_ball(ball, grid.pitch_frac * ball.radius, grid.max_points);
    if g.is_empty() {
        return Err(TstError::EmptyIntersection { side: crate::error::Side::Second });
    }
    let s = g.iter().map(|y| cloud.dist_to(y)).fold(0.0, f64::max);
    Ok(s / ball.radius)
}
