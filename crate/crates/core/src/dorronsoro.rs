//! Ω-numbers of sampled functions R^d → R^m: best affine approximation on balls in L^p
//! (lattice quadrature), dyadic Ω sums, and two bridges to β-numbers.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::beta_dp;
use crate::beta::BetaConfig;
use crate::error::{Result, TstError};
use crate::geometry::{dist, dist2, AffinePlane, Ball, Point, PointCloud};

/// Samples of f on a regular lattice of pitch `pitch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub d: usize,
    pub m: usize,
    pub pitch: f64,
    pub xs: Vec<Point>,
    pub values: Vec<Point>,
    pub lipschitz: Option<f64>,
    /// Diameter of the bounding box of the samples where f ≠ 0.
    pub support_diam: f64,
    /// Lower corner and side of the bounding cube of the support.
    pub support_lo: Point,
    pub support_side: f64,
}

/// All pairs up to this many samples; above it only lattice-neighbour pairs are checked.
const PAIRWISE_LIMIT: usize = 6_000;

impl SampledFunction {
    pub fn new(d: usize, xs: Vec<Point>, values: Vec<Point>, lipschitz: Option<f64>) -> Result<Self> {
        if d == 0 {
            return Err(TstError::InvalidInput("domain dimension must be positive".into()));
        }
        if xs.is_empty() || xs.len() != values.len() {
            return Err(TstError::InvalidInput("need equally many (nonzero) sites and values".into()));
        }
        let m = values[0].len();
        if m == 0 {
            return Err(TstError::InvalidInput("codomain dimension must be positive".into()));
        }
        for (x, v) in xs.iter().zip(&values) {
            if x.len() != d {
                return Err(TstError::DimensionMismatch { expected: d, got: x.len() });
            }
            if v.len() != m {
                return Err(TstError::DimensionMismatch { expected: m, got: v.len() });
            }
            if x.iter().chain(v).any(|t| !t.is_finite()) {
                return Err(TstError::InvalidInput("non-finite sample".into()));
            }
        }
        let pitch = lattice_pitch(&xs)?;
        let nonzero: Vec<&Point> = xs.iter().zip(&values).filter(|(_, v)| v.iter().any(|&t| t != 0.0)).map(|p| p.0).collect();
        let (support_lo, support_side, support_diam) = if nonzero.is_empty() {
            (xs[0].clone(), 0.0, 0.0)
        } else {
            let lo: Point = (0..d).map(|i| nonzero.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min)).collect();
            let hi: Point = (0..d).map(|i| nonzero.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
            let side = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            (lo.clone(), side, dist(&lo, &hi))
        };
        let f = Self { d, m, pitch, xs, values, lipschitz, support_diam, support_lo, support_side };
        if let Some(l) = lipschitz {
            let emp = f.empirical_lipschitz();
            if emp > l * 1.01 {
                return Err(TstError::InvalidInput(format!("empirical Lipschitz ratio {emp} exceeds declared {l}")));
            }
        }
        Ok(f)
    }

    /// Samples f on {lo + pitch·i : 0 ≤ i_t < count} in every axis.
    pub fn from_fn<F>(d: usize, lo: &[f64], pitch: f64, count: usize, lipschitz: Option<f64>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Point,
    {
        if lo.len() != d || !(pitch > 0.0) || count == 0 {
            return Err(TstError::InvalidInput("bad lattice description".into()));
        }
        let total = count
            .checked_pow(d as u32)
            .filter(|&t| t <= 20_000_000)
            .ok_or_else(|| TstError::InvalidInput("lattice too large".into()))?;
        let xs: Vec<Point> = (0..total)
            .map(|mut t| {
                (0..d)
                    .map(|i| {
                        let v = lo[i] + (t % count) as f64 * pitch;
                        t /= count;
                        v
                    })
                    .collect()
            })
            .collect();
        let values = xs.iter().map(|x| f(x)).collect();
        Self::new(d, xs, values, lipschitz)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// max |f(x) − f(y)|/|x − y| over all pairs, or over lattice neighbours for large samples.
    pub fn empirical_lipschitz(&self) -> f64 {
        let n = self.len();
        let ratio = |i: usize, j: usize| {
            let a = dist(&self.xs[i], &self.xs[j]);
            if a > 0.0 {
                dist(&self.values[i], &self.values[j]) / a
            } else {
                0.0
            }
        };
        if n <= PAIRWISE_LIMIT {
            (0..n).into_par_iter().map(|i| ((i + 1)..n).map(|j| ratio(i, j)).fold(0.0, f64::max)).reduce(|| 0.0, f64::max)
        } else {
            let cloud = self.domain_cloud();
            let reach = self.pitch * (self.d as f64).sqrt() * 1.0001;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let ball = Ball { center: self.xs[i].clone(), radius: reach };
                    cloud.indices_in_ball(&ball).into_iter().map(|j| ratio(i, j)).fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max)
        }
    }

    fn domain_cloud(&self) -> PointCloud {
        PointCloud::from_points(&self.xs).expect("validated samples")
    }

    fn indices_in(&self, ball: &Ball) -> Vec<usize> {
        let r2 = ball.radius * ball.radius * (1.0 + 1e-12);
        (0..self.len()).filter(|&i| dist2(&self.xs[i], &ball.center) <= r2).collect()
    }

    /// The lattice points whose image lies in `target`.
    pub fn preimage(&self, target: &Ball) -> Vec<usize> {
        (0..self.len()).filter(|&i| target.contains(&self.values[i])).collect()
    }
}

fn lattice_pitch(xs: &[Point]) -> Result<f64> {
    let d = xs[0].len();
    let mut pitch = f64::INFINITY;
    let mut lo = vec![f64::INFINITY; d];
    for i in 0..d {
        let mut v: Vec<f64> = xs.iter().map(|x| x[i]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        lo[i] = v[0];
        let scale = v[v.len() - 1].abs().max(v[0].abs()).max(1.0);
        for w in v.windows(2) {
            let g = w[1] - w[0];
            if g > 1e-9 * scale {
                pitch = pitch.min(g);
            }
        }
    }
    if !pitch.is_finite() {
        // one site per axis: any pitch works
        return Ok(1.0);
    }
    for x in xs {
        for i in 0..d {
            let t = (x[i] - lo[i]) / pitch;
            if (t - t.round()).abs() > 1e-6 {
                return Err(TstError::InvalidInput(format!("sample {x:?} is off the lattice of pitch {pitch}")));
            }
        }
    }
    Ok(pitch)
}

/// x ↦ offset + linear·x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: Point,
    /// m rows of length d.
    pub linear: Vec<Point>,
}

impl AffineMap {
    pub fn zero(d: usize, m: usize) -> Self {
        Self { offset: vec![0.0; m], linear: vec![vec![0.0; d]; m] }
    }

    pub fn eval(&self, x: &[f64]) -> Point {
        self.offset.iter().zip(&self.linear).map(|(o, row)| o + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect()
    }

    fn from_coef(coef: &DMatrix<f64>, center: &[f64]) -> Self {
        // coef is (d+1)×m in centred coordinates
        let d = coef.nrows() - 1;
        let m = coef.ncols();
        let linear: Vec<Point> = (0..m).map(|c| (0..d).map(|i| coef[(i + 1, c)]).collect()).collect();
        let offset: Point = (0..m)
            .map(|c| coef[(0, c)] - linear[c].iter().zip(center).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Self { offset, linear }
    }

    /// The image plane A(R^d) through A(x), when the linear part has full rank d.
    pub fn image_plane(&self, x: &[f64]) -> Result<AffinePlane> {
        let d = x.len();
        let cols: Vec<Point> = (0..d).map(|i| self.linear.iter().map(|row| row[i]).collect()).collect();
        AffinePlane::from_spanning(self.eval(x), &cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaValue {
    pub value: f64,
    /// None for p = ∞.
    pub p: Option<f64>,
    pub witness: AffineMap,
    pub degenerate: bool,
    pub samples: usize,
    pub pitch: f64,
}

fn residual_norms(f: &SampledFunction, idx: &[usize], a: &AffineMap) -> Vec<f64> {
    idx.iter().map(|&i| dist(&f.values[i], &a.eval(&f.xs[i]))).collect()
}

/// (average of (|f − A|/r)^p)^{1/p}, or the sup for p = None.
fn omega_value(res: &[f64], r: f64, p: Option<f64>) -> f64 {
    match p {
        None => res.iter().copied().fold(0.0, f64::max) / r,
        Some(p) => {
            let s: f64 = res.iter().map(|v| (v / r).powf(p)).sum();
            (s / res.len() as f64).powf(1.0 / p)
        }
    }
}

/// Ω at a fixed affine map.
pub fn omega_at(f: &SampledFunction, ball: &Ball, p: Option<f64>, a: &AffineMap) -> Result<f64> {
    let idx = f.indices_in(ball);
    if idx.is_empty() {
        return Err(TstError::EmptyIntersection { side: crate::error::Side::First });
    }
    Ok(omega_value(&residual_norms(f, &idx, a), ball.radius, p))
}

struct Design {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    rank: usize,
}

fn design(f: &SampledFunction, idx: &[usize], center: &[f64], r: f64) -> Design {
    let k = idx.len();
    let d = f.d;
    // centred and scaled columns keep the normal equations well conditioned
    let x = DMatrix::from_fn(k, d + 1, |row, col| if col == 0 { 1.0 } else { (f.xs[idx[row]][col - 1] - center[col - 1]) / r });
    let y = DMatrix::from_fn(k, f.m, |row, col| f.values[idx[row]][col]);
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1e-300)).count();
    Design { x, y, rank }
}

fn weighted_lsq(des: &Design, w: &[f64]) -> Option<DMatrix<f64>> {
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let xw = DMatrix::from_fn(des.x.nrows(), des.x.ncols(), |i, j| des.x[(i, j)] * sw[i]);
    let yw = DMatrix::from_fn(des.y.nrows(), des.y.ncols(), |i, j| des.y[(i, j)] * sw[i]);
    xw.svd(true, true).solve(&yw, 1e-13).ok()
}

fn to_map(coef: &DMatrix<f64>, center: &[f64], r: f64) -> AffineMap {
    let mut c = coef.clone();
    for i in 1..c.nrows() {
        for j in 0..c.ncols() {
            c[(i, j)] /= r;
        }
    }
    AffineMap::from_coef(&c, center)
}

/// Ω_{f,p}(B). `p = None` is p = ∞. p = 2 is exact least squares, other finite p use
/// iteratively reweighted least squares from the p = 2 witness, and p = ∞ uses Lawson's
/// reweighting towards the Chebyshev fit.
pub fn omega_p(f: &SampledFunction, ball: &Ball, p: Option<f64>) -> Result<OmegaValue> {
    if ball.dim() != f.d {
        return Err(TstError::DimensionMismatch { expected: f.d, got: ball.dim() });
    }
    if let Some(p) = p {
        if !(p >= 1.0) {
            return Err(TstError::InvalidInput(format!("p must be >= 1, got {p}")));
        }
    }
    let idx = f.indices_in(ball);
    if idx.len() < f.d + 1 {
        return Err(TstError::Precondition(format!("{} samples in the ball, need at least {}", idx.len(), f.d + 1)));
    }
    let r = ball.radius;
    let des = design(f, &idx, &ball.center, r);
    let k = idx.len();
    if des.rank < f.d + 1 {
        return Ok(OmegaValue { value: 0.0, p, witness: AffineMap::zero(f.d, f.m), degenerate: true, samples: k, pitch: f.pitch });
    }
    let ls = weighted_lsq(&des, &vec![1.0; k]).ok_or_else(|| TstError::InvalidInput("least squares failed".into()))?;
    let mut best = to_map(&ls, &ball.center, r);
    let mut best_val = omega_value(&residual_norms(f, &idx, &best), r, p);
    let scale = des.y.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    match p {
        Some(pp) if (pp - 2.0).abs() < 1e-15 => {}
        Some(pp) => {
            // damped for p > 2, where the plain iteration oscillates
            let step = if pp > 2.0 { 1.0 / (pp - 1.0) } else { 1.0 };
            let mut coef = ls.clone();
            let mut prev = best_val;
            for _ in 0..500 {
                let map = to_map(&coef, &ball.center, r);
                let res = residual_norms(f, &idx, &map);
                let floor = 1e-12 * scale;
                let w: Vec<f64> = res.iter().map(|v| v.max(floor).powf(pp - 2.0)).collect();
                let Some(c) = weighted_lsq(&des, &w) else { break };
                coef = &coef + (c - &coef) * step;
                let map = to_map(&coef, &ball.center, r);
                let v = omega_value(&residual_norms(f, &idx, &map), r, p);
                if v < best_val {
                    best_val = v;
                    best = map;
                }
                if (prev - v).abs() <= 1e-13 * prev.max(1e-300) {
                    break;
                }
                prev = v;
            }
        }
        None => {
            let mut w = vec![1.0 / k as f64; k];
            let mut stall = 0;
            for _ in 0..2_000 {
                let Some(c) = weighted_lsq(&des, &w) else { break };
                let map = to_map(&c, &ball.center, r);
                let res = residual_norms(f, &idx, &map);
                let v = omega_value(&res, r, None);
                if v < best_val * (1.0 - 1e-10) {
                    best_val = v;
                    best = map;
                    stall = 0;
                } else {
                    stall += 1;
                    if stall > 50 {
                        break;
                    }
                }
                let mut s = 0.0;
                for (wi, ri) in w.iter_mut().zip(&res) {
                    *wi *= ri;
                    s += *wi;
                }
                if !(s > 0.0) {
                    break;
                }
                w.iter_mut().for_each(|v| *v /= s);
            }
        }
    }
    Ok(OmegaValue { value: best_val, p, witness: best, degenerate: false, samples: k, pitch: f.pitch })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaCube {
    pub level: usize,
    /// Multi-index of the dyadic cube at its level.
    pub index: Vec<usize>,
    pub ell: f64,
    /// Ω_{f,p}(3B_I).
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub p: f64,
    pub depth: usize,
    pub pitch: f64,
    pub cubes: Vec<OmegaCube>,
    /// Σ Ω² ℓ^d.
    pub sum_sq: f64,
    /// Σ Ω^p ℓ^d.
    pub sum_p: f64,
    /// Σ Ω² ℓ^d restricted to each level.
    pub level_sq: Vec<f64>,
    pub diam_support: f64,
    pub lipschitz: f64,
    /// sum_sq / (diam^d · Lip²).
    pub ratio_sq: f64,
    pub ratio_p: f64,
}

/// Dyadic cubes I of the support cube down to `depth` levels; B_I is the ball at the centre of I
/// with radius ℓ(I)/2, so 3B_I has radius 1.5·ℓ(I). Cubes with fewer than d+1 samples in 3B_I are
/// skipped.
pub fn omega_sum(f: &SampledFunction, p: f64, depth: usize) -> Result<OmegaReport> {
    if depth < 1 {
        return Err(TstError::InvalidInput("depth must be at least 1".into()));
    }
    if !(p >= 1.0) {
        return Err(TstError::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    let d = f.d;
    let lip = f.lipschitz.unwrap_or_else(|| f.empirical_lipschitz());
    let mut jobs: Vec<(usize, Vec<usize>)> = Vec::new();
    if f.support_side > 0.0 {
        for level in 0..=depth {
            let per = 1usize << level;
            let total = per.pow(d as u32);
            for mut t in 0..total {
                let index: Vec<usize> = (0..d)
                    .map(|_| {
                        let v = t % per;
                        t /= per;
                        v
                    })
                    .collect();
                jobs.push((level, index));
            }
        }
    }
    let cubes: Vec<OmegaCube> = jobs
        .par_iter()
        .filter_map(|(level, index)| {
            let ell = f.support_side / (1u64 << level) as f64;
            let center: Point = index.iter().zip(&f.support_lo).map(|(&i, lo)| lo + (i as f64 + 0.5) * ell).collect();
            let ball = Ball { center, radius: 1.5 * ell };
            match omega_p(f, &ball, Some(p)) {
                Ok(v) => Some(Ok(OmegaCube { level: *level, index: index.clone(), ell, omega: v.value })),
                Err(TstError::Precondition(_)) => None,
                Err(e) => Some(Err(e)),
            }
        })
        .collect::<Result<_>>()?;
    let dd = d as i32;
    let mut level_sq = vec![0.0; depth + 1];
    let mut sum_p = 0.0;
    for c in &cubes {
        level_sq[c.level] += c.omega * c.omega * c.ell.powi(dd);
        sum_p += c.omega.powf(p) * c.ell.powi(dd);
    }
    let sum_sq: f64 = level_sq.iter().sum();
    let norm = f.support_diam.powi(dd) * lip * lip;
    let (ratio_sq, ratio_p) = if norm > 0.0 { (sum_sq / norm, sum_p / norm) } else { (0.0, 0.0) };
    Ok(OmegaReport {
        p,
        depth,
        pitch: f.pitch,
        cubes,
        sum_sq,
        sum_p,
        level_sq,
        diam_support: f.support_diam,
        lipschitz: lip,
        ratio_sq,
        ratio_p,
    })
}

/// (Ω_{f,∞}(½B), Ω_{f,1}(B)^{1/(d+1)}) for f declared L-bi-Lipschitz on B.
pub fn omega_infty_bound_check(f: &SampledFunction, ball: &Ball, bilip: f64) -> Result<(f64, f64)> {
    if !(bilip >= 1.0) {
        return Err(TstError::InvalidInput(format!("bi-Lipschitz constant must be >= 1, got {bilip}")));
    }
    let idx = f.indices_in(ball);
    let lower = idx
        .par_iter()
        .enumerate()
        .map(|(a, &i)| {
            idx[a + 1..]
                .iter()
                .map(|&j| dist(&f.values[i], &f.values[j]) / dist(&f.xs[i], &f.xs[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    if lower < 1.0 / (2.0 * bilip) {
        return Err(TstError::InvalidInput(format!("lower Lipschitz ratio {lower} below 1/(2L)")));
    }
    let lhs = omega_p(f, &ball.scaled(0.5), None)?.value;
    let rhs = omega_p(f, ball, Some(1.0))?.value.powf(1.0 / (f.d as f64 + 1.0));
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaOmegaBound {
    /// β^{d,p}_Σ(B(x,r)) at the image plane of the Ω witness.
    pub beta: f64,
    /// (|B|/r^d)^{1/p}·Ω_{f,p}(B).
    pub bound: f64,
    pub omega: f64,
}

/// Σ = f(lattice) ⊂ R^m; `domain` is the ball B ⊂ R^d that must contain the preimage of Σ ∩ B(x,r).
pub fn beta_from_omega(
    f: &SampledFunction,
    x: &[f64],
    r: f64,
    p: f64,
    domain: &Ball,
    cfg: &BetaConfig,
) -> Result<BetaOmegaBound> {
    if f.m <= f.d {
        return Err(TstError::InvalidInput("need m > d so that Σ has a d-plane to compare with".into()));
    }
    let target = Ball::new(x.to_vec(), r)?;
    let pre = f.preimage(&target);
    if pre.is_empty() {
        return Err(TstError::EmptyIntersection { side: crate::error::Side::First });
    }
    if let Some(&i) = pre.iter().find(|&&i| !domain.contains(&f.xs[i])) {
        return Err(TstError::InvalidInput(format!("preimage sample {:?} lies outside the domain ball", f.xs[i])));
    }
    let om = omega_p(f, domain, Some(p))?;
    let plane = om.witness.image_plane(&domain.center)?;
    let sigma = PointCloud::from_points(&f.values)?;
    let beta = beta_dp(&sigma, &target, f.d, p, Some(&plane), cfg)?.value;
    let vol = unit_ball_volume(f.d) * domain.radius.powi(f.d as i32);
    let bound = (vol / r.powi(f.d as i32)).powf(1.0 / p) * om.value;
    Ok(BetaOmegaBound { beta, bound, omega: om.value })
}

fn unit_ball_volume(d: usize) -> f64 {
    // ω_0 = 1, ω_1 = 2, ω_d = 2π/d · ω_{d−2}
    let mut w = [1.0, 2.0];
    for k in 2..=d {
        w[k % 2] *= 2.0 * std::f64::consts::PI / k as f64;
    }
    w[d % 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn off_lattice_rejected() {
        let xs = vec![vec![0.0], vec![1.0], vec![1.5], vec![2.2]];
        let vs = vec![vec![0.0]; 4];
        assert!(SampledFunction::new(1, xs, vs, None).is_err());
    }

    #[test]
    fn affine_map_eval() {
        let a = AffineMap { offset: vec![1.0, 2.0], linear: vec![vec![3.0], vec![-1.0]] };
        assert_eq!(a.eval(&[2.0]), vec![7.0, 0.0]);
    }
}
