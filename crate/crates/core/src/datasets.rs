//! Synthetic point clouds. Every generator is deterministic given its spec.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TstError};
use crate::geometry::{Point, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// [0, length]·e1.
    Segment { length: f64 },
    /// Circle of the given radius in the (e1, e2) plane, centred at the origin.
    Circle { radius: f64 },
    /// (x, g(x)), x ∈ [0, length], g a random Fourier series rescaled to be λ-Lipschitz.
    LipschitzGraph { lambda: f64, length: f64, modes: usize },
    /// Von Koch curve over [0,1]·e1 whose spikes rise at `angle_deg`, iterated `depth` times.
    Koch { angle_deg: f64, depth: usize },
    /// Centres of the 4^depth cells of the four-corner Cantor construction in [0,1]².
    Cantor4 { depth: usize },
    /// Lattice of [0, side]^d plus uniform noise in [−noise, noise] along e_{d+1}.
    PerturbedPlane { d: usize, side: f64, noise: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub family: Family,
    /// Ambient dimension.
    pub n: usize,
    /// Target sample count (ignored by cantor4).
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(family: Family, n: usize, count: usize, seed: u64) -> Self {
        Self { family, n, count, seed }
    }

    /// Intrinsic dimension of the generated set.
    pub fn intrinsic_dim(&self) -> usize {
        match self.family {
            Family::PerturbedPlane { d, .. } => d,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TstError::InvalidInput(m));
        let need_n = match self.family {
            Family::Segment { .. } => 1,
            Family::PerturbedPlane { d, .. } => d + 1,
            _ => 2,
        };
        if self.n < need_n.max(2) {
            return bad(format!("ambient dimension {} too small for {:?}", self.n, self.family));
        }
        if self.count < 2 && !matches!(self.family, Family::Cantor4 { .. }) {
            return bad("count must be at least 2".into());
        }
        match self.family {
            Family::Segment { length } if !(length > 0.0) => bad("segment length must be positive".into()),
            Family::Circle { radius } if !(radius > 0.0) => bad("circle radius must be positive".into()),
            Family::LipschitzGraph { lambda, length, modes } if !(lambda >= 0.0 && lambda <= 10.0 && length > 0.0 && modes >= 1 && modes <= 64) => {
                bad("lipschitz_graph needs 0 <= lambda <= 10, length > 0, 1 <= modes <= 64".into())
            }
            Family::Koch { angle_deg, depth } if !(angle_deg >= 0.0 && angle_deg < 90.0 && depth <= 10) => {
                bad("koch needs 0 <= angle < 90 degrees and depth <= 10".into())
            }
            Family::Cantor4 { depth } if depth > 10 => bad("cantor4 depth must be <= 10".into()),
            Family::PerturbedPlane { d, side, noise } if !(d >= 1 && d <= 3 && side > 0.0 && noise >= 0.0) => {
                bad("perturbed_plane needs 1 <= d <= 3, side > 0, noise >= 0".into())
            }
            _ => Ok(()),
        }
    }
}

fn embed(n: usize, coords: &[f64]) -> Point {
    let mut p = vec![0.0; n];
    p[..coords.len()].copy_from_slice(coords);
    p
}

/// The random series behind `lipschitz_graph`, exposed so tests can evaluate it off the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierGraph {
    pub length: f64,
    /// (amplitude, frequency index, phase)
    pub terms: Vec<(f64, f64, f64)>,
}

impl FourierGraph {
    pub fn new(lambda: f64, length: f64, modes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<(f64, f64, f64)> = (1..=modes)
            .map(|k| {
                let a = rng.random_range(-1.0..1.0f64) / (k * k) as f64;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (a, k as f64, phase)
            })
            .collect();
        let lip: f64 = raw.iter().map(|(a, k, _)| a.abs() * std::f64::consts::TAU * k / length).sum();
        let s = if lip > 0.0 { lambda / lip } else { 0.0 };
        Self { length, terms: raw.into_iter().map(|(a, k, p)| (a * s, k, p)).collect() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|(a, k, p)| a * (std::f64::consts::TAU * k * x / self.length + p).sin()).sum()
    }
}

/// Vertices of the depth-m Koch polyline from (0,0) to (1,0).
pub fn koch_vertices(angle_deg: f64, depth: usize) -> Vec<[f64; 2]> {
    let th = angle_deg.to_radians();
    let s = 1.0 / (2.0 * (1.0 + th.cos()));
    let mut pts = vec![[0.0, 0.0], [1.0, 0.0]];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(4 * pts.len());
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let v = [b[0] - a[0], b[1] - a[1]];
            let p1 = [a[0] + s * v[0], a[1] + s * v[1]];
            let p3 = [b[0] - s * v[0], b[1] - s * v[1]];
            // apex: rotate s·v by th about p1
            let (c, sn) = (th.cos(), th.sin());
            let p2 = [p1[0] + s * (c * v[0] - sn * v[1]), p1[1] + s * (sn * v[0] + c * v[1])];
            next.extend_from_slice(&[a, p1, p2, p3]);
        }
        next.push(*pts.last().expect("nonempty"));
        pts = next;
    }
    pts
}

/// Length growth per Koch generation, 4s with s = 1/(2(1 + cos θ)).
pub fn koch_length_ratio(angle_deg: f64) -> f64 {
    2.0 / (1.0 + angle_deg.to_radians().cos())
}

/// Similarity dimension log 4 / log(1/s).
pub fn koch_dimension(angle_deg: f64) -> f64 {
    let s = 1.0 / (2.0 * (1.0 + angle_deg.to_radians().cos()));
    4f64.ln() / (1.0 / s).ln()
}

pub fn generate(spec: &DatasetSpec) -> Result<PointCloud> {
    spec.validate()?;
    let n = spec.n;
    let m = spec.count;
    let pts: Vec<Point> = match spec.family {
        Family::Segment { length } => (0..m).map(|i| embed(n, &[length * i as f64 / (m - 1) as f64])).collect(),
        Family::Circle { radius } => (0..m)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / m as f64;
                embed(n, &[radius * t.cos(), radius * t.sin()])
            })
            .collect(),
        Family::LipschitzGraph { lambda, length, modes } => {
            let g = FourierGraph::new(lambda, length, modes, spec.seed);
            (0..m)
                .map(|i| {
                    let x = length * i as f64 / (m - 1) as f64;
                    embed(n, &[x, g.eval(x)])
                })
                .collect()
        }
        Family::Koch { angle_deg, depth } => {
            let v = koch_vertices(angle_deg, depth);
            let segs = v.len() - 1;
            let per = (m.saturating_sub(1) / segs).max(1);
            let mut out = Vec::with_capacity(segs * per + 1);
            for w in v.windows(2) {
                for j in 0..per {
                    let t = j as f64 / per as f64;
                    out.push(embed(n, &[w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])]));
                }
            }
            out.push(embed(n, &v[segs]));
            out
        }
        Family::Cantor4 { depth } => {
            let mut cells = vec![([0.0f64, 0.0f64], 1.0f64)];
            for _ in 0..depth {
                cells = cells
                    .into_iter()
                    .flat_map(|(lo, side)| {
                        let q = side / 4.0;
                        let far = side - q;
                        [[0.0, 0.0], [far, 0.0], [0.0, far], [far, far]]
                            .into_iter()
                            .map(move |o| ([lo[0] + o[0], lo[1] + o[1]], q))
                    })
                    .collect();
            }
            cells.iter().map(|(lo, side)| embed(n, &[lo[0] + side / 2.0, lo[1] + side / 2.0])).collect()
        }
        Family::PerturbedPlane { d, side, noise } => {
            let per = ((m as f64).powf(1.0 / d as f64).round() as usize).max(2);
            let total = per.pow(d as u32);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..total)
                .map(|mut t| {
                    let mut c: Vec<f64> = (0..d)
                        .map(|_| {
                            let v = side * (t % per) as f64 / (per - 1) as f64;
                            t /= per;
                            v
                        })
                        .collect();
                    c.push(if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 });
                    embed(n, &c)
                })
                .collect()
        }
    };
    PointCloud::from_points(&pts)
}
