//! Nested maximal separated nets.

use std::sync::Arc;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TstError};
use crate::geometry::{dist2, insertion_order, PointCloud};

#[derive(Debug, Clone)]
pub struct NetHierarchy {
    pub cloud: Arc<PointCloud>,
    pub rho: f64,
    pub scale0: f64,
    /// `levels[k]` lists cloud indices of X_k; X_k is a prefix of X_{k+1}.
    pub levels: Vec<Vec<usize>>,
    /// First level at which every point is (or coincides with) a net point.
    pub saturated_at: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetSummary {
    pub level: usize,
    pub scale: f64,
    pub size: usize,
}

/// Smallest power of rho strictly greater than `diam` (1 when diam = 0).
pub fn default_scale0(diam: f64, rho: f64) -> f64 {
    if diam <= 0.0 {
        return 1.0;
    }
    let mut s = 1.0;
    while s <= diam {
        s /= rho;
    }
    while s * rho > diam {
        s *= rho;
    }
    s
}

/// Nested greedy nets: each level is seeded with the previous one, then the cloud is scanned in a
/// fixed pseudo-random order and a point joins when its distance to the current net is at least
/// ρ^k·scale0. Points added at a level are listed in index order after the inherited ones.
pub(crate) fn greedy_levels(
    cloud: &PointCloud,
    rho: f64,
    scale0: f64,
    k_max: usize,
    stop_when_saturated: bool,
) -> (Vec<Vec<usize>>, Option<usize>) {
    let n = cloud.dim();
    let mut tree: KdTree<f64, usize, Vec<f64>> = KdTree::with_capacity(n, 16);
    let mut net: Vec<usize> = Vec::new();
    let mut is_net = vec![false; cloud.len()];
    let mut levels = Vec::with_capacity(k_max + 1);
    let mut saturated_at = None;
    let order = insertion_order(cloud.len());
    for k in 0..=k_max {
        let s = scale0 * rho.powi(k as i32);
        let s2 = s * s;
        let mut all_covered_exactly = true;
        let before = net.len();
        for &i in &order {
            if is_net[i] {
                continue;
            }
            let p = cloud.point(i);
            let near = tree.nearest(p, 1, &squared_euclidean).expect("valid query");
            let d2 = near.first().map(|&(_, &j)| dist2(p, cloud.point(j))).unwrap_or(f64::INFINITY);
            if d2 >= s2 {
                tree.add(p.to_vec(), i).expect("finite point");
                net.push(i);
                is_net[i] = true;
            } else if d2 > 0.0 {
                all_covered_exactly = false;
            }
        }
        net[before..].sort_unstable();
        levels.push(net.clone());
        if all_covered_exactly && saturated_at.is_none() {
            saturated_at = Some(k);
            if stop_when_saturated {
                break;
            }
        }
    }
    (levels, saturated_at)
}

impl NetHierarchy {
    pub fn build(cloud: Arc<PointCloud>, rho: f64, k_max: usize) -> Result<Self> {
        let s0 = default_scale0(cloud.diameter(), rho);
        Self::build_with_scale(cloud, rho, k_max, s0)
    }

    pub fn build_with_scale(cloud: Arc<PointCloud>, rho: f64, k_max: usize, scale0: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(TstError::InvalidInput(format!("rho must lie in (0,1), got {rho}")));
        }
        if cloud.is_empty() {
            return Err(TstError::InvalidInput("cannot build nets on an empty cloud".into()));
        }
        if !(scale0 > 0.0) {
            return Err(TstError::InvalidInput("scale0 must be positive".into()));
        }
        let (levels, saturated_at) = greedy_levels(&cloud, rho, scale0, k_max, false);
        Ok(Self { cloud, rho, scale0, levels, saturated_at })
    }

    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    /// Separation scale ρ^k·scale0.
    pub fn scale(&self, k: usize) -> f64 {
        self.scale0 * self.rho.powi(k as i32)
    }

    pub fn saturated(&self) -> bool {
        self.saturated_at.is_some()
    }

    pub fn summary(&self) -> Vec<NetSummary> {
        self.levels
            .iter()
            .enumerate()
            .map(|(k, l)| NetSummary { level: k, scale: self.scale(k), size: l.len() })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale0_is_next_power() {
        assert_eq!(default_scale0(0.9, 0.5), 1.0);
        assert_eq!(default_scale0(1.0, 0.5), 2.0);
        assert_eq!(default_scale0(0.3, 0.5), 0.5);
        assert_eq!(default_scale0(0.0, 0.5), 1.0);
    }

    #[test]
    fn single_point() {
        let c = Arc::new(PointCloud::from_points(&[vec![1.0, 2.0]]).unwrap());
        let h = NetHierarchy::build(c, 0.5, 4).unwrap();
        assert!(h.levels.iter().all(|l| l == &vec![0]));
        assert_eq!(h.saturated_at, Some(0));
    }

    #[test]
    fn two_points_boundary() {
        let c = Arc::new(PointCloud::from_points(&[vec![0.0], vec![1.0]]).unwrap());
        let h = NetHierarchy::build_with_scale(c, 0.5, 2, 1.0).unwrap();
        assert_eq!(h.levels[0], vec![0, 1]);
    }
}
