use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tstlab::beta::{beta_dp, BetaConfig};
use tstlab::cubes::{cube_distance, CubeTarget, CubeTree};
use tstlab::datasets::{generate, DatasetSpec, Family};
use tstlab::experiment::{build_tree, TreeParams};
use tstlab::geometry::{dist, Point, PointCloud};
use tstlab::nets::{default_scale0, NetHierarchy};
use tstlab::stopping::build_stopping_time;

/// Greedy nets written out longhand: the same seeded scan order, linear search instead of a tree.
fn greedy_oracle(cloud: &PointCloud, rho: f64, k_max: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let s0 = default_scale0(cloud.diameter(), rho);
    let mut net: Vec<usize> = Vec::new();
    let mut sizes = Vec::new();
    for k in 0..=k_max {
        let s = s0 * rho.powi(k as i32);
        for &i in &order {
            if net.contains(&i) {
                continue;
            }
            if net.iter().all(|&j| dist(cloud.point(i), cloud.point(j)) >= s) {
                net.push(i);
            }
        }
        sizes.push(net.len());
    }
    sizes
}

#[test]
fn grid_net_sizes_match_greedy_oracle() {
    let pts: Vec<Point> = (0..100 * 100).map(|i| vec![(i % 100) as f64, (i / 100) as f64]).collect();
    let cloud = Arc::new(PointCloud::from_points(&pts).unwrap());
    let nets = NetHierarchy::build(cloud.clone(), 0.5, 8).unwrap();
    let sizes: Vec<usize> = nets.levels.iter().map(Vec::len).collect();
    assert_eq!(sizes, greedy_oracle(&cloud, 0.5, 8));
    // frozen from the oracle above
    assert_eq!(sizes, vec![1, 2, 4, 10, 33, 119, 468, 1934, 10000]);
}

/// Number of violated cube or net axioms, by exhaustive pairwise checks.
fn violations(tree: &CubeTree) -> usize {
    let cloud = tree.cloud().clone();
    let npts = cloud.len();
    let mut bad = 0;
    let mut owners: Vec<Vec<usize>> = Vec::new();
    for (k, ids) in tree.levels.iter().enumerate() {
        let s = tree.nets.scale(k);
        let net = &tree.nets.levels[k];
        for (a, &i) in net.iter().enumerate() {
            bad += net[..a].iter().filter(|&&j| dist(cloud.point(i), cloud.point(j)) < s).count();
        }
        bad += (0..npts).filter(|&p| !net.iter().any(|&i| i == p || dist(cloud.point(i), cloud.point(p)) < s)).count();
        let ell = tree.side(k);
        let mut owner = vec![usize::MAX; npts];
        for &id in ids {
            let q = &tree.cubes[id];
            bad += usize::from(!net.contains(&q.center));
            for &p in &q.members {
                bad += usize::from(owner[p] != usize::MAX);
                owner[p] = id;
                bad += usize::from(dist(tree.center(id), cloud.point(p)) > ell);
            }
        }
        bad += owner.iter().filter(|&&o| o == usize::MAX).count();
        for &id in ids {
            let x = tree.center(id);
            bad += (0..npts).filter(|&p| dist(x, cloud.point(p)) <= tree.c0 * ell && owner[p] != id).count();
        }
        owners.push(owner);
    }
    // intersecting cubes are nested, across every pair of levels
    for j in 0..owners.len() {
        for k in j + 1..owners.len() {
            for &id in &tree.levels[k] {
                let m = &tree.cubes[id].members;
                bad += usize::from(m.iter().any(|&p| owners[j][p] != owners[j][m[0]]));
            }
        }
    }
    bad
}

#[test]
fn random_cloud_in_r4_satisfies_cube_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pts: Vec<Point> = (0..500).map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let tree = build_tree(PointCloud::from_points(&pts).unwrap(), &TreeParams { k_max: 8, ..TreeParams::default() }).unwrap();
    tree.check().unwrap();
    assert_eq!(violations(&tree), 0);
}

#[test]
fn segment_cube_counts_follow_the_scale() {
    let pts: Vec<Point> = (0..=1024).map(|i| vec![i as f64 / 1024.0, 0.0]).collect();
    let tree = build_tree(PointCloud::from_points(&pts).unwrap(), &TreeParams { k_max: 10, ..TreeParams::default() }).unwrap();
    for (k, &c) in tree.level_counts().iter().enumerate() {
        let target = 2f64.powi(k as i32);
        assert!(c as f64 >= target / 5.0 && c as f64 <= 5.0 * target, "level {k}: {c}");
    }
}

fn graph_tree(count: usize, k_max: usize) -> CubeTree {
    let cloud = generate(&DatasetSpec::new(Family::LipschitzGraph { lambda: 0.3, length: 2.0, modes: 6 }, 2, count, 4)).unwrap();
    build_tree(cloud, &TreeParams { k_max, ..TreeParams::default() }).unwrap()
}

#[test]
fn cube_distance_inequality_and_lipschitz() {
    let tree = graph_tree(1025, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let all: Vec<usize> = (0..tree.cubes.len()).collect();
    assert_eq!(cube_distance(&tree, CubeTarget::Cube(0), &[]), f64::INFINITY);
    for _ in 0..300 {
        let family: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..all.len())).collect();
        let (q, q2) = (rng.random_range(0..all.len()), rng.random_range(0..all.len()));
        let lhs = cube_distance(&tree, CubeTarget::Cube(q), &family);
        let rhs = 2.0 * tree.ell(q) + tree.dist_cubes(q, q2) + 2.0 * tree.ell(q2) + cube_distance(&tree, CubeTarget::Cube(q2), &family);
        assert!(lhs <= rhs + 1e-12);
        // x in R gives at most ℓ(R)
        let r = family[0];
        let x: Point = tree.cloud().point(tree.cubes[r].members[0]).to_vec();
        assert!(cube_distance(&tree, CubeTarget::Point(&x), &family) <= tree.ell(r) + 1e-12);
        // 1-Lipschitz in x
        let y: Point = x.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
        let dx = cube_distance(&tree, CubeTarget::Point(&x), &family);
        let dy = cube_distance(&tree, CubeTarget::Point(&y), &family);
        assert!((dx - dy).abs() <= dist(&x, &y) + 1e-12);
    }
}

/// Region of `top`: a child is in iff its parent is and every sibling passes `keep`.
fn region_oracle(tree: &CubeTree, q: usize, keep: &dyn Fn(usize) -> bool, out: &mut BTreeSet<usize>) {
    out.insert(q);
    let kids = &tree.cubes[q].children;
    if !kids.is_empty() && kids.iter().all(|&c| keep(c)) {
        for &c in kids {
            region_oracle(tree, c, keep, out);
        }
    }
}

#[test]
fn stopping_time_matches_recursion() {
    let tree = graph_tree(1025, 8);
    let cfg = BetaConfig::default();
    let cloud = tree.cloud().clone();
    let betas: Vec<f64> = (0..tree.cubes.len())
        .map(|q| beta_dp(&cloud, &tree.ball(q).scaled(2.0), 1, 1.0, None, &cfg).map(|b| b.value).unwrap_or(f64::INFINITY))
        .collect();
    for top in [tree.levels[2][0], tree.levels[3][1]] {
        for lambda in [0.0, 0.01, 0.03, f64::INFINITY] {
            let keep = |q: usize| betas[q] < lambda;
            let s = build_stopping_time(&tree, top, keep);
            let mut expect = BTreeSet::new();
            region_oracle(&tree, top, &keep, &mut expect);
            assert_eq!(s.members, expect, "λ = {lambda}");
            let minimal: BTreeSet<usize> = s.minimal.iter().copied().collect();
            let oracle_min: BTreeSet<usize> =
                expect.iter().copied().filter(|&q| !tree.cubes[q].children.iter().any(|c| expect.contains(c))).collect();
            assert_eq!(minimal, oracle_min);
        }
    }
}
