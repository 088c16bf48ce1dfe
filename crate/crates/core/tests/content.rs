use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tstlab::choquet::{choquet_integral, choquet_on, ChoquetConfig, ChoquetRange};
use tstlab::content::{content_of_indices, hausdorff_content};
use tstlab::geometry::{Ball, Point, PointCloud};

#[test]
fn unit_segment_content_is_its_length() {
    let pts: Vec<Point> = (0..=4096).map(|i| vec![i as f64 / 4096.0, 0.0]).collect();
    let cloud = PointCloud::from_points(&pts).unwrap();
    let v = hausdorff_content(&cloud, 1.0, &Ball::new(vec![0.5, 0.0], 0.75).unwrap()).unwrap().value;
    assert!((0.9..=1.1).contains(&v), "{v}");
}

#[test]
fn unit_square_content_is_sandwiched() {
    let pts: Vec<Point> = (0..256 * 256).map(|i| vec![(i % 256) as f64 / 255.0, (i / 256) as f64 / 255.0]).collect();
    let cloud = PointCloud::from_points(&pts).unwrap();
    let v = hausdorff_content(&cloud, 2.0, &Ball::new(vec![0.5, 0.5], 0.8).unwrap()).unwrap().value;
    assert!((0.5..=2.0).contains(&v), "{v}");
}

#[test]
fn content_is_monotone_under_inclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let m = rng.random_range(5..400);
        let pts: Vec<Point> = (0..m).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let all: Vec<usize> = (0..m).collect();
        let some: Vec<usize> = all.iter().copied().filter(|_| rng.random_range(0.0..1.0) < 0.5).collect();
        for d in [0.5, 1.0, 2.0] {
            let big = content_of_indices(&cloud, &all, d).value;
            let small = content_of_indices(&cloud, &some, d).value;
            assert!(small <= big * (1.0 + 1e-9), "d {d}: {small} > {big}");
        }
    }
}

/// ∫_0^2 H({f > t}) t^{p−1} dt by a 10^5-point midpoint rule.
fn quadrature(cloud: &PointCloud, f: &[f64], d: f64, p: f64) -> f64 {
    let steps = 100_000;
    let h = 2.0 / steps as f64;
    // H is constant between consecutive distinct values, so cache per superlevel set
    let mut sorted: Vec<f64> = f.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let level_content = |t: f64| {
        let idx: Vec<usize> = (0..f.len()).filter(|&i| f[i] > t).collect();
        if idx.is_empty() {
            0.0
        } else {
            content_of_indices(cloud, &idx, d).value
        }
    };
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    for s in 0..steps {
        let t = (s as f64 + 0.5) * h;
        let key = sorted.iter().copied().find(|&v| v > t).unwrap_or(f64::INFINITY);
        let c = match cache.iter().find(|(k, _)| *k == key) {
            Some(&(_, c)) => c,
            None => {
                let c = level_content(t);
                cache.push((key, c));
                c
            }
        };
        total += c * t.powf(p - 1.0) * h;
    }
    total
}

#[test]
fn choquet_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..5 {
        let pts: Vec<Point> = (0..10).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        // values on the t-grid so the midpoint rule is exact cell by cell
        let f: Vec<f64> = (0..10).map(|_| rng.random_range(1..=100_000u32) as f64 * 2e-5).collect();
        let idx: Vec<usize> = (0..10).collect();
        for d in [1.0, 2.0] {
            let exact = choquet_on(&cloud, &idx, &f, d, ChoquetConfig { p: 2.0, range: ChoquetRange::Full }).unwrap();
            let q = quadrature(&cloud, &f, d, 2.0);
            assert!((exact - q).abs() <= 1e-6 * exact.abs(), "{exact} vs {q}");
        }
    }
}

#[test]
fn constant_function_gives_content() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let pts: Vec<Point> = (0..200).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let cloud = PointCloud::from_points(&pts).unwrap();
    let ball = Ball::new(vec![0.5, 0.5], 0.4).unwrap();
    let h = hausdorff_content(&cloud, 1.0, &ball).unwrap().value;
    for alpha in [0.3, 1.0, 2.5] {
        let v = choquet_integral(&cloud, &ball, 1.0, ChoquetConfig { p: 1.0, range: ChoquetRange::Full }, |_| alpha).unwrap();
        assert!((v - alpha * h).abs() <= 1e-12 * alpha * h.max(1.0));
    }
    // the unit range caps the threshold at 1
    let v = choquet_integral(&cloud, &ball, 1.0, ChoquetConfig { p: 1.0, range: ChoquetRange::Unit }, |_| 2.5).unwrap();
    assert!((v - h).abs() <= 1e-12 * h.max(1.0));
}
