use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tstlab::beta::{beta_inf, BetaConfig};
use tstlab::datasets::{generate, koch_dimension, koch_length_ratio, koch_vertices, DatasetSpec, Family, FourierGraph};
use tstlab::experiment::{report_from_table, run_experiment, ExperimentConfig, TreeParams};
use tstlab::geometry::{dist, Ball, Point, PointCloud};
use tstlab::io::{cloud_from_binary, cloud_from_csv, cloud_to_binary, cloud_to_csv, read_cube_table, CubeRow};
use tstlab::multiscale::TstParams;

#[test]
fn koch_depth_zero_is_the_unit_segment() {
    let e = generate(&DatasetSpec::new(Family::Koch { angle_deg: 45.0, depth: 0 }, 2, 101, 0)).unwrap();
    assert_eq!(e.len(), 101);
    assert!(e.iter().all(|p| p[1] == 0.0 && (0.0..=1.0).contains(&p[0])));
    assert!((e.diameter() - 1.0).abs() < 1e-15);
    // polyline length grows by the ratio each generation
    for depth in 1..5 {
        let v = koch_vertices(30.0, depth);
        let len: f64 = v.windows(2).map(|w| dist(&w[0], &w[1])).sum();
        assert!((len - koch_length_ratio(30.0).powi(depth as i32)).abs() < 1e-12);
    }
    assert!((koch_dimension(60.0) - 4f64.ln() / 3f64.ln()).abs() < 1e-14);
}

#[test]
fn cantor_has_four_to_the_m_points() {
    for m in 0..6 {
        let e = generate(&DatasetSpec::new(Family::Cantor4 { depth: m }, 2, 0, 0)).unwrap();
        assert_eq!(e.len(), 4usize.pow(m as u32));
        let side = 0.25f64.powi(m as i32);
        // distinct cells: centres at least one cell side apart
        for i in 0..e.len().min(300) {
            for j in 0..i {
                assert!(dist(e.point(i), e.point(j)) >= side * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn graph_samples_respect_lambda() {
    for (lambda, modes, seed) in [(0.1, 6, 1), (0.3, 8, 2), (1.0, 3, 3)] {
        let e = generate(&DatasetSpec::new(Family::LipschitzGraph { lambda, length: 2.0, modes }, 2, 801, seed)).unwrap();
        let mut worst = 0.0f64;
        for i in 0..e.len() {
            for j in 0..i {
                let (a, b) = (e.point(i), e.point(j));
                worst = worst.max((a[1] - b[1]).abs() / (a[0] - b[0]).abs());
            }
        }
        assert!(worst <= lambda * (1.0 + 1e-9), "λ {lambda}: {worst}");
        // samples are the series itself
        let g = FourierGraph::new(lambda, 2.0, modes, seed);
        assert!(e.iter().all(|p| (p[1] - g.eval(p[0])).abs() < 1e-15));
    }
}

#[test]
fn cloud_formats_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let pts: Vec<Point> = (0..200).map(|_| (0..3).map(|_| rng.random_range(-1e3..1e3) * rng.random_range(0.0..1.0f64).powi(8)).collect()).collect();
    let cloud = PointCloud::from_points(&pts).unwrap();
    assert_eq!(cloud_from_csv(&cloud_to_csv(&cloud)).unwrap(), cloud);
    assert_eq!(cloud_from_binary(&cloud_to_binary(&cloud)).unwrap(), cloud);
    assert!(cloud_from_binary(b"NOPE").is_err());
}

#[test]
fn circle_beta_grows_linearly_with_radius() {
    let e = generate(&DatasetSpec::new(Family::Circle { radius: 1.0 }, 2, 20_000, 0)).unwrap();
    let cfg = BetaConfig::default();
    let radii = [0.02, 0.04, 0.08, 0.16];
    let logs: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let b = beta_inf(&e, &Ball::new(vec![1.0, 0.0], r).unwrap(), 1, &cfg).unwrap().value;
            (r.ln(), b.ln())
        })
        .collect();
    let n = logs.len() as f64;
    let (mx, my) = (logs.iter().map(|p| p.0).sum::<f64>() / n, logs.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.2, "{slope}");
}

fn small_experiment(family: Family, count: usize, depth: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DatasetSpec::new(family, 2, count, 3), TstParams { depth, ..TstParams::default() });
    cfg.tree = TreeParams { k_max: 11, ..TreeParams::default() };
    cfg
}

#[test]
fn segment_experiment_is_balanced() {
    let b = run_experiment(&small_experiment(Family::Segment { length: 1.0 }, 2049, 5)).unwrap();
    assert_eq!(b.summary.bwgl_count, 0);
    assert!((0.5..=2.0).contains(&b.summary.two_sided_ratio), "{}", b.summary.two_sided_ratio);
    assert!(b.summary.pass);
}

#[test]
fn truncation_equals_a_direct_run() {
    let family = Family::LipschitzGraph { lambda: 0.2, length: 1.0, modes: 5 };
    let deep = run_experiment(&small_experiment(family.clone(), 2049, 6)).unwrap();
    let direct = run_experiment(&small_experiment(family, 2049, 4)).unwrap();
    assert_eq!(deep.report.truncated(4), direct.report);
    assert_eq!(deep.report.truncated(9), deep.report);
}

#[test]
fn cantor_bwgl_keeps_growing() {
    let mut cfg = small_experiment(Family::Cantor4 { depth: 5 }, 0, 4);
    cfg.root_level = Some(1);
    let b = run_experiment(&cfg).unwrap();
    let inc: Vec<f64> = b.report.partial_bwgl.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(inc.iter().all(|&v| v > 0.0), "{:?}", b.report.partial_bwgl);
}

const FIXTURE: &str = "level,id,beta,bbeta,bwgl_flag,ell_d,term
2,0,0.11,0.01,0,1.0,0.01
3,1,0.06,0.6,1,0.5,0.02
3,2,0.01,0.03,0,0.5,0.005
";

#[test]
fn report_on_a_fixed_table() {
    let rows = read_cube_table(FIXTURE).unwrap();
    assert_eq!(rows[1], CubeRow { level: 3, id: 1, beta: 0.06, bbeta: 0.6, bwgl_flag: 1, ell_d: 0.5, term: 0.02 });
    let (hist, depth) = report_from_table(&rows);
    let hist: Vec<&str> = hist.lines().collect();
    assert_eq!(hist.len(), 1 + 2 * 2 * 21);
    let count = |kind: &str, level: usize, bin: usize| -> usize {
        let rows: Vec<&&str> = hist.iter().filter(|l| l.starts_with(&format!("{kind},{level},"))).collect();
        rows[bin].rsplit(',').next().unwrap().parse().unwrap()
    };
    assert_eq!(count("beta", 2, 4), 1);
    assert_eq!(count("beta", 3, 2), 1);
    assert_eq!(count("beta", 3, 0), 1);
    assert_eq!(count("bbeta", 3, 20), 1);
    assert!(hist.iter().any(|l| l.starts_with("bbeta,3,5.0000000000000000e-1,inf,1")));

    let parsed: Vec<Vec<f64>> =
        depth.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let expect = [[0.0, 2.0, 1.01, 0.0, 1.0, 1.01], [1.0, 3.0, 1.035, 0.5, 1.0, 1.535 / 1.5]];
    assert_eq!(parsed.len(), 2);
    for (row, e) in parsed.iter().zip(&expect) {
        for (a, b) in row.iter().zip(e) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0), "{row:?} vs {e:?}");
        }
    }
}
