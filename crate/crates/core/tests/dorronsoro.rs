use tstlab::beta::BetaConfig;
use tstlab::dorronsoro::{
    beta_from_omega, omega_at, omega_infty_bound_check, omega_p, omega_sum, AffineMap, SampledFunction,
};
use tstlab::geometry::Ball;

fn on_line(pitch: f64, lo: f64, count: usize, f: impl Fn(f64) -> f64) -> SampledFunction {
    SampledFunction::from_fn(1, &[lo], pitch, count, None, |x| vec![f(x[0])]).unwrap()
}

/// Least squares for a + b·x by the 2×2 normal equations; RMS residual over r.
fn lsq_oracle(xs: &[f64], ys: &[f64], r: f64) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let a = (sy - b * sx) / n;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    (ss / n).sqrt() / r
}

#[test]
fn least_squares_matches_normal_equations() {
    let f = on_line(1.0 / 512.0, -2.0, 2049, |x| x * x + 0.3 * (5.0 * x).sin());
    for (c, r) in [(0.0, 1.0), (0.4, 0.3), (-1.2, 0.7)] {
        let ball = Ball::new(vec![c], r).unwrap();
        let v = omega_p(&f, &ball, Some(2.0)).unwrap().value;
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            f.xs.iter().zip(&f.values).filter(|(x, _)| ball.contains(x)).map(|(x, y)| (x[0], y[0])).unzip();
        let o = lsq_oracle(&xs, &ys, r);
        assert!((v - o).abs() <= 1e-10 * o, "{v} vs {o}");
    }
    // continuum value for x² on [−r, r]: 2r/√45
    let q = on_line(1e-4, -1.0, 20_001, |x| x * x);
    let v = omega_p(&q, &Ball::new(vec![0.0], 1.0).unwrap(), Some(2.0)).unwrap().value;
    assert!((v - 2.0 / 45f64.sqrt()).abs() <= 1e-4, "{v}");
}

#[test]
fn affine_invariance_and_scaling() {
    let base = |x: f64| (3.0 * x).sin() + 0.2 * x * x;
    let f = on_line(1.0 / 256.0, -1.0, 513, base);
    let g = on_line(1.0 / 256.0, -1.0, 513, |x| -2.5 * base(x) + 4.0 * x - 7.0);
    let ball = Ball::new(vec![0.1], 0.6).unwrap();
    for p in [Some(1.0), Some(2.0), Some(3.0), None] {
        let a = omega_p(&f, &ball, p).unwrap().value;
        let b = omega_p(&g, &ball, p).unwrap().value;
        let tol = if p == Some(2.0) { 1e-10 } else { 2e-3 };
        assert!((b - 2.5 * a).abs() <= tol * b, "p {p:?}: {a} {b}");
    }
}

#[test]
fn omega_increases_with_p() {
    let f = on_line(1.0 / 256.0, -1.0, 513, |x| x.abs().sqrt() + 0.5 * x);
    let ball = Ball::new(vec![0.0], 0.9).unwrap();
    let vals: Vec<f64> =
        [Some(1.0), Some(1.5), Some(2.0), Some(4.0), None].iter().map(|&p| omega_p(&f, &ball, p).unwrap().value).collect();
    for w in vals.windows(2) {
        assert!(w[0] <= w[1] * (1.0 + 1e-3), "{vals:?}");
    }
}

/// min over a of the mean |x² − a|, golden-section on a ∈ [0, r²]; b = 0 by symmetry.
fn l1_oracle(xs: &[f64], r: f64) -> f64 {
    let cost = |a: f64| xs.iter().map(|x| (x * x - a).abs()).sum::<f64>() / xs.len() as f64 / r;
    let (mut lo, mut hi) = (0.0, r * r);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if cost(m1) < cost(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    cost((lo + hi) / 2.0)
}

#[test]
fn chebyshev_and_l1_fits_of_a_parabola() {
    let f = on_line(1.0 / 1024.0, -2.0, 4097, |x| x * x);
    for r in [0.5, 1.0, 2.0] {
        let ball = Ball::new(vec![0.0], r).unwrap();
        let inf = omega_p(&f, &ball, None).unwrap();
        assert!((inf.value - r / 2.0).abs() <= 1e-5 * r, "{}", inf.value);
        // the witness reproduces the value
        assert!((omega_at(&f, &ball, None, &inf.witness).unwrap() - inf.value).abs() <= 1e-12);
        let xs: Vec<f64> = f.xs.iter().filter(|x| ball.contains(x)).map(|x| x[0]).collect();
        let one = omega_p(&f, &ball, Some(1.0)).unwrap().value;
        let o = l1_oracle(&xs, r);
        assert!(one >= o * (1.0 - 1e-9) && one <= o * 1.005, "{one} vs {o}");
        // any other map is no better
        let tilted = AffineMap { offset: vec![r * r / 4.0], linear: vec![vec![0.05]] };
        assert!(one <= omega_at(&f, &ball, Some(1.0), &tilted).unwrap());
    }
}

#[test]
fn dyadic_sums_scale_with_lipschitz_constant() {
    let g = |x: f64| 0.3 * (7.0 * x).sin() + 0.1 * (19.0 * x).cos();
    let reports: Vec<_> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&s| omega_sum(&on_line(1.0 / 512.0, 0.0, 513, |x| s * g(x)), 2.0, 5).unwrap())
        .collect();
    for (rep, s) in reports.iter().zip([0.5, 1.0, 2.0]) {
        assert!((rep.sum_sq - s * s * reports[1].sum_sq).abs() <= 1e-6 * rep.sum_sq);
        assert!((rep.ratio_sq - reports[1].ratio_sq).abs() <= 1e-6 * rep.ratio_sq);
        let levels: f64 = rep.level_sq.iter().sum();
        assert!((levels - rep.sum_sq).abs() <= 1e-12 * rep.sum_sq);
        // one cube per dyadic interval at every level
        assert_eq!(rep.cubes.len(), (0..=5).map(|l| 1usize << l).sum::<usize>());
    }
    let affine = omega_sum(&on_line(1.0 / 512.0, 0.0, 513, |x| 2.0 * x + 1.0), 2.0, 5).unwrap();
    assert!(affine.sum_sq <= 1e-24);
}

#[test]
fn omega_infinity_is_controlled_for_a_bilipschitz_perturbation() {
    let f = on_line(1.0 / 512.0, -1.0, 1025, |x| x + 0.1 * (x * 6.0).sin());
    for (c, r) in [(0.0, 1.0), (0.3, 0.5), (-0.2, 0.25)] {
        let (lhs, rhs) = omega_infty_bound_check(&f, &Ball::new(vec![c], r).unwrap(), 2.0).unwrap();
        assert!(lhs <= 10.0 * rhs, "{lhs} vs {rhs}");
    }
    // a fold is rejected
    let fold = on_line(1.0 / 64.0, -1.0, 129, |x| x * x);
    assert!(omega_infty_bound_check(&fold, &Ball::new(vec![0.0], 1.0).unwrap(), 2.0).is_err());
}

#[test]
fn beta_of_a_graph_is_bounded_by_omega() {
    let f = SampledFunction::from_fn(1, &[-1.0], 1.0 / 512.0, 1025, None, |x| vec![x[0], 0.1 * (3.0 * x[0]).sin()]).unwrap();
    let domain = Ball::new(vec![0.0], 1.0).unwrap();
    let cfg = BetaConfig::default();
    for (x, r) in [(0.0, 0.5), (0.2, 0.3)] {
        let b = beta_from_omega(&f, &[x, 0.1 * (3.0 * x).sin()], r, 2.0, &domain, &cfg).unwrap();
        assert!(b.beta <= 20.0 * b.bound, "{} vs {}", b.beta, b.bound);
        assert!(b.beta > 0.0);
    }
}
