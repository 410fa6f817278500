mod common;

use common::*;
use sojourn_core::geometry::MetricSpec;
use sojourn_core::par::Exec;
use sojourn_core::sojourn::{
    contact_batch_with, contact_check, sojourn_backward, sojourn_batch_with, sojourn_forward,
    sojourn_forward_jacobian, sojourn_long_range, ContactConfig, ExtrapolationConfig,
};
use sojourn_core::Error;

fn bump() -> MetricSpec {
    MetricSpec::single_bump(vec![0.0, 0.0], 0.3, 1.0, 3.0)
}

fn rotate(a: f64, v: &[f64]) -> Vec<f64> {
    vec![a.cos() * v[0] - a.sin() * v[1], a.sin() * v[0] + a.cos() * v[1]]
}

#[test]
fn flat_relation_matches_straight_lines() {
    let cfg = ExtrapolationConfig::default();
    let mut r = rng(21);
    for dim in [2, 3] {
        let spec = MetricSpec::flat(dim);
        for _ in 0..30 {
            let z = point_in_ball(&mut r, dim, 5.0);
            let d = unit_vector(&mut r, dim);
            let p = sojourn_forward(&spec, &z, &d, &cfg).unwrap();
            let o = flat_relation(&z, &d);
            assert!(max_abs_diff(&p.theta, &o.theta) < 1e-12);
            assert!((p.lambda - o.lambda).abs() < 1e-8, "{} vs {}", p.lambda, o.lambda);
            assert!(max_abs_diff(&p.mu, &o.mu) < 1e-8);
            assert!(max_abs_diff(&p.xi, &o.xi) < 1e-8);
            assert!(dot(&p.mu, &p.theta).abs() < 1e-12);
            assert_eq!(p.sigma, -p.lambda);
        }
    }
}

#[test]
fn flat_backward_relation() {
    let spec = MetricSpec::flat(2);
    let cfg = ExtrapolationConfig::default();
    let (z, d) = ([1.0, -2.0], [0.6, 0.8]);
    let b = sojourn_backward(&spec, &z, &d, &cfg).unwrap();
    assert!(max_abs_diff(&b.theta, &[-0.6, -0.8]) < 1e-12);
    assert!((b.lambda + dot(&z, &d)).abs() < 1e-8);
    assert!(max_abs_diff(&b.xi, &z) < 1e-8);
}

#[test]
fn diameter_sojourn_is_the_excess_conformal_length() {
    // along the x-axis through the centre: θ = e₁, μ = 0 and
    // λ = 2 + ∫_{-2}^{3} (√φ − 1) dx, since φ = 1 beyond the support
    let spec = bump();
    let p = sojourn_forward(&spec, &[-2.0, 0.0], &[1.0, 0.0], &ExtrapolationConfig::default()).unwrap();
    let n = 4000;
    let h = 5.0 / n as f64;
    let f = |x: f64| spec.metric_tensor(&[x, 0.0]).unwrap()[(0, 0)].sqrt() - 1.0;
    let mut integral = f(-2.0) + f(3.0);
    for k in 1..n {
        integral += f(-2.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    integral *= h / 3.0;
    assert!(max_abs_diff(&p.theta, &[1.0, 0.0]) < 1e-10);
    assert!(p.mu.iter().all(|m| m.abs() < 1e-9));
    assert!((p.lambda - (2.0 + integral)).abs() < 1e-8, "{} vs {}", p.lambda, 2.0 + integral);
}

#[test]
fn centred_bump_relation_is_rotation_equivariant() {
    let spec = bump();
    let cfg = ExtrapolationConfig::default();
    let mut r = rng(22);
    for _ in 0..8 {
        let z = point_in_ball(&mut r, 2, 1.5);
        let d = unit_vector(&mut r, 2);
        let a = 0.7;
        let p = sojourn_forward(&spec, &z, &d, &cfg).unwrap();
        let q = sojourn_forward(&spec, &rotate(a, &z), &rotate(a, &d), &cfg).unwrap();
        assert!(max_abs_diff(&q.theta, &rotate(a, &p.theta)) < 1e-9);
        assert!((q.lambda - p.lambda).abs() < 1e-8);
        assert!(max_abs_diff(&q.mu, &rotate(a, &p.mu)) < 1e-8);
    }
}

#[test]
fn backward_relation_reverses_the_fibre() {
    let spec = bump();
    let cfg = ExtrapolationConfig::default();
    let (z, d) = ([0.3, -0.2], [0.28, 0.96]);
    let f = sojourn_forward(&spec, &z, &[-d[0], -d[1]], &cfg).unwrap();
    let b = sojourn_backward(&spec, &z, &d, &cfg).unwrap();
    assert_eq!(b.theta, f.theta);
    assert_eq!(b.lambda, -f.lambda);
    assert!(max_abs_diff(&b.xi, &f.xi.iter().map(|x| -x).collect::<Vec<_>>()) == 0.0);
}

#[test]
fn contact_factor_is_minus_the_conformal_speed() {
    // the pullback of dλ − μ·dθ is −ζ·dz with ζ = √φ ζ̂ at unit speed
    let spec = bump();
    let cfg = ExtrapolationConfig::default();
    let ccfg = ContactConfig::default();
    let mut r = rng(23);
    for _ in 0..6 {
        let z = point_in_ball(&mut r, 2, 1.0);
        let d = unit_vector(&mut r, 2);
        let c = contact_check(&spec, &z, &d, &cfg, &ccfg).unwrap();
        let expect = -spec.metric_tensor(&z).unwrap()[(0, 0)].sqrt();
        assert!(c.passed, "{c:?}");
        assert!((c.pullback_factor - expect).abs() < 1e-6, "{} vs {expect}", c.pullback_factor);
        assert!((c.fd_pullback_factor - expect).abs() < 1e-5);
    }
}

#[test]
fn variational_and_finite_difference_pullbacks_agree() {
    let spec = bump();
    let cfg = ExtrapolationConfig::default();
    let (z, d) = (vec![0.4, -0.3], vec![0.6, 0.8]);
    let sj = sojourn_forward_jacobian(&spec, &z, &d, &cfg).unwrap();
    assert_eq!(sj.d_theta.shape(), (2, 4));
    assert_eq!(sj.d_lambda.shape(), (1, 4));
    let c = contact_check(&spec, &z, &d, &cfg, &ContactConfig::default()).unwrap();
    assert!(c.method_disagreement < 1e-5, "{}", c.method_disagreement);
}

#[test]
fn batches_are_identical_across_execution_modes() {
    let spec = bump();
    let cfg = ExtrapolationConfig::default();
    let mut r = rng(24);
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..12).map(|_| (point_in_ball(&mut r, 2, 2.0), unit_vector(&mut r, 2))).collect();
    let a: Vec<_> = sojourn_batch_with(Exec::Sequential, &spec, &samples, &cfg).into_iter().map(|r| r.unwrap()).collect();
    let b: Vec<_> = sojourn_batch_with(Exec::Parallel, &spec, &samples, &cfg).into_iter().map(|r| r.unwrap()).collect();
    assert_eq!(a, b);
    let ccfg = ContactConfig::default();
    let c: Vec<_> = contact_batch_with(Exec::Sequential, &spec, &samples[..3], &cfg, &ccfg).into_iter().map(|r| r.unwrap()).collect();
    let d: Vec<_> = contact_batch_with(Exec::Parallel, &spec, &samples[..3], &cfg, &ccfg).into_iter().map(|r| r.unwrap()).collect();
    assert_eq!(c, d);
}

#[test]
fn long_range_radial_geodesic_matches_closed_form() {
    let cfg = ExtrapolationConfig::default();
    for (m, r0) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)] {
        let spec = MetricSpec::radial(2, m);
        let lr = sojourn_long_range(&spec, &[0.0, r0], &[0.0, 1.0], &cfg).unwrap();
        assert!((lr.point.lambda - radial_lambda(m, r0)).abs() < 1e-6, "m = {m}, r₀ = {r0}");
        assert!(lr.point.diagnostics.convention_dependent);
        assert!(!lr.residual_drift_flag);
        assert!(lr.subtracted_drift < 1e-3 && lr.unsubtracted_drift > 0.1);
    }
}

#[test]
fn short_range_entry_point_rejects_long_range_metrics() {
    let spec = MetricSpec::radial(2, 1.0);
    let r = sojourn_forward(&spec, &[1.0, 0.0], &[1.0, 0.0], &ExtrapolationConfig::default());
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn zero_long_range_mass_reduces_to_flat() {
    let spec = MetricSpec::radial(2, 0.0);
    let lr = sojourn_long_range(&spec, &[1.0, 2.0], &[0.6, 0.8], &ExtrapolationConfig::default()).unwrap();
    let o = flat_relation(&[1.0, 2.0], &[0.6, 0.8]);
    assert!((lr.point.lambda - o.lambda).abs() < 1e-8);
    assert!(!lr.point.diagnostics.convention_dependent);
}
