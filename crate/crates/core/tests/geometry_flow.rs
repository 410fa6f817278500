mod common;

use common::*;
use sojourn_core::flow::{
    flow, geodesic_distance, nontrapping_check, nontrapping_check_with, phase_grid_2d, symplectic_defect,
    variational_flow, IntegratorConfig, PhasePoint, ShootingConfig, Termination,
};
use sojourn_core::geometry::MetricSpec;
use sojourn_core::par::Exec;
use sojourn_core::Error;

fn bump() -> MetricSpec {
    MetricSpec::single_bump(vec![0.0, 0.0], 0.3, 1.0, 3.0)
}

fn short(s_max: f64) -> IntegratorConfig {
    IntegratorConfig {
        s_max,
        r_escape: 20.0,
        ..Default::default()
    }
}

#[test]
fn flat_geodesics_are_straight_lines() {
    let mut r = rng(11);
    for dim in [1, 2, 3] {
        let spec = MetricSpec::flat(dim);
        for _ in 0..20 {
            let z = point_in_ball(&mut r, dim, 3.0);
            let d = unit_vector(&mut r, dim);
            let path = flow(&spec, &PhasePoint::unit(&spec, &z, &d).unwrap(), &short(6.0)).unwrap();
            for s in [0.0, 1.3, 4.0, 6.0] {
                let p = path.at(s).unwrap();
                let line: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                assert!(max_abs_diff(&p.z, &line) < 1e-10, "dim {dim}, s {s}");
                assert!(max_abs_diff(&p.zeta, &d) < 1e-12);
            }
        }
    }
}

#[test]
fn energy_is_conserved_through_the_bump() {
    let spec = bump();
    let mut r = rng(12);
    for _ in 0..20 {
        let z = point_in_ball(&mut r, 2, 1.0);
        let d = unit_vector(&mut r, 2);
        let path = flow(&spec, &PhasePoint::unit(&spec, &z, &d).unwrap(), &short(30.0)).unwrap();
        assert!(path.max_energy_drift() < 1e-10, "drift {}", path.max_energy_drift());
    }
}

#[test]
fn flow_map_is_symplectic() {
    let spec = bump();
    let start = PhasePoint::unit(&spec, &[0.2, -0.4], &[0.8, 0.6]).unwrap();
    let path = variational_flow(&spec, &start, &short(8.0)).unwrap();
    for j in path.jac.as_ref().unwrap() {
        assert!(symplectic_defect(j) < 1e-8, "defect {}", symplectic_defect(j));
    }
}

#[test]
fn reversed_flow_returns_to_start() {
    let spec = bump();
    let start = PhasePoint::unit(&spec, &[0.5, 0.1], &[-0.6, 0.8]).unwrap();
    let fwd = flow(&spec, &start, &short(5.0)).unwrap();
    let end = fwd.end();
    let back_start = PhasePoint::new(end.z.clone(), end.zeta.iter().map(|x| -x).collect());
    let back = flow(&spec, &back_start, &short(5.0)).unwrap().end();
    assert!(max_abs_diff(&back.z, &start.z) < 1e-9);
    let neg: Vec<f64> = start.zeta.iter().map(|x| -x).collect();
    assert!(max_abs_diff(&back.zeta, &neg) < 1e-9);
}

#[test]
fn bump_grid_escapes_identically_in_both_modes() {
    let spec = bump();
    let samples = phase_grid_2d(2.0, 5, 8);
    let cfg = IntegratorConfig {
        s_max: 200.0,
        r_escape: 10.0,
        ..Default::default()
    };
    let seq = nontrapping_check_with(Exec::Sequential, &spec, &samples, &cfg);
    let par = nontrapping_check_with(Exec::Parallel, &spec, &samples, &cfg);
    assert_eq!(seq, par);
    assert_eq!(seq.certified_escaped.len(), samples.len());
    assert!(seq.undecided.is_empty());
}

#[test]
fn short_budget_leaves_samples_undecided() {
    let samples = phase_grid_2d(1.0, 2, 4);
    let report = nontrapping_check(&bump(), &samples, &short(1.0));
    assert_eq!(report.undecided.len(), samples.len());
}

#[test]
fn non_unit_start_is_a_config_error() {
    let spec = MetricSpec::flat(2);
    let bad = PhasePoint::new(vec![0.0, 0.0], vec![2.0, 0.0]);
    assert!(matches!(flow(&spec, &bad, &short(1.0)), Err(Error::Config(_))));
}

#[test]
fn flow_stops_once_outside_twice_the_escape_radius() {
    let spec = MetricSpec::flat(2);
    let start = PhasePoint::unit(&spec, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
    let path = flow(&spec, &start, &short(1000.0)).unwrap();
    assert_eq!(path.termination, Termination::Radius);
    assert!(path.end().z[0] > 40.0);
    assert!(*path.s.last().unwrap() < 1000.0);
    let inside = path.at(30.0).unwrap();
    assert!(max_abs_diff(&inside.z, &[30.0, 0.0]) < 1e-9);
}

#[test]
fn bump_distance_is_symmetric_and_dominates_euclidean() {
    let spec = bump();
    let cfg = ShootingConfig::default();
    let mut r = rng(13);
    for _ in 0..10 {
        let w = point_in_ball(&mut r, 2, 1.0);
        let z = point_in_ball(&mut r, 2, 1.0);
        let a = geodesic_distance(&spec, &w, &z, &cfg).unwrap();
        let b = geodesic_distance(&spec, &z, &w, &cfg).unwrap();
        let e = ((w[0] - z[0]).powi(2) + (w[1] - z[1]).powi(2)).sqrt();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        assert!(a >= e - 1e-12, "{a} < {e}");
    }
}

#[test]
fn bump_distance_along_a_diameter_is_the_conformal_length() {
    // along the x-axis through the centre the straight segment is a geodesic
    // by symmetry, so d = ∫ √φ(x, 0) dx
    let spec = bump();
    let d = geodesic_distance(&spec, &[-0.5, 0.0], &[0.7, 0.0], &ShootingConfig::default()).unwrap();
    let n = 2000;
    let h = 1.2 / n as f64;
    let f = |x: f64| spec.metric_tensor(&[x, 0.0]).unwrap()[(0, 0)].sqrt();
    let mut simpson = f(-0.5) + f(0.7);
    for k in 1..n {
        simpson += f(-0.5 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    simpson *= h / 3.0;
    assert!((d - simpson).abs() < 1e-9, "{d} vs {simpson}");
}

#[test]
fn radial_family_rejects_the_origin() {
    let spec = MetricSpec::radial(2, 1.0);
    assert!(matches!(spec.metric_tensor(&[0.0, 0.0]), Err(Error::Domain(_))));
}
