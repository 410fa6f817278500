mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use sojourn_core::evolve::presets::InitialData;
use sojourn_core::evolve::{free_propagate, gauge, Field, Grid};
use sojourn_core::geometry::MetricSpec;
use sojourn_core::io::{read_field, write_field};
use sojourn_core::microlocal::detect_wf;
use sojourn_core::sojourn::{richardson_weights, sojourn_backward, sojourn_forward, ExtrapolationConfig};

fn direction(a: f64) -> Vec<f64> {
    vec![a.cos(), a.sin()]
}

fn packet(c: f64, p: f64) -> Field {
    InitialData::Gaussian {
        center: vec![c],
        width: 1.0,
        momentum: vec![p],
    }
    .sample(&Grid::new(1, 256, 40.0).unwrap())
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_relation_closed_form(x in -3.5f64..3.5, y in -3.5f64..3.5, a in 0.0f64..std::f64::consts::TAU) {
        let z = vec![x, y];
        let d = direction(a);
        let p = sojourn_forward(&MetricSpec::flat(2), &z, &d, &ExtrapolationConfig::default()).unwrap();
        let o = flat_relation(&z, &d);
        prop_assert!(max_abs_diff(&p.theta, &o.theta) < 1e-8);
        prop_assert!(max_abs_diff(&p.xi, &o.xi) < 1e-8);
    }

    #[test]
    fn bump_relation_is_well_formed(x in -2.0f64..2.0, y in -2.0f64..2.0, a in 0.0f64..std::f64::consts::TAU) {
        let spec = MetricSpec::single_bump(vec![0.0, 0.0], 0.3, 1.0, 3.0);
        let cfg = ExtrapolationConfig::default();
        let z = vec![x, y];
        let d = direction(a);
        let f = sojourn_forward(&spec, &z, &d, &cfg).unwrap();
        prop_assert!((dot(&f.theta, &f.theta) - 1.0).abs() < 1e-12);
        prop_assert!(dot(&f.mu, &f.theta).abs() < 1e-12);
        prop_assert!(f.diagnostics.mu_theta_violation < 1e-6);
        let xi: Vec<f64> = f.theta.iter().zip(&f.mu).map(|(t, m)| f.lambda * t + m).collect();
        prop_assert!(max_abs_diff(&xi, &f.xi) < 1e-14);
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let b = sojourn_backward(&spec, &z, &neg, &cfg).unwrap();
        prop_assert_eq!(b.theta, f.theta);
        prop_assert_eq!(b.lambda, -f.lambda);
    }

    #[test]
    fn hamiltonian_is_quadratic_in_the_fibre(x in -2.0f64..2.0, y in -2.0f64..2.0, a in 0.0f64..6.0, c in 0.1f64..5.0) {
        let spec = MetricSpec::single_bump(vec![0.5, 0.0], 0.4, 0.8, 3.0);
        let z = [x, y];
        let zeta = direction(a);
        let scaled: Vec<f64> = zeta.iter().map(|v| c * v).collect();
        let h1 = spec.hamiltonian(&z, &zeta).unwrap();
        let h2 = spec.hamiltonian(&z, &scaled).unwrap();
        prop_assert!((h2 - c * c * h1).abs() < 1e-12 * h2.max(1.0));
    }

    #[test]
    fn free_flow_is_a_unitary_group(s in -2.0f64..2.0, t in -2.0f64..2.0, c in -3.0f64..3.0, p in -2.0f64..2.0) {
        let psi = packet(c, p);
        let st = free_propagate(&free_propagate(&psi, s), t);
        prop_assert!(st.max_diff(&free_propagate(&psi, s + t)) < 1e-12);
        prop_assert!((st.norm() - psi.norm()).abs() < 1e-12 * psi.norm());
    }

    #[test]
    fn gauges_compose_additively(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let psi = packet(0.5, 1.0);
        let two = gauge(&gauge(&psi, a, 0.0), b, 0.0);
        prop_assert!(two.max_diff(&gauge(&psi, a + b, 0.0)) < 1e-12);
    }

    #[test]
    fn richardson_weights_are_exact_on_low_degree(
        x0 in 0.001f64..0.01,
        r1 in 1.5f64..3.0,
        r2 in 1.5f64..3.0,
        r3 in 1.5f64..3.0,
        coef in proptest::collection::vec(-5.0f64..5.0, 4),
    ) {
        let xs = [x0 * r1 * r2 * r3, x0 * r2 * r3, x0 * r3, x0];
        let w = richardson_weights(&xs);
        let poly = |x: f64| coef[0] + coef[1] * x + coef[2] * x * x + coef[3] * x * x * x;
        let v: f64 = w.iter().zip(&xs).map(|(w, &x)| w * poly(x)).sum();
        prop_assert!((v - coef[0]).abs() < 1e-8 * (1.0 + coef[0].abs()));
    }

    #[test]
    fn field_files_round_trip_exactly(c in -5.0f64..5.0, p in -3.0f64..3.0, t in -1.0f64..1.0) {
        let mut psi = packet(c, p);
        psi.t = t;
        let mut buf = Vec::new();
        write_field(&psi, &mut buf).unwrap();
        let back = read_field(&buf[..]).unwrap();
        prop_assert_eq!(back.data, psi.data);
        prop_assert_eq!(back.t, psi.t);
        prop_assert_eq!(back.grid, psi.grid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn detection_ignores_overall_scale(re in -3.0f64..3.0, im in -3.0f64..3.0, jump in -2.0f64..2.0) {
        prop_assume!(re.hypot(im) > 0.05);
        let grid = Grid::new(1, 2048, 40.0).unwrap();
        let psi = Field::from_fn(grid, 0.0, move |z| {
            Complex64::new(if z[0] > jump { (-z[0] * z[0] / 20.0).exp() } else { 0.0 }, 0.0)
        });
        let mut scaled = psi.clone();
        let k = Complex64::new(re, im);
        for v in &mut scaled.data {
            *v *= k;
        }
        let cfg = gabor(0.3, lattice(-3.0, 3.0, 0.5), dyadic(8.0, 3));
        let a = detect_wf(&psi, &cfg).unwrap();
        let b = detect_wf(&scaled, &cfg).unwrap();
        let key = |r: &sojourn_core::microlocal::WavefrontReport| -> Vec<(f64, f64)> {
            r.points.iter().map(|p| (p.base[0], p.fiber[0])).collect()
        };
        prop_assert_eq!(key(&a), key(&b));
    }
}
