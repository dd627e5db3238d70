use std::collections::BTreeMap;
use std::f64::consts::PI;

use hadamard::angular::{tilde_h, Mollifier};
use hadamard::cli::RunConfig;
use hadamard::convexity::{betal_margin, beta_threshold, EpsilonRule, RuleVariant};
use hadamard::dirichlet::{exhaust, BoundaryData, FourierMode};
use hadamard::jacobi::solve_jacobi;
use hadamard::models::{catalog_lookup, ConeSpec, RadialFunction};
use hadamard::rotsym::{ball_volume, distance, unit_ball_volume, GeoPoint, RotSymSurface};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = GeoPoint> {
    (0.0..6.0f64, 0.0..(2.0 * PI)).prop_map(|(r, th)| GeoPoint::new(r, th).unwrap())
}

fn log_pinched() -> hadamard::models::CurvatureProfile {
    let params: BTreeMap<String, f64> =
        [("eps".to_string(), 1.0), ("eps_tilde".to_string(), 0.5), ("core".to_string(), 1.0)].into();
    catalog_lookup("log-pinched", &params, Some(10.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_symmetric_and_triangular(p in point(), q in point(), s in point()) {
        let surf = RotSymSurface::hyperbolic(2).unwrap();
        let pq = distance(&surf, p, q).unwrap();
        let qp = distance(&surf, q, p).unwrap();
        let ps = distance(&surf, p, s).unwrap();
        let sq = distance(&surf, s, q).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - qp).abs() <= 1e-9 * (1.0 + pq));
        prop_assert!(pq <= ps + sq + 1e-9 * (1.0 + pq));
        prop_assert!(pq <= p.r + q.r + 1e-9);
        prop_assert!(pq >= (p.r - q.r).abs() - 1e-9);
    }

    #[test]
    fn flat_ball_volume_is_euclidean(k in 2usize..7, t in 0.01..50.0f64) {
        let surf = RotSymSurface::flat(6).unwrap();
        let v = ball_volume(&surf, k, t).unwrap();
        let exact = unit_ball_volume(k) * t.powi(k as i32);
        prop_assert!((v - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn jacobi_constant_matches_sinh(k in 0.05..3.0f64, t in 0.1..15.0f64) {
        let sol = solve_jacobi(&RadialFunction::constant(k), 20.0, 1e-10).unwrap();
        let exact = (k * t).sinh().ln() - k.ln();
        prop_assert!((sol.log_f(t).unwrap() - exact).abs() <= 1e-7 * (1.0 + exact.abs()));
        let u = sol.u(t).unwrap();
        prop_assert!((u - k / (k * t).tanh()).abs() <= 1e-7 * u);
    }

    #[test]
    fn tilde_h_in_unit_interval(l in 2.6..10.0f64, v0 in 0.0..(2.0 * PI), p in point()) {
        let cone = ConeSpec::new(l, v0, 3).unwrap();
        let h = tilde_h(&cone, p);
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn betal_margin_is_affine_in_beta(beta1 in 0.001..1.0f64, beta2 in 0.001..1.0f64, r in 10.0..40.0f64) {
        let profile = log_pinched();
        let sol = solve_jacobi(&profile.a, 60.0, 1e-10).unwrap();
        let rule = |b| EpsilonRule::new(b, RuleVariant::UnitBump, 4.0).unwrap();
        let m1 = betal_margin(&rule(beta1), &profile, &sol, r).unwrap();
        let m2 = betal_margin(&rule(beta2), &profile, &sol, r).unwrap();
        let mid = betal_margin(&rule(0.5 * (beta1 + beta2)), &profile, &sol, r).unwrap();
        let scale = 1.0 + m1.abs() + m2.abs();
        prop_assert!((mid - 0.5 * (m1 + m2)).abs() <= 1e-10 * scale);
        let thr = beta_threshold(&rule(beta1), &profile, &sol, r).unwrap();
        let at = betal_margin(&rule(thr), &profile, &sol, r).unwrap();
        prop_assert!(at.abs() <= 1e-9 * sol.u(r).unwrap());
        prop_assert_eq!(m1 >= 0.0, beta1 <= thr);
    }

    #[test]
    fn run_config_round_trips(rtol in 1e-12..1e-3f64, seed in any::<u64>(), t1 in 1.0..100.0f64) {
        let raw = serde_json::json!({
            "command": "models",
            "model": {"model": "constant", "params": {"k": 1.0}},
            "data": {"t1": t1},
            "rtol": rtol,
            "seed": seed,
        });
        let cfg: RunConfig = serde_json::from_value(raw).unwrap();
        let again: RunConfig = serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        prop_assert_eq!(serde_json::to_value(&cfg).unwrap(), serde_json::to_value(&again).unwrap());
    }
}

fn modes() -> impl Strategy<Value = Vec<FourierMode>> {
    prop::collection::vec(
        (0u32..5, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(n, a, b)| FourierMode { n, a, b }),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dirichlet_superposition_and_max_principle(m1 in modes(), m2 in modes(), r in 0.0..1.0f64, th in 0.0..(2.0 * PI)) {
        let surf = RotSymSurface::hyperbolic(2).unwrap();
        let radii = [4.0, 8.0];
        let d1 = BoundaryData::new(m1).unwrap();
        let d2 = BoundaryData::new(m2).unwrap();
        let s1 = exhaust(&surf, &d1, &radii, 1e-10).unwrap();
        let s2 = exhaust(&surf, &d2, &radii, 1e-10).unwrap();
        let s12 = exhaust(&surf, &d1.sum(&d2).unwrap(), &radii, 1e-10).unwrap();
        let rr = 8.0 * r;
        let lhs = s12.eval(rr, th).unwrap();
        let rhs = s1.eval(rr, th).unwrap() + s2.eval(rr, th).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + d1.coefficient_bound() + d2.coefficient_bound()));
        // maximum principle on each disk of the exhaustion
        for (j, &big) in radii.iter().enumerate() {
            let v = s1.eval_on(j, big * r, th).unwrap();
            prop_assert!(v.abs() <= d1.sup_norm * (1.0 + 1e-8) + 1e-12);
        }
        // boundary values are matched on every disk
        for (j, &big) in radii.iter().enumerate() {
            let v = s1.eval_on(j, big, th).unwrap();
            prop_assert!((v - d1.eval(th)).abs() <= 1e-8 * (1.0 + d1.coefficient_bound()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn mollified_indicator_in_unit_interval(r in 0.5..6.0f64, th in 0.0..(2.0 * PI)) {
        let surf = RotSymSurface::hyperbolic(2).unwrap();
        let cone = ConeSpec::new(3.0, 0.0, 3).unwrap();
        let m = Mollifier::new(surf, RadialFunction::constant(1.0), cone).unwrap();
        let v = m.mollify(GeoPoint::new(r, th).unwrap(), 1e-6).unwrap().value;
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&v));
    }
}
