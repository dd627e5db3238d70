//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to stderr
//! (bypassing the harness capture) and then asserts the same condition.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hadamard::angular::{in_cone, Mollifier};
use hadamard::cli::{execute, Cli};
use hadamard::convexity::{
    beta_threshold, betal_margin, certificate_margin_ln, find_r0, run_construction, EpsilonRule, RuleVariant,
    DEFAULT_N_MAX,
};
use hadamard::dirichlet::{exhaust, fd_discrepancy, fd_laplace, Attainment, BoundaryData, FourierMode};
use hadamard::jacobi::{implemma_check, jacest_check, solve_jacobi, solve_jacobi_ln, TailMajorant};
use hadamard::models::{catalog_lookup, ConeSpec, CurvatureProfile, DataC, Monotonicity, RadialFunction};
use hadamard::rotsym::{
    ball_volume, cone_inequality_check, cone_mass, distance, monotonicity_check, GeoPoint, MassRatioSeries,
    RotSymSurface,
};
use hadamard::sc_gate::{decide_sc, Branch, ScParams};

use clap::Parser;

fn verdict(id: &str, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} {id} {name}: {detail}");
}

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn log_pinched() -> CurvatureProfile {
    catalog_lookup("log-pinched", &params(&[("eps", 1.0), ("eps_tilde", 0.5), ("core", 1.0)]), Some(10.0)).unwrap()
}

fn log_pinched_data() -> DataC {
    DataC::new(log_pinched(), 10.0, 1.0, 0.5, 2.0, 2).unwrap()
}

#[test]
fn c01_jacobi_constant_curvature_oracle() {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for k in [0.5f64, 1.0, 2.0] {
        let start = Instant::now();
        let sol = solve_jacobi(&RadialFunction::constant(k), 20.0, 1e-10).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        for i in 0..=400 {
            let t = 0.1 + (20.0 - 0.1) * i as f64 / 400.0;
            let f = (k * t).sinh() / k;
            let u = k / (k * t).tanh();
            worst = worst.max((sol.f(t).unwrap() - f).abs() / f);
            worst = worst.max((sol.u(t).unwrap() - u).abs() / u);
        }
    }
    let ok = worst <= 1e-8 && slowest < 1.0;
    verdict("01", "jacobi oracle", ok, format!("max rel err {worst:.2e} (tol 1e-8), slowest {slowest:.3} s (limit 1 s)"));
    assert!(ok);
}

#[test]
fn c02_sinh_sinh_identity() {
    let p = catalog_lookup("superexp", &params(&[("c", 1.0), ("eps", 0.1)]), None).unwrap();
    let f = |t: f64| t.sinh().sinh();
    let mut worst: f64 = 0.0;
    for t in [1.0f64, 2.0, 3.0] {
        let h = 1e-3;
        let fd = (-f(t + 2.0 * h) + 16.0 * f(t + h) - 30.0 * f(t) + 16.0 * f(t - h) - f(t - 2.0 * h)) / (12.0 * h * h);
        let want = t.sinh() / t.sinh().tanh() + t.cosh().powi(2);
        worst = worst.max((fd / f(t) - want).abs() / want);
        let a = p.a.eval(t).unwrap();
        worst = worst.max((a * a - want).abs() / want);
    }
    let ok = worst <= 1e-5;
    verdict("02", "sinh-sinh identity", ok, format!("max rel err {worst:.2e} (tol 1e-5)"));
    assert!(ok);
}

#[test]
fn c03_growth_bounds() {
    let sol = solve_jacobi(&log_pinched().a, 1e5, 1e-10).unwrap();
    let rep = jacest_check(&sol, 1.0, 0.5, (3.0, 1e5)).unwrap();
    // direct evaluation of both bounds beyond the reported radius
    let mut oracle_ok = rep.r1.is_some();
    if let Some(r1) = rep.r1 {
        let mut t = r1;
        while t <= 1e5 {
            let (lt, llt) = (t.ln(), t.ln().ln());
            oracle_ok &= sol.log_f(t).unwrap() >= lt + 1.5 * llt;
            oracle_ok &= sol.u(t).unwrap() >= 1.0 / t + 1.5 / (t * lt);
            t *= 1.1;
        }
    }
    let flat = solve_jacobi(&RadialFunction::constant(0.0), 1e5, 1e-10).unwrap();
    let frep = jacest_check(&flat, 1.0, 0.5, (3.0, 1e5)).unwrap();
    let mut flat_fails_everywhere = true;
    let mut t = 3.0f64;
    while t <= 1e5 {
        flat_fails_everywhere &= flat.log_f(t).unwrap() < t.ln() + 1.5 * t.ln().ln();
        t *= 1.1;
    }
    let ok = rep.pass && oracle_ok && !frep.pass && frep.r1.is_none() && flat_fails_everywhere;
    verdict(
        "03",
        "growth bounds",
        ok,
        format!("R1 = {:?}, min log slack {:?}; flat model pass = {}", rep.r1, rep.min_log_slack, frep.pass),
    );
    assert!(ok);
}

#[test]
fn c04a_log_pinched_branch1() {
    let start = Instant::now();
    let d = log_pinched_data();
    let p = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
    let v = decide_sc(&d, &p, (1e2, 1e5)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = v.branch == Branch::Branch1 && v.min_slack().unwrap() >= 0.0 && secs < 10.0;
    verdict("04a", "branch decision, log-pinched", ok, format!("branch {:?}, min slack {:?}, {secs:.2} s", v.branch, v.min_slack()));
    assert!(ok);
}

#[test]
fn c04b_superexp_branch2() {
    let start = Instant::now();
    let prof = catalog_lookup("superexp", &params(&[("c", 1.0), ("eps", 0.1)]), None).unwrap();
    let d = DataC::new(prof, 10.0, 1.0, 0.5, 2.0, 2).unwrap();
    let p = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
    let v = decide_sc(&d, &p, (10.0, 100.0)).unwrap();
    let rep = v.report(Branch::Branch2).unwrap();
    // log L must not increase over the final decade
    let top: Vec<_> = rep.evidence.iter().filter(|e| e.t >= 10.0).collect();
    let nonincreasing = top.windows(2).all(|w| w[1].value <= w[0].value);
    let secs = start.elapsed().as_secs_f64();
    let ok = v.branch == Branch::Branch2 && nonincreasing && secs < 10.0;
    verdict("04b", "branch decision, superexp", ok, format!("branch {:?}, log L non-increasing = {nonincreasing}, {secs:.2} s", v.branch));
    assert!(ok);
}

#[test]
fn c04c_constant_curvature_both_fail() {
    let prof = catalog_lookup("constant", &params(&[("k", 1.0)]), None).unwrap();
    let d = DataC::new(prof, 10.0, 1.0, 0.5, 2.0, 2).unwrap();
    let p = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
    let v = decide_sc(&d, &p, (1e2, 1e5)).unwrap();
    let ok = v.branch == Branch::None;
    let passing: Vec<_> = v.reports.iter().filter(|r| r.pass).map(|r| format!("{:?}", r.branch)).collect();
    verdict(
        "04c",
        "branch decision, a = b = 1",
        ok,
        format!("expected no branch, got {:?}; passing: {}", v.branch, passing.join(", ")),
    );
    assert!(ok, "criterion expects both branches to fail on a = b = 1; the computed verdict is {:?}", v.branch);
}

#[test]
fn c05_comparison_integral() {
    let a = RadialFunction::from_fn(|t| 1.0 + t, None, Monotonicity::Increasing);
    let b = RadialFunction::from_fn(|t| ((1.0 + t) * (1.0 + t) + (-t).exp()).sqrt(), None, Monotonicity::Increasing);
    let prof = CurvatureProfile::new(a, b, 0.0).unwrap();
    let tail = TailMajorant::Exponential { c: 1.0, rate: 1.0 };
    let (bound, rep) = implemma_check(&prof, 30.0, Some(tail), 1e-10).unwrap();
    // Simpson on [0, 30] plus the exact tail bound of e^{-t}
    let g = |t: f64| (-t).exp() / ((1.0 + t) * (1.0 + t) + (-t).exp()).sqrt();
    let n = 200_000;
    let h = 30.0 / n as f64;
    let mut s = g(0.0) + g(30.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    let i_oracle = s * h / 3.0;
    let i_err = (bound.integral_i - i_oracle).abs();
    let slack = rep.max_log_ratio - FRAC_PI_2 * i_oracle;
    let ok = slack <= 1e-6 && i_err <= 1e-8 + (-30.0f64).exp();
    verdict(
        "05",
        "comparison integral",
        ok,
        format!("I = {:.10} (oracle {i_oracle:.10}), max log ratio - (pi/2) I = {slack:.3e} (tol 1e-6)", bound.integral_i),
    );
    assert!(ok);
}

#[test]
fn c06_construction_trace() {
    let one = RadialFunction::constant(1.0);
    let prof = CurvatureProfile::new(one.clone(), one.clone(), 0.0).unwrap();
    let sol = solve_jacobi(&one, 80.0, 1e-10).unwrap();
    let (beta, alpha, c) = (0.1, 0.1, 1.0);
    let rule = EpsilonRule::new(beta, RuleVariant::UnitBump, 4.0).unwrap();
    let r0 = find_r0(&prof, &sol, &rule, alpha, c).unwrap();
    let tr = run_construction(&prof, &sol, &rule, r0, alpha, c, DEFAULT_N_MAX).unwrap();
    // eps_R = beta coth R on the hyperbolic plane, theta_n <= c / sinh(r0 + n - 1)
    let oracle: f64 = (0..tr.rows.len())
        .map(|n| {
            let top = r0 + n as f64 + 1.0;
            let t_n = 1.0 / (beta / top.tanh());
            t_n * c / (r0 + n as f64 - 1.0).sinh()
        })
        .sum();
    let exact_steps = tr.steps.windows(2).all(|w| w[0].r + w[0].eps == w[1].r);
    let last = tr.steps.last().unwrap();
    let telescoped: f64 = tr.steps.iter().map(|s| s.eps).sum();
    let tele_err = (telescoped - (last.r + last.eps - r0)).abs();
    let ok = tr.converged
        && r0.is_finite()
        && (oracle - tr.sum).abs() <= 1e-10
        && oracle <= alpha
        && exact_steps
        && tele_err <= 1e-12 * (last.r + last.eps);
    verdict(
        "06",
        "construction trace",
        ok,
        format!(
            "r0 = {r0:.6}, sum {:.12} vs oracle {oracle:.12} (budget {alpha}), steps exact = {exact_steps}, telescoping err {tele_err:.1e}",
            tr.sum
        ),
    );
    assert!(ok);
}

#[test]
fn c07_certificate_margins() {
    let one = RadialFunction::constant(1.0);
    let prof = CurvatureProfile::new(one.clone(), one.clone(), 0.0).unwrap();
    let sol = solve_jacobi(&one, 40.0, 1e-10).unwrap();
    let r = 5.0;
    let m = |beta: f64| betal_margin(&EpsilonRule::new(beta, RuleVariant::UnitBump, 4.0).unwrap(), &prof, &sol, r).unwrap();
    let (b1, b2) = (0.01, 0.05);
    let slope = (m(b2) - m(b1)) / (b2 - b1);
    let residual = [0.02, 0.1, 0.3, 1.0]
        .iter()
        .map(|&b| (m(b) - (m(b1) + slope * (b - b1))).abs())
        .fold(0.0, f64::max);
    // sign change by bisection
    let (mut lo, mut hi) = (1e-6, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = beta_threshold(&EpsilonRule::new(1.0, RuleVariant::UnitBump, 4.0).unwrap(), &prof, &sol, r).unwrap();
    let below_positive = (1..10).all(|i| m(th * i as f64 / 10.0) > 0.0);

    let d = log_pinched_data();
    let params = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
    let ln_entry = 10.0f64.powf(1.0 / params.alpha);
    let ln_rhos: Vec<f64> = [1.0, 1.5, 3.0, 10.0, 100.0].iter().map(|x| x * ln_entry).collect();
    let big = solve_jacobi_ln(&d.profile.a, ln_rhos.last().unwrap() + 1.0, 1e-10).unwrap();
    let margins: Vec<f64> =
        ln_rhos.iter().map(|&lr| certificate_margin_ln(&d, &params, &big, 10.0, lr, 1.0).unwrap().margin).collect();
    let all_positive = margins.iter().all(|&x| x > 0.0);
    let ok = residual <= 1e-12 && (lo - th).abs() <= 1e-9 * th && below_positive && all_positive;
    verdict(
        "07",
        "certificate margins",
        ok,
        format!(
            "affine residual {residual:.1e}, threshold {th:.8} (bisection {lo:.8}), min certificate margin {:.3e}",
            margins.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    );
    assert!(ok);
}

#[test]
fn c08_rotationally_symmetric_geometry() {
    let h2 = RotSymSurface::hyperbolic(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_d: f64 = 0.0;
    for _ in 0..100 {
        let (r1, r2) = (rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
        let (t1, t2) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let d = distance(&h2, GeoPoint::new(r1, t1).unwrap(), GeoPoint::new(r2, t2).unwrap()).unwrap();
        let c = r1.cosh() * r2.cosh() - r1.sinh() * r2.sinh() * (t1 - t2).cos();
        worst_d = worst_d.max((d - c.max(1.0).acosh()).abs());
    }
    let mut worst_v: f64 = 0.0;
    for i in 1..=40 {
        let t = 0.25 * i as f64;
        let want = TAU * (t.cosh() - 1.0);
        worst_v = worst_v.max((ball_volume(&h2, 2, t).unwrap() - want).abs() / want);
    }
    let h3 = RotSymSurface::hyperbolic(3).unwrap();
    let ts: Vec<f64> = (1..=30).map(|i| 0.2 * i as f64).collect();
    let geo = monotonicity_check(&MassRatioSeries::totally_geodesic(&h3, 2, &ts).unwrap());
    let cone = monotonicity_check(&MassRatioSeries::radial_cone(&h3, 1.3, 2, &ts).unwrap());
    let mut worst_gap: f64 = 0.0;
    for &t in &ts {
        let rep = cone_inequality_check(&h3, 2, t, None, |x| cone_mass(&h3, 1.3, 2, x).unwrap()).unwrap();
        worst_gap = worst_gap.max(rep.relative_gap.abs());
    }
    let ok = worst_d <= 1e-8
        && worst_v <= 1e-8
        && geo.max_violation <= 1e-8
        && cone.max_violation <= 1e-8
        && worst_gap <= 1e-6;
    verdict(
        "08",
        "rotationally symmetric geometry",
        ok,
        format!(
            "distance err {worst_d:.1e}, volume rel err {worst_v:.1e}, ratio drops {:.1e}/{:.1e}, cone gap {worst_gap:.1e}",
            geo.max_violation, cone.max_violation
        ),
    );
    assert!(ok);
}

#[test]
fn c09_angular_extension() {
    let start = Instant::now();
    let cone = ConeSpec::new(3.0, 0.0, 1).unwrap();
    let h2 = RotSymSurface::hyperbolic(2).unwrap();
    let moll = Mollifier::new(h2.clone(), RadialFunction::constant(1.0), cone).unwrap();
    let quad_tol = 1e-4;
    let r1 = moll.r1(40.0, 0.05).unwrap().expect("finite R1");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut p1_err: f64 = 0.0;
    for _ in 0..5 {
        let p = GeoPoint::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..TAU)).unwrap();
        p1_err = p1_err.max((moll.mollify_fn(p, quad_tol, |_| 1.0).unwrap().value - 1.0).abs());
    }
    let mut outside_err: f64 = 0.0;
    let mut n = 0;
    while n < 50 {
        let p = GeoPoint::new(rng.gen_range(r1..r1 + 10.0), rng.gen_range(0.0..TAU)).unwrap();
        if in_cone(&cone, 2.0, p) {
            continue;
        }
        outside_err = outside_err.max((moll.mollify(p, quad_tol).unwrap().value - 1.0).abs());
        n += 1;
    }
    let rhos: Vec<f64> = (0..=5).map(|i| r1 + i as f64).collect();
    let rep = moll.decay_check(&h2, 0.75, 1.0, &[0.25, 1.0, 2.5], &rhos, 1e-8).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = p1_err <= quad_tol && outside_err <= quad_tol && rep.grad_slope <= 0.05 && secs < 60.0;
    verdict(
        "09",
        "angular extension",
        ok,
        format!(
            "R1 = {r1}, |P(1) - 1| = {p1_err:.1e}, |h - 1| outside = {outside_err:.1e}, gradient slope {:.3} (limit 0.05), {secs:.1} s",
            rep.grad_slope
        ),
    );
    assert!(ok);
}

fn random_modes(rng: &mut ChaCha8Rng) -> Vec<FourierMode> {
    let mut ns: Vec<u32> = Vec::new();
    while ns.len() < 3 {
        let n = rng.gen_range(0..6);
        if !ns.contains(&n) {
            ns.push(n);
        }
    }
    ns.into_iter().map(|n| FourierMode { n, a: rng.gen_range(-1.0..1.0), b: rng.gen_range(-1.0..1.0) }).collect()
}

#[test]
fn c10_dirichlet_exhaustion() {
    let h2 = RotSymSurface::hyperbolic(2).unwrap();
    let radii = [2.0, 4.0, 8.0, 16.0];
    let one = BoundaryData::new(vec![FourierMode { n: 1, a: 1.0, b: 0.0 }]).unwrap();
    let sol = exhaust(&h2, &one, &radii, 1e-10).unwrap();
    let mut hyp_err: f64 = 0.0;
    for (j, &big) in radii.iter().enumerate() {
        for i in 1..=50 {
            let r = big * i as f64 / 50.0;
            let want = (r / 2.0).tanh() / (big / 2.0).tanh();
            hyp_err = hyp_err.max((sol.profiles[j][0].eval(r).unwrap() - want).abs());
        }
    }

    let flat = RotSymSurface::flat(2).unwrap();
    let modes: Vec<FourierMode> = (1..=3).map(|n| FourierMode { n, a: 1.0, b: 0.0 }).collect();
    let fsol = exhaust(&flat, &BoundaryData::new(modes).unwrap(), &radii, 1e-10).unwrap();
    let mut flat_err: f64 = 0.0;
    for (j, &big) in radii.iter().enumerate() {
        for (m, prof) in fsol.profiles[j].iter().enumerate() {
            let n = fsol.data.fourier[m].n as i32;
            for i in 1..=50 {
                let r = big * i as f64 / 50.0;
                flat_err = flat_err.max((prof.eval(r).unwrap() - (r / big).powi(n)).abs());
            }
        }
    }
    let flat_flagged = fsol.modes.iter().all(|m| m.attained == Attainment::NotAttained);

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (d1, d2) = (random_modes(&mut rng), random_modes(&mut rng));
    let b1 = BoundaryData::new(d1).unwrap();
    let b2 = BoundaryData::new(d2).unwrap();
    let b12 = b1.sum(&b2).unwrap();
    let (s1, s2, s12) = (
        exhaust(&h2, &b1, &radii, 1e-10).unwrap(),
        exhaust(&h2, &b2, &radii, 1e-10).unwrap(),
        exhaust(&h2, &b12, &radii, 1e-10).unwrap(),
    );
    let mut sup_err: f64 = 0.0;
    for _ in 0..200 {
        let (r, th) = (rng.gen_range(0.0..16.0), rng.gen_range(0.0..TAU));
        sup_err = sup_err.max((s12.eval(r, th).unwrap() - s1.eval(r, th).unwrap() - s2.eval(r, th).unwrap()).abs());
    }
    let max_ok = [(&s1, &b1), (&s2, &b2), (&s12, &b12)]
        .iter()
        .all(|(s, b)| s.sample_sup(40, 64).unwrap() <= b.sup_norm * (1.0 + 1e-6));

    let lp = log_pinched();
    let surf = RotSymSurface::from_curvature(&lp.a, 20.0, 1e-10, 2).unwrap();
    let data = BoundaryData::new(vec![FourierMode { n: 1, a: 1.0, b: 0.0 }, FourierMode { n: 3, a: 0.0, b: 0.5 }]).unwrap();
    let lradii = [5.0, 10.0, 20.0];
    let lsol = exhaust(&surf, &data, &lradii, 1e-10).unwrap();
    let fd = fd_laplace(&surf, &data, 20.0, 200, 128, 1e-12).unwrap();
    let fd_err = fd_discrepancy(&lsol, 2, &fd).unwrap();

    let ok = hyp_err <= 1e-6 && flat_err <= 1e-10 && flat_flagged && sup_err <= 1e-10 && max_ok && fd_err <= 1e-3;
    verdict(
        "10",
        "dirichlet exhaustion",
        ok,
        format!(
            "tanh profile err {hyp_err:.1e}, flat profile err {flat_err:.1e} (not attained = {flat_flagged}), superposition {sup_err:.1e}, max principle {max_ok}, fd diff {fd_err:.1e}"
        ),
    );
    assert!(ok);
}

fn golden_configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            name.ends_with(".json") && !name.ends_with("_data.json")
        })
        .collect();
    v.sort();
    v
}

#[test]
fn c11_cli_determinism() {
    let mut identical = 0;
    let mut differing = Vec::new();
    let configs = golden_configs();
    for path in &configs {
        let cli = Cli::try_parse_from(["hadamard", "--config", path.to_str().unwrap()]).unwrap();
        let a = execute(&cli).unwrap();
        let b = execute(&cli).unwrap();
        if a.json == b.json && a.csv == b.csv && a.pass {
            identical += 1;
        } else {
            differing.push(path.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    let ok = differing.is_empty() && !configs.is_empty();
    verdict(
        "11",
        "cli determinism",
        ok,
        format!("{identical}/{} golden configs byte-identical and passing; differing: {differing:?}", configs.len()),
    );
    assert!(ok);
    let _ = PI;
}
