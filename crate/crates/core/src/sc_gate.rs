//! Decides which of the two pinching alternatives certifies strict convexity at
//! infinity for a profile `(a, b)`.
//!
//! Branch 1 is pointwise:
//!
//! ```text
//!     (log t)^et / t  <=  b(t)  <=  f_a'(t) / (t (log t)^{1+2 alpha}) * f_a(s) / f_a(t)
//! ```
//!
//! with `s = lambda t`, or `s = t - t0` when `b` is increasing. Branch 2 asks for
//! `L(t) = t (log t)^{1+eps} f_a(t-2) b(t) / (f_a'(t-2) f_a(t-3))` to stay bounded;
//! on a finite window that is read as "non-increasing over the top decade".
//! Every verdict carries a caveat saying so.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::{solve_jacobi, JacobiError, JacobiSolution};
use crate::models::{check_c_conditions, geometric_grid, DataC, ModelError, Monotonicity, DEFAULT_PER_DECADE};

pub const CAVEAT: &str = "asymptotic claim checked on finite window";
/// Solver tolerance used when `decide_sc` builds `f_a` itself.
pub const DEFAULT_RTOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScError {
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("window [{lo}, {hi}] is not admissible: {reason}")]
    Domain { lo: f64, hi: f64, reason: String },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScParams {
    pub eps1: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub t0: f64,
    pub pinch2_eps: f64,
}

impl ScParams {
    pub fn new(data: &DataC, eps1: f64, alpha: f64, lambda: f64, t0: f64, pinch2_eps: f64) -> Result<Self, ScError> {
        let p = Self { eps1, alpha, lambda, t0, pinch2_eps };
        p.validate(data)?;
        Ok(p)
    }

    pub fn validate(&self, data: &DataC) -> Result<(), ScError> {
        let fail = |m: String| Err(ScError::Params(m));
        if !(data.eps_tilde < self.eps1 && self.eps1 < data.eps) {
            return fail(format!("need eps_tilde < eps1 < eps, got {} < {} < {}", data.eps_tilde, self.eps1, data.eps));
        }
        if !(self.alpha > 0.0 && self.alpha < self.eps1 - data.eps_tilde) {
            return fail(format!("need 0 < alpha < eps1 - eps_tilde, got alpha = {}", self.alpha));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return fail(format!("need 0 < lambda < 1, got {}", self.lambda));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return fail(format!("need t0 > 0, got {}", self.t0));
        }
        if !(self.pinch2_eps > 0.0 && self.pinch2_eps.is_finite()) {
            return fail(format!("need pinch2_eps > 0, got {}", self.pinch2_eps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Branch1,
    Branch1IncreasingB,
    Branch2,
    None,
}

/// One evaluation point. For branch 1 `slack` is the smaller of the two log-slacks
/// and `value` is the upper one; for branch 2 `value` is `log L(t)` and `slack` is
/// the decrease of `log L` since the previous point of the top decade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackPoint {
    pub t: f64,
    pub slack: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: Branch,
    pub pass: bool,
    /// Why the branch was not applicable or failed.
    pub reason: Option<String>,
    pub first_violation: Option<f64>,
    pub min_slack: Option<f64>,
    pub sup_log_l: Option<f64>,
    /// Least-squares slope of `log L` against `log t` over the top decade.
    pub trend_slope: Option<f64>,
    pub evidence: Vec<SlackPoint>,
}

impl BranchReport {
    fn not_applicable(branch: Branch, reason: String) -> Self {
        Self {
            branch,
            pass: false,
            reason: Some(reason),
            first_violation: None,
            min_slack: None,
            sup_log_l: None,
            trend_slope: None,
            evidence: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScVerdict {
    pub branch: Branch,
    pub witness: ScParams,
    pub window: (f64, f64),
    /// Evidence of the deciding branch (empty for `none`).
    pub evidence: Vec<SlackPoint>,
    /// Every branch that was run, in order.
    pub reports: Vec<BranchReport>,
    pub caveat: String,
}

impl ScVerdict {
    /// Worst recorded slack of the deciding branch.
    pub fn min_slack(&self) -> Option<f64> {
        self.evidence.iter().map(|p| p.slack).fold(None, |m, s| Some(m.map_or(s, |m: f64| m.min(s))))
    }

    pub fn report(&self, branch: Branch) -> Option<&BranchReport> {
        self.reports.iter().find(|r| r.branch == branch)
    }

    fn from_reports(reports: Vec<BranchReport>, witness: ScParams, window: (f64, f64)) -> Self {
        let (branch, evidence) = match reports.iter().find(|r| r.pass) {
            Some(r) => (r.branch, r.evidence.clone()),
            None => (Branch::None, Vec::new()),
        };
        Self { branch, witness, window, evidence, reports, caveat: CAVEAT.into() }
    }
}

fn check_window(window: (f64, f64), min_lo: f64, sol: &JacobiSolution, why: &str) -> Result<(), ScError> {
    let (lo, hi) = window;
    if !(lo >= min_lo && hi > lo && hi.is_finite()) {
        return Err(ScError::Domain { lo, hi, reason: format!("{why} (need {min_lo} <= lo < hi)") });
    }
    if hi > sol.t_max() * (1.0 + 1e-12) {
        return Err(ScError::Domain { lo, hi, reason: format!("f_a is only solved up to {}", sol.t_max()) });
    }
    Ok(())
}

/// Log-slacks `(lower, upper)` of the branch-1 inequality at `t`; both are `>= 0`
/// when the inequality holds. `increasing_b` selects the `f_a(t - t0)` variant.
pub fn branch1_slack(
    data: &DataC,
    params: &ScParams,
    sol_a: &JacobiSolution,
    t: f64,
    increasing_b: bool,
) -> Result<(f64, f64), ScError> {
    let lt = t.ln();
    let llt = lt.ln();
    let lb = data.profile.b.ln_eval(t)?;
    let lower = lb - (data.eps_tilde * llt - lt);
    let s = if increasing_b { t - params.t0 } else { params.lambda * t };
    if !(s > 0.0) {
        return Err(ScError::Domain { lo: t, hi: t, reason: format!("t - t0 = {s} is not positive") });
    }
    // log f_a'(t) - log f_a(t) = log u(t)
    let rhs = sol_a.u(t)?.ln() + sol_a.log_f(s)? - lt - (1.0 + 2.0 * params.alpha) * llt;
    Ok((lower, rhs - lb))
}

/// Branch 1 on `window`, general (`increasing_b = false`) or increasing-`b` variant.
pub fn check_branch1_variant(
    data: &DataC,
    params: &ScParams,
    sol_a: &JacobiSolution,
    window: (f64, f64),
    increasing_b: bool,
) -> Result<BranchReport, ScError> {
    params.validate(data)?;
    let branch = if increasing_b { Branch::Branch1IncreasingB } else { Branch::Branch1 };
    check_window(window, data.t1.max(std::f64::consts::E), sol_a, "window must start at or above max(T1, e)")?;
    let mono = data.profile.b.monotonicity();
    match (mono, increasing_b) {
        (Monotonicity::None, _) => return Err(ScError::Hypothesis("b must be declared monotonic".into())),
        (Monotonicity::Decreasing, true) => {
            return Err(ScError::Hypothesis("the t - t0 variant needs b declared increasing".into()))
        }
        _ => {}
    }
    if increasing_b && window.0 <= params.t0 {
        return Err(ScError::Domain { lo: window.0, hi: window.1, reason: "window must start above t0".into() });
    }
    let grid = geometric_grid(window.0, window.1, DEFAULT_PER_DECADE);
    if let Some(t) = data.profile.b.check_monotonicity(&grid)? {
        return Err(ScError::Hypothesis(format!("b is not monotonic as declared near t = {t}")));
    }
    let c = check_c_conditions(data, &grid)?;
    if let Some(bad) = c.conditions.iter().find(|r| !r.pass) {
        let mut r = BranchReport::not_applicable(
            branch,
            format!("{} fails at t = {}", bad.name, bad.first_violation.unwrap_or(f64::NAN)),
        );
        r.first_violation = bad.first_violation;
        return Ok(r);
    }
    let mut evidence = Vec::with_capacity(grid.len());
    let mut first_violation = None;
    for &t in &grid {
        let (lower, upper) = branch1_slack(data, params, sol_a, t, increasing_b)?;
        let slack = if lower.is_nan() || upper.is_nan() { f64::NEG_INFINITY } else { lower.min(upper) };
        if slack < 0.0 && first_violation.is_none() {
            first_violation = Some(t);
        }
        evidence.push(SlackPoint { t, slack, value: upper });
    }
    let min_slack = evidence.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
    Ok(BranchReport {
        branch,
        pass: first_violation.is_none(),
        reason: first_violation.map(|t| format!("pinching inequality fails at t = {t}")),
        first_violation,
        min_slack: Some(min_slack),
        sup_log_l: None,
        trend_slope: None,
        evidence,
    })
}

/// Branch 1, picking the variant from the declared monotonicity of `b`.
pub fn check_branch1(data: &DataC, params: &ScParams, sol_a: &JacobiSolution, window: (f64, f64)) -> Result<ScVerdict, ScError> {
    let inc = data.profile.b.monotonicity() == Monotonicity::Increasing;
    let mut reports = vec![check_branch1_variant(data, params, sol_a, window, false)?];
    if inc && !reports[0].pass {
        reports.push(check_branch1_variant(data, params, sol_a, window, true)?);
    }
    Ok(ScVerdict::from_reports(reports, *params, window))
}

/// `log L(t)` for branch 2.
pub fn log_l(data: &DataC, sol_a: &JacobiSolution, pinch2_eps: f64, t: f64) -> Result<f64, ScError> {
    let lt = t.ln();
    Ok(lt + (1.0 + pinch2_eps) * lt.ln() + data.profile.b.ln_eval(t)?
        - sol_a.u(t - 2.0)?.ln()
        - sol_a.log_f(t - 3.0)?)
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Branch 2 on `window`.
pub fn check_branch2_report(
    data: &DataC,
    sol_a: &JacobiSolution,
    pinch2_eps: f64,
    window: (f64, f64),
) -> Result<BranchReport, ScError> {
    if !(pinch2_eps > 0.0) {
        return Err(ScError::Params(format!("pinch2_eps must be positive, got {pinch2_eps}")));
    }
    check_window(window, 3.0, sol_a, "t - 3 must stay positive")?;
    let (a, b) = (&data.profile.a, &data.profile.b);
    if !(b.eval(0.0)? > 0.0) {
        return Err(ScError::Hypothesis("b(0) must be positive".into()));
    }
    for (name, g) in [("a", a), ("b", b)] {
        if g.monotonicity() != Monotonicity::Increasing {
            return Err(ScError::Hypothesis(format!("{name} must be declared non-decreasing")));
        }
    }
    let grid = geometric_grid(window.0, window.1, DEFAULT_PER_DECADE);
    let check_grid: Vec<f64> = std::iter::once(0.0).chain(grid.iter().copied()).collect();
    for (name, g) in [("a", a), ("b", b)] {
        if let Some(t) = g.check_monotonicity(&check_grid)? {
            return Err(ScError::Hypothesis(format!("{name} decreases near t = {t}")));
        }
    }
    let top_lo = (window.1 / 10.0).max(window.0);
    let tol = 10.0 * sol_a.rtol();
    let mut evidence = Vec::new();
    let mut sup = f64::NEG_INFINITY;
    let mut first_violation = None;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut prev: Option<f64> = None;
    for &t in &grid {
        let v = log_l(data, sol_a, pinch2_eps, t)?;
        sup = sup.max(v);
        if t < top_lo {
            continue;
        }
        let slack = prev.map_or(0.0, |p| p - v);
        if slack < -tol * (1.0 + v.abs()) && first_violation.is_none() {
            first_violation = Some(t);
        }
        prev = Some(v);
        xs.push(t.ln());
        ys.push(v);
        evidence.push(SlackPoint { t, slack, value: v });
    }
    let bounded = sup.is_finite();
    let trend = if xs.len() >= 2 { Some(ls_slope(&xs, &ys)) } else { None };
    let pass = bounded && first_violation.is_none();
    let reason = if !bounded {
        Some("log L is not finite on the window".to_string())
    } else {
        first_violation.map(|t| format!("log L increases at t = {t} within the top decade"))
    };
    Ok(BranchReport {
        branch: Branch::Branch2,
        pass,
        reason,
        first_violation,
        min_slack: evidence.iter().skip(1).map(|p| p.slack).reduce(f64::min),
        sup_log_l: Some(sup),
        trend_slope: trend,
        evidence,
    })
}

pub fn check_branch2(data: &DataC, sol_a: &JacobiSolution, pinch2_eps: f64, window: (f64, f64), witness: ScParams) -> Result<ScVerdict, ScError> {
    let r = check_branch2_report(data, sol_a, pinch2_eps, window)?;
    Ok(ScVerdict::from_reports(vec![r], witness, window))
}

fn soft(branch: Branch, r: Result<BranchReport, ScError>) -> Result<BranchReport, ScError> {
    match r {
        Err(ScError::Hypothesis(m)) => Ok(BranchReport::not_applicable(branch, m)),
        Err(ScError::Domain { reason, .. }) if branch == Branch::Branch2 || branch == Branch::Branch1IncreasingB => {
            Ok(BranchReport::not_applicable(branch, reason))
        }
        other => other,
    }
}

/// Run branch 1 (both variants) and branch 2 with a supplied `f_a`.
pub fn decide_sc_with(data: &DataC, params: &ScParams, sol_a: &JacobiSolution, window: (f64, f64)) -> Result<ScVerdict, ScError> {
    params.validate(data)?;
    let reports = vec![
        soft(Branch::Branch1, check_branch1_variant(data, params, sol_a, window, false))?,
        soft(Branch::Branch1IncreasingB, check_branch1_variant(data, params, sol_a, window, true))?,
        soft(Branch::Branch2, check_branch2_report(data, sol_a, params.pinch2_eps, window))?,
    ];
    Ok(ScVerdict::from_reports(reports, *params, window))
}

/// Solve for `f_a` on the window and run all branches.
pub fn decide_sc(data: &DataC, params: &ScParams, window: (f64, f64)) -> Result<ScVerdict, ScError> {
    let sol = solve_jacobi(&data.profile.a, window.1, DEFAULT_RTOL)?;
    decide_sc_with(data, params, &sol, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{catalog_lookup, CurvatureProfile, RadialFunction};
    use std::collections::BTreeMap;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn log_pinched() -> DataC {
        let p = catalog_lookup("log-pinched", &params(&[("eps", 1.0), ("eps_tilde", 0.5), ("core", 1.0)]), Some(10.0)).unwrap();
        DataC::new(p, 10.0, 1.0, 0.5, 2.0, 2).unwrap()
    }

    #[test]
    fn params_reject_alpha_too_large() {
        let d = log_pinched();
        assert!(ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).is_ok());
        assert!(matches!(ScParams::new(&d, 0.75, 0.25, 0.75, 1.0, 0.1), Err(ScError::Params(_))));
        assert!(ScParams::new(&d, 1.0, 0.2, 0.75, 1.0, 0.1).is_err());
        assert!(ScParams::new(&d, 0.75, 0.2, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn log_pinched_takes_branch1() {
        let d = log_pinched();
        let p = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
        let v = decide_sc(&d, &p, (100.0, 1e5)).unwrap();
        assert_eq!(v.branch, Branch::Branch1);
        assert!(v.min_slack().unwrap() >= 0.0);
        assert_eq!(v.caveat, CAVEAT);
    }

    #[test]
    fn zero_b_fails_lower_bar() {
        let a = RadialFunction::constant(1.0);
        let b = RadialFunction::constant(0.0);
        let prof = CurvatureProfile::new(a.clone(), b, 0.0).unwrap();
        let d = DataC { profile: prof, t1: 10.0, eps: 1.0, eps_tilde: 0.5, c1: 2.0, dim: 2 };
        let sol = solve_jacobi(&a, 200.0, 1e-8).unwrap();
        let p = ScParams { eps1: 0.75, alpha: 0.2, lambda: 0.75, t0: 1.0, pinch2_eps: 0.1 };
        let (lower, _) = branch1_slack(&d, &p, &sol, 50.0, false).unwrap();
        assert_eq!(lower, f64::NEG_INFINITY);
        assert!(matches!(check_branch2_report(&d, &sol, 0.1, (10.0, 100.0)), Err(ScError::Hypothesis(_))));
    }

    #[test]
    fn euclidean_gives_none() {
        let p = catalog_lookup("euclidean", &BTreeMap::new(), None).unwrap();
        let d = DataC::new(p, 10.0, 1.0, 0.5, 2.0, 2).unwrap();
        let sp = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
        let v = decide_sc(&d, &sp, (10.0, 1000.0)).unwrap();
        assert_eq!(v.branch, Branch::None);
        assert!(v.reports[0].reason.as_deref().unwrap().starts_with("C1"));
    }

    #[test]
    fn window_below_threshold_is_domain_error() {
        let d = log_pinched();
        let p = ScParams::new(&d, 0.75, 0.2, 0.75, 1.0, 0.1).unwrap();
        let sol = solve_jacobi(&d.profile.a, 1e3, 1e-8).unwrap();
        assert!(matches!(check_branch1(&d, &p, &sol, (5.0, 100.0)), Err(ScError::Domain { .. })));
        assert!(matches!(check_branch1(&d, &p, &sol, (20.0, 1e4)), Err(ScError::Domain { .. })));
    }

    #[test]
    fn hyperbolic_branch2_closed_form() {
        // L = t (log t)^{1+e} tanh(t-2) / sinh(t-3)
        let p = catalog_lookup("constant", &params(&[("k", 1.0)]), None).unwrap();
        let d = DataC::new(p, 10.0, 1.0, 0.5, 2.0, 2).unwrap();
        let sol = solve_jacobi(&d.profile.a, 100.0, 1e-10).unwrap();
        for t in [5.0f64, 20.0, 60.0] {
            let lt: f64 = t.ln();
            let want = lt + 1.1 * lt.ln() + (t - 2.0).tanh().ln() - (t - 3.0).sinh().ln();
            assert!((log_l(&d, &sol, 0.1, t).unwrap() - want).abs() < 1e-8);
        }
    }
}
