//! Convexity bookkeeping: the perturbation size `eps_R`, the Hessian margin it
//! guarantees, the strict-convexity margin of the sublevel sets
//! `{phi(h) g(rho) <= R}`, and the iterative exhaustion with its angle budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::{JacobiError, JacobiSolution};
use crate::models::{x_coth_x, CurvatureProfile, DataC, ModelError};
use crate::sc_gate::{ScError, ScParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexityError {
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sc(#[from] ScError),
    #[error("degenerate profile: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no r0 on the candidate grid gives a converged trace (largest tried: {0})")]
    NoR0(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RuleVariant {
    /// Cutoff with transition on `[1/2, 1]`: `eps_R = beta u(R) / b(R+1)`.
    UnitBump,
    /// Cutoff with transition on `[eps, 2 eps]`.
    EpsBump { eps: f64 },
    /// Unit-bump `eps_R`, intervals of length `1/(n+1)`.
    HarmonicStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRule {
    pub beta: f64,
    pub variant: RuleVariant,
    /// Bound on the cutoff derivatives.
    pub l_bump: f64,
}

impl EpsilonRule {
    pub fn new(beta: f64, variant: RuleVariant, l_bump: f64) -> Result<Self, ConvexityError> {
        let r = Self { beta, variant, l_bump };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ConvexityError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ConvexityError::Precondition(format!("beta must be positive, got {}", self.beta)));
        }
        if let RuleVariant::EpsBump { eps } = self.variant {
            if !(eps > 0.0) {
                return Err(ConvexityError::Precondition(format!("bump width must be positive, got {eps}")));
            }
        }
        if !(self.l_bump > 0.0 && self.l_bump.is_finite()) {
            return Err(ConvexityError::Precondition(format!("L must be positive, got {}", self.l_bump)));
        }
        Ok(())
    }

    fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..*self }
    }
}

fn check_level(profile: &CurvatureProfile, sol_a: &JacobiSolution, r: f64) -> Result<(), ConvexityError> {
    if !(r >= profile.r_star) || !(r > 0.0) {
        return Err(ConvexityError::Precondition(format!("R = {r} lies below r_star = {}", profile.r_star)));
    }
    if r > sol_a.t_max() {
        return Err(JacobiError::OutOfRange { t: r, t_max: sol_a.t_max() }.into());
    }
    Ok(())
}

/// `ln eps_R`, finite as long as `b` is positive where it is sampled.
pub fn ln_epsilon_r(rule: &EpsilonRule, profile: &CurvatureProfile, sol_a: &JacobiSolution, r: f64) -> Result<f64, ConvexityError> {
    rule.validate()?;
    check_level(profile, sol_a, r)?;
    let ln_u = sol_a.u(r)?.ln();
    let b = &profile.b;
    match rule.variant {
        RuleVariant::UnitBump | RuleVariant::HarmonicStep => {
            let lb = b.ln_eval(r + 1.0)?;
            if lb == f64::NEG_INFINITY {
                return Err(ConvexityError::Degenerate(format!("b({}) = 0", r + 1.0)));
            }
            Ok(rule.beta.ln() - lb + ln_u)
        }
        RuleVariant::EpsBump { eps } => {
            if eps.is_infinite() {
                // eps / (b coth(b eps)) -> 1/b
                let lb = b.ln_eval(r + 2.0 * eps.min(f64::MAX))?;
                return Ok(rule.beta.ln() + ln_u - lb);
            }
            let bb = b.eval(r + 2.0 * eps)?;
            // eps / (b coth(b eps)) = eps^2 / x_coth_x(b eps)
            let second = 2.0 * eps.ln() - x_coth_x(bb * eps).ln();
            Ok(rule.beta.ln() + ln_u + (2.0 * eps.ln()).min(second))
        }
    }
}

pub fn epsilon_r(rule: &EpsilonRule, profile: &CurvatureProfile, sol_a: &JacobiSolution, r: f64) -> Result<f64, ConvexityError> {
    Ok(ln_epsilon_r(rule, profile, sol_a, r)?.exp())
}

/// Lower bound on the Hessian of `rho - eps_R phi(rho_p)` on the level set:
/// `u(R) - eps_R L (u(R) + b(R+1) coth(k/2) + 1)` with `k = b(0)`, and for the
/// narrow bump `u(R) - eps_R L (u(R) + b_{R+2e} coth(b_{R+2e} e)/e + 1/e^2)`.
pub fn betal_margin(rule: &EpsilonRule, profile: &CurvatureProfile, sol_a: &JacobiSolution, r: f64) -> Result<f64, ConvexityError> {
    let eps_r = epsilon_r(rule, profile, sol_a, r)?;
    let u = sol_a.u(r)?;
    Ok(u - eps_r * rule.l_bump * hessian_bracket(rule, profile, u, r)?)
}

fn hessian_bracket(rule: &EpsilonRule, profile: &CurvatureProfile, u: f64, r: f64) -> Result<f64, ConvexityError> {
    let b = &profile.b;
    match rule.variant {
        RuleVariant::UnitBump | RuleVariant::HarmonicStep => {
            let k = b.eval(0.0)?;
            if !(k > 0.0) {
                return Err(ConvexityError::Degenerate("b(0) must be positive".into()));
            }
            Ok(u + b.eval(r + 1.0)? / (0.5 * k).tanh() + 1.0)
        }
        RuleVariant::EpsBump { eps } => {
            let bb = b.eval(r + 2.0 * eps)?;
            Ok(u + x_coth_x(bb * eps) / (eps * eps) + 1.0 / (eps * eps))
        }
    }
}

/// Largest `beta` with non-negative margin; the margin is affine in `beta`.
pub fn beta_threshold(rule: &EpsilonRule, profile: &CurvatureProfile, sol_a: &JacobiSolution, r: f64) -> Result<f64, ConvexityError> {
    let unit = rule.with_beta(1.0);
    let eps1 = epsilon_r(&unit, profile, sol_a, r)?;
    let u = sol_a.u(r)?;
    Ok(u / (eps1 * rule.l_bump * hessian_bracket(rule, profile, u, r)?))
}

/// Three lower-bound terms of the Hessian of `phi(h) g(rho)` on `{phi(h) g(rho) = R}`,
/// with `g = (log t)^alpha`. All terms are multiplied by `e^{scale_log}` (`= rho^2`)
/// so they stay representable when `rho` itself overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateMargin {
    #[serde(rename = "R")]
    pub r: f64,
    pub ln_rho: f64,
    pub c4: f64,
    pub scale_log: f64,
    pub dominant: f64,
    pub hessian_h: f64,
    pub bracket: f64,
    pub margin: f64,
}

/// Margin at `rho = e^{ln_rho}`:
///
/// ```text
///     dominant  =  R alpha u(rho) / (2 rho log rho)
///     hessian_h = -c4 (log rho)^alpha b(rho) / f_a(lambda rho)
///     bracket   = -c4^2 (log rho)^{1+alpha} / f_a(lambda rho)^2
/// ```
pub fn certificate_margin_ln(
    data: &DataC,
    params: &ScParams,
    sol_a: &JacobiSolution,
    r: f64,
    ln_rho: f64,
    c4: f64,
) -> Result<CertificateMargin, ConvexityError> {
    params.validate(data)?;
    if !(ln_rho > 1.0) {
        return Err(ConvexityError::Precondition(format!("rho must exceed e, got ln rho = {ln_rho}")));
    }
    if !(c4 >= 0.0 && c4.is_finite()) {
        return Err(ConvexityError::Precondition(format!("c4 must be non-negative, got {c4}")));
    }
    let alpha = params.alpha;
    let ln_g = alpha * ln_rho.ln();
    if !(r > 0.0 && ln_g >= r.ln() * (1.0 - 1e-15)) {
        return Err(ConvexityError::Precondition(format!(
            "rho is outside the boundary regime (log rho)^alpha >= R = {r}"
        )));
    }
    let s = ln_rho;
    let ls = s.ln();
    let scale_log = 2.0 * s;
    let ln_u = sol_a.ln_u_ln(s)?;
    let ln_fl = sol_a.log_f_ln(s + params.lambda.ln())?;
    let ln_b = data.profile.b.ln_at_ln(s)?;
    // rho^2 * R alpha u / (2 rho log rho) = R alpha (rho u) / (2 log rho)
    let dominant = r * alpha * (s + ln_u).exp() / (2.0 * s);
    let hessian_h = if c4 == 0.0 { 0.0 } else { -c4 * (ln_g + ln_b - ln_fl + scale_log).exp() };
    let bracket = if c4 == 0.0 { 0.0 } else { -c4 * c4 * ((1.0 + alpha) * ls - 2.0 * ln_fl + scale_log).exp() };
    Ok(CertificateMargin { r, ln_rho, c4, scale_log, dominant, hessian_h, bracket, margin: dominant + hessian_h + bracket })
}

pub fn certificate_margin(
    data: &DataC,
    params: &ScParams,
    sol_a: &JacobiSolution,
    r: f64,
    rho: f64,
    c4: f64,
) -> Result<CertificateMargin, ConvexityError> {
    if !(rho > std::f64::consts::E) {
        return Err(ConvexityError::Precondition(format!("rho must exceed e, got {rho}")));
    }
    certificate_margin_ln(data, params, sol_a, r, rho.ln(), c4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub i: usize,
    pub r: f64,
    /// Realized increment: `r_{i+1} - r_i` holds exactly.
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    /// Largest realized radius in the interval, if any.
    pub r_n: Option<f64>,
    pub eps_n: Option<f64>,
    /// Realized radii in `[lo, hi)`.
    pub realized: usize,
    pub t_n_bound: f64,
    pub theta_n_bound: f64,
    pub term: f64,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStatus {
    Converged,
    /// The partial sum already exceeds the budget.
    Exceeded,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionTrace {
    pub r0: f64,
    pub alpha_budget: f64,
    pub c_angle: f64,
    pub rule: EpsilonRule,
    pub rows: Vec<TraceRow>,
    pub steps: Vec<Step>,
    pub status: TraceStatus,
    pub converged: bool,
    /// Estimated bound on the remaining terms at the stopping row.
    pub tail_bound: f64,
    pub sum: f64,
    /// `eps_i` never increased along the realized steps.
    pub eps_nonincreasing: bool,
    /// `b` non-decreasing and `u` non-increasing on the traversed range, the
    /// hypotheses under which the counting bound is justified.
    pub monotone_hypotheses: bool,
    pub note: Option<String>,
}

/// Default number of intervals a trace may use.
pub const DEFAULT_N_MAX: usize = 400;

fn interval(variant: &RuleVariant, r0: f64, n: usize, harmonic: &mut Vec<f64>) -> (f64, f64) {
    match variant {
        RuleVariant::HarmonicStep => {
            // harmonic[n] = sum_{i=1}^{n} 1/i
            while harmonic.len() <= n + 1 {
                let m = harmonic.len();
                let last = *harmonic.last().unwrap_or(&0.0);
                harmonic.push(if m == 0 { 0.0 } else { last + 1.0 / m as f64 });
            }
            (r0 + harmonic[n], r0 + harmonic[n + 1])
        }
        _ => (r0 + n as f64, r0 + n as f64 + 1.0),
    }
}

/// Tail estimate from the last few terms: geometric when the term ratio stays
/// below 0.9, otherwise a power-law fit in `n + 1`. Infinite when neither applies.
fn tail_estimate(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let last = terms[n - 1];
    if last == 0.0 {
        return 0.0;
    }
    let q = (n - 3..n).map(|m| terms[m] / terms[m - 1]).fold(0.0, f64::max);
    if q < 0.9 {
        return last * q / (1.0 - q);
    }
    let p = (n - 3..n)
        .map(|m| (terms[m - 1] / terms[m]).ln() / ((m + 1) as f64 / m as f64).ln())
        .fold(f64::INFINITY, f64::min);
    if p > 1.0 + 1e-3 {
        last * n as f64 / (p - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Run the exhaustion: `r_{i+1} = r_i + eps_{r_i}` from `r0`, with intervals
/// `I_n`, counting bound `t_n <= |I_n| / eps(top of I_n)` and angle bound
/// `theta_n <= c / f_a(r0 + n - 1)` (unit intervals) or `c / f_a(top of I_n)` (harmonic).
pub fn run_construction(
    profile: &CurvatureProfile,
    sol_a: &JacobiSolution,
    rule: &EpsilonRule,
    r0: f64,
    alpha_budget: f64,
    c_angle: f64,
    n_max: usize,
) -> Result<ConstructionTrace, ConvexityError> {
    rule.validate()?;
    if !(r0 >= profile.r_star) {
        return Err(ConvexityError::Precondition(format!("r0 = {r0} lies below r_star = {}", profile.r_star)));
    }
    let harmonic_variant = matches!(rule.variant, RuleVariant::HarmonicStep);
    if !harmonic_variant && !(r0 > 1.0) {
        return Err(ConvexityError::Precondition(format!("r0 = {r0} must exceed 1 so that f_a(r0 - 1) > 0")));
    }
    if !(alpha_budget > 0.0 && alpha_budget <= std::f64::consts::FRAC_PI_2) {
        return Err(ConvexityError::Precondition(format!("alpha must lie in (0, pi/2], got {alpha_budget}")));
    }
    if !(c_angle > 0.0 && c_angle.is_finite()) {
        return Err(ConvexityError::Precondition(format!("c must be positive, got {c_angle}")));
    }
    if n_max == 0 {
        return Err(ConvexityError::Precondition("n_max must be at least 1".into()));
    }
    let t_max = sol_a.t_max();
    let lnc = c_angle.ln();
    let mut harmonic = Vec::new();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut terms = Vec::new();
    let mut r = r0;
    let mut i = 0usize;
    let mut partial = 0.0;
    let mut status = TraceStatus::Inconclusive;
    let mut tail_bound = f64::INFINITY;
    let mut note = None;
    let mut eps_nonincreasing = true;
    let mut monotone = true;
    let mut prev_eps = f64::INFINITY;
    let mut prev_b = f64::NEG_INFINITY;
    let mut prev_u = f64::INFINITY;
    'outer: for n in 0..n_max {
        let (lo, hi) = interval(&rule.variant, r0, n, &mut harmonic);
        // the counting bound evaluates eps at the top, b one unit (or 2 eps) beyond it
        let reach = hi + 1.0 + match rule.variant {
            RuleVariant::EpsBump { eps } => 2.0 * eps,
            _ => 0.0,
        };
        if hi > t_max || reach > profile.b.domain().1 {
            note = Some(format!("profile or solver range ends before interval [{lo}, {hi}]"));
            break;
        }
        let mut realized = 0usize;
        let mut last: Option<(f64, f64)> = None;
        while r < hi {
            let eps = epsilon_r(rule, profile, sol_a, r)?;
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(ConvexityError::Degenerate(format!("eps_R = {eps} at R = {r}")));
            }
            let next = r + eps;
            let realized_eps = next - r;
            if realized_eps <= 0.0 {
                return Err(ConvexityError::Degenerate(format!("eps_R = {eps} underflows at R = {r}")));
            }
            // eps comes from the dense solution, so allow for its tolerance
            if eps > prev_eps * (1.0 + 10.0 * sol_a.rtol()) {
                eps_nonincreasing = false;
            }
            prev_eps = eps;
            let (bv, uv) = (profile.b.eval(r + 1.0)?, sol_a.u(r)?);
            if bv < prev_b || uv > prev_u * (1.0 + 10.0 * sol_a.rtol()) {
                monotone = false;
            }
            prev_b = bv;
            prev_u = uv;
            if r >= lo {
                realized += 1;
                last = Some((r, realized_eps));
            }
            steps.push(Step { i, r, eps: realized_eps });
            i += 1;
            r = next;
            if next > t_max {
                note = Some(format!("solver range ends at {t_max}"));
                break 'outer;
            }
        }
        let len = hi - lo;
        let t_n = len / epsilon_r(rule, profile, sol_a, hi)?;
        let ln_theta = if harmonic_variant {
            lnc - sol_a.log_f(hi)?
        } else {
            lnc - sol_a.log_f(r0 + n as f64 - 1.0)?
        };
        let theta = ln_theta.exp();
        let term = (t_n.ln() + ln_theta).exp();
        partial += term;
        terms.push(term);
        rows.push(TraceRow {
            n,
            lo,
            hi,
            r_n: last.map(|p| p.0),
            eps_n: last.map(|p| p.1),
            realized,
            t_n_bound: t_n,
            theta_n_bound: theta,
            term,
            partial_sum: partial,
        });
        if partial > alpha_budget {
            status = TraceStatus::Exceeded;
            tail_bound = tail_estimate(&terms);
            break;
        }
        tail_bound = tail_estimate(&terms);
        if partial + tail_bound <= alpha_budget {
            status = TraceStatus::Converged;
            break;
        }
    }
    if status == TraceStatus::Inconclusive && note.is_none() {
        note = Some(format!("no decision within n_max = {n_max} intervals"));
    }
    Ok(ConstructionTrace {
        r0,
        alpha_budget,
        c_angle,
        rule: *rule,
        rows,
        steps,
        status,
        converged: status == TraceStatus::Converged,
        tail_bound,
        sum: partial,
        eps_nonincreasing,
        monotone_hypotheses: monotone,
        note,
    })
}

/// Least candidate `r0` (solver nodes above `max(r_star, 1)`) with a converged
/// trace, found by bisection assuming convergence is monotone in `r0`.
pub fn find_r0(
    profile: &CurvatureProfile,
    sol_a: &JacobiSolution,
    rule: &EpsilonRule,
    alpha_budget: f64,
    c_angle: f64,
) -> Result<f64, ConvexityError> {
    if !(alpha_budget > 0.0 && alpha_budget <= std::f64::consts::FRAC_PI_2) {
        return Err(ConvexityError::Precondition(format!("alpha must lie in (0, pi/2], got {alpha_budget}")));
    }
    let lo = profile.r_star.max(1.0);
    // leave room for a few intervals past the candidate
    let hi = sol_a.t_max() - 8.0;
    let cand: Vec<f64> = sol_a.t_grid().into_iter().filter(|&t| t > lo && t <= hi).collect();
    if cand.is_empty() {
        return Err(ConvexityError::NoR0(lo));
    }
    let ok = |r0: f64| -> Result<bool, ConvexityError> {
        Ok(run_construction(profile, sol_a, rule, r0, alpha_budget, c_angle, DEFAULT_N_MAX)?.converged)
    };
    let last = *cand.last().expect("non-empty");
    if !ok(last)? {
        return Err(ConvexityError::NoR0(last));
    }
    if ok(cand[0])? {
        return Ok(cand[0]);
    }
    let (mut a, mut b) = (0usize, cand.len() - 1);
    while b - a > 1 {
        let m = (a + b) / 2;
        if ok(cand[m])? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(cand[b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::solve_jacobi;
    use crate::models::RadialFunction;

    fn hyperbolic() -> (CurvatureProfile, JacobiSolution) {
        let one = RadialFunction::constant(1.0);
        let p = CurvatureProfile::new(one.clone(), one.clone(), 0.0).unwrap();
        let s = solve_jacobi(&one, 80.0, 1e-10).unwrap();
        (p, s)
    }

    #[test]
    fn unit_bump_closed_form() {
        let (p, s) = hyperbolic();
        let rule = EpsilonRule::new(0.1, RuleVariant::UnitBump, 4.0).unwrap();
        let e = epsilon_r(&rule, &p, &s, 3.0).unwrap();
        assert!((e - 0.1 / 3.0f64.tanh()).abs() < 1e-10);
        assert!((e - 0.100497).abs() < 1e-6);
    }

    #[test]
    fn margin_is_affine_with_zero_beta_limit() {
        let (p, s) = hyperbolic();
        let u = 1.0 / 5.0f64.tanh();
        let m = |beta: f64| betal_margin(&EpsilonRule::new(beta, RuleVariant::UnitBump, 4.0).unwrap(), &p, &s, 5.0).unwrap();
        assert!((m(1e-300) - u).abs() < 1e-9);
        let (m1, m2, m3) = (m(0.01), m(0.02), m(0.03));
        assert!((m3 - 2.0 * m2 + m1).abs() < 1e-12);
        assert!(m2 < m1);
        let th = beta_threshold(&EpsilonRule::new(1.0, RuleVariant::UnitBump, 4.0).unwrap(), &p, &s, 5.0).unwrap();
        assert!(m(th).abs() < 1e-12);
        assert!(m(10.0) < 0.0);
    }

    #[test]
    fn eps_bump_monotone_in_width() {
        let (p, s) = hyperbolic();
        let mut prev = 0.0;
        for w in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let e = epsilon_r(&EpsilonRule::new(0.1, RuleVariant::EpsBump { eps: w }, 4.0).unwrap(), &p, &s, 3.0).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn zero_b_is_degenerate() {
        let z = RadialFunction::constant(0.0);
        let p = CurvatureProfile::new(z.clone(), z.clone(), 0.0).unwrap();
        let s = solve_jacobi(&z, 10.0, 1e-8).unwrap();
        let rule = EpsilonRule::new(0.1, RuleVariant::UnitBump, 4.0).unwrap();
        assert!(matches!(epsilon_r(&rule, &p, &s, 3.0), Err(ConvexityError::Degenerate(_))));
    }

    #[test]
    fn trace_bookkeeping() {
        let (p, s) = hyperbolic();
        let rule = EpsilonRule::new(0.1, RuleVariant::UnitBump, 4.0).unwrap();
        let tr = run_construction(&p, &s, &rule, 5.0, std::f64::consts::FRAC_PI_2, 1.0, 200).unwrap();
        assert!(tr.converged);
        for w in tr.steps.windows(2) {
            assert_eq!(w[0].r + w[0].eps, w[1].r);
        }
        for w in tr.rows.windows(2) {
            assert!(w[1].partial_sum >= w[0].partial_sum);
        }
        for row in &tr.rows {
            assert!(row.realized as f64 <= row.t_n_bound.ceil() + 1.0);
        }
        assert!(tr.eps_nonincreasing && tr.monotone_hypotheses);
        assert!(tr.sum + tr.tail_bound <= tr.alpha_budget);
    }

    #[test]
    fn bad_budget_rejected() {
        let (p, s) = hyperbolic();
        let rule = EpsilonRule::new(0.1, RuleVariant::UnitBump, 4.0).unwrap();
        assert!(matches!(find_r0(&p, &s, &rule, std::f64::consts::PI, 1.0), Err(ConvexityError::Precondition(_))));
    }
}
