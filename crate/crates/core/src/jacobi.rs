//! Jacobi solutions `f'' = k^2 f`, `f(0) = 0`, `f'(0) = 1`, stored as
//! `(log f, u = f'/f)` so that growth like `sinh(sinh t)` stays representable.
//!
//! Near the origin the series `u = 1/t + k(0)^2 t/3 + (k^2)'(0) t^2/4` is used up to
//! `t0 = 1e-3`. Beyond that the Riccati equation `u' = k^2 - u^2` is integrated
//! in `t`, and past `LOG_SWITCH` in `s = ln t` with `v = t u`:
//!
//! ```text
//!     dv/ds = t^2 k^2 + v - v^2,     d(log f)/ds = v
//! ```
//!
//! which reaches radii like `e^(1e5)` in a few hundred steps.

use std::cell::RefCell;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{CurvatureProfile, ModelError, Monotonicity, RadialFunction, DEFAULT_PER_DECADE};
use crate::quad::{self, QuadError};
use crate::riccati::{self, Coeffs, Node, RiccatiError, RiccatiOptions};

pub const SERIES_T0: f64 = 1e-3;
/// Radius beyond which the solver works in logarithmic time.
pub const LOG_SWITCH: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JacobiError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("curvature root is negative or undefined at t = {t} (value {value})")]
    NegativeK { t: f64, value: f64 },
    #[error("integration failed (last good t = {last_good_t}): {source}")]
    Integration { last_good_t: f64, source: RiccatiError },
    #[error("t = {t} outside the solved range (0, {t_max}]")]
    OutOfRange { t: f64, t_max: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("no tail majorant declared for the integral beyond t = {0}")]
    MissingTail(f64),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

fn k_squared(k: &RadialFunction, t: f64) -> Result<f64, JacobiError> {
    let v = k.eval(t)?;
    if !(v >= 0.0) {
        return Err(JacobiError::NegativeK { t, value: v });
    }
    if v < 1e150 {
        Ok(v * v)
    } else {
        Ok((2.0 * k.ln_eval(t)?).exp())
    }
}

/// Overflow-safe Jacobi solution on `(0, t_max]`.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    k: RadialFunction,
    k0sq: f64,
    dk0sq: f64,
    /// Nodes in `t` with `y = u`, `integral = log f`.
    lin: Vec<Node>,
    /// Nodes in `s = ln t` with `y = t u`, `integral = log f`.
    logseg: Vec<Node>,
    lin_d: Vec<Deriv>,
    log_d: Vec<Deriv>,
    ln_t_max: f64,
    rtol: f64,
}

fn validate_rtol(rtol: f64) -> Result<(), JacobiError> {
    if rtol > 0.0 && rtol <= 1e-2 {
        Ok(())
    } else {
        Err(JacobiError::InvalidArgument(format!("rtol must lie in (0, 1e-2], got {rtol}")))
    }
}

fn integration_error(source: RiccatiError) -> JacobiError {
    let last_good_t = match &source {
        RiccatiError::Coefficients { x, .. } | RiccatiError::StepUnderflow { x } | RiccatiError::MaxSteps { x } => *x,
    };
    JacobiError::Integration { last_good_t, source }
}

/// Solve on `(0, t_max]`.
pub fn solve_jacobi(k: &RadialFunction, t_max: f64, rtol: f64) -> Result<JacobiSolution, JacobiError> {
    if !(t_max > SERIES_T0) || !t_max.is_finite() {
        return Err(JacobiError::InvalidArgument(format!("t_max must exceed {SERIES_T0}, got {t_max}")));
    }
    solve_jacobi_ln(k, t_max.ln(), rtol)
}

/// Solve on `(0, e^{ln_t_max}]`; use this when the radius itself overflows.
pub fn solve_jacobi_ln(k: &RadialFunction, ln_t_max: f64, rtol: f64) -> Result<JacobiSolution, JacobiError> {
    validate_rtol(rtol)?;
    if !(ln_t_max > SERIES_T0.ln()) || ln_t_max.is_nan() {
        return Err(JacobiError::InvalidArgument(format!("ln t_max must exceed ln {SERIES_T0}")));
    }
    let (_, dom_hi) = k.domain();
    if ln_t_max > dom_hi.ln() * (1.0 + 1e-15) {
        return Err(JacobiError::Model(ModelError::Domain { t: ln_t_max.exp(), lo: 0.0, hi: dom_hi }));
    }
    let k0sq = k_squared(k, 0.0)?;
    let h = 1e-6;
    let dk0sq = match k.deriv(0.0)? {
        Some(d) => 2.0 * k.eval(0.0)? * d,
        None => (k_squared(k, h)? - k0sq) / h,
    };
    let t0 = SERIES_T0;
    let u0 = 1.0 / t0 + k0sq * t0 / 3.0 + dk0sq * t0 * t0 / 4.0;
    let i0 = t0.ln() + k0sq * t0 * t0 / 6.0 + dk0sq * t0.powi(3) / 12.0;

    let opts = RiccatiOptions { rtol: 0.1 * rtol, atol: 1e-300, h_init: 1e-4 * t0, ..Default::default() };
    let t_lin_end = ln_t_max.exp().min(LOG_SWITCH);
    let stops: Vec<f64> = k.breakpoints();
    let failure: RefCell<Option<JacobiError>> = RefCell::new(None);
    let keep = |e: JacobiError| {
        failure.borrow_mut().get_or_insert(e.clone());
        e
    };
    let lin = riccati::integrate(
        |t: f64| -> Result<Coeffs, JacobiError> { Ok(Coeffs { a: k_squared(k, t).map_err(keep)?, b: 0.0 }) },
        t0,
        u0,
        i0,
        t_lin_end,
        &stops,
        &opts,
    )
    .map_err(|e| failure.borrow_mut().take().unwrap_or_else(|| integration_error(e)))?;

    let mut logseg = Vec::new();
    if ln_t_max > LOG_SWITCH.ln() {
        let last = *lin.last().expect("integrator returns the initial node");
        let s0 = LOG_SWITCH.ln();
        let log_stops: Vec<f64> = stops.iter().filter(|&&b| b > 0.0).map(|b| b.ln()).collect();
        logseg = riccati::integrate(
            |s: f64| -> Result<Coeffs, JacobiError> {
                let ln_k = k.ln_at_ln(s).map_err(|e| keep(e.into()))?;
                if ln_k.is_nan() {
                    return Err(keep(JacobiError::NegativeK { t: s.exp(), value: f64::NAN }));
                }
                Ok(Coeffs { a: (2.0 * s + 2.0 * ln_k).exp(), b: 1.0 })
            },
            s0,
            last.y * LOG_SWITCH,
            last.integral,
            ln_t_max,
            &log_stops,
            &RiccatiOptions { h_init: 1e-3, ..opts },
        )
        .map_err(|e| match failure.borrow_mut().take().unwrap_or_else(|| integration_error(e)) {
            JacobiError::Integration { last_good_t, source } => {
                JacobiError::Integration { last_good_t: last_good_t.exp(), source }
            }
            other => other,
        })?;
    }
    let bps = k.breakpoints();
    let lin_d = node_derivs(&lin, &bps, 0.0, opts.rtol, |t| k_squared(k, t))?;
    let log_bps: Vec<f64> = bps.iter().filter(|&&b| b > 0.0).map(|b| b.ln()).collect();
    let log_d = node_derivs(&logseg, &log_bps, 1.0, opts.rtol, |s| Ok((2.0 * s + 2.0 * k.ln_at_ln(s)?).exp()))?;
    Ok(JacobiSolution { k: k.clone(), k0sq, dk0sq, lin, logseg, lin_d, log_d, ln_t_max, rtol })
}

pub(crate) fn quintic(x0: f64, x1: f64, p: [f64; 6], x: f64) -> f64 {
    // p = [value0, d0, dd0, value1, d1, dd1]
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 0.5 * (s3 - 2.0 * s4 + s5);
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    p[0] * h0 + h * p[1] * h1 + h * h * p[2] * h2 + h * h * p[5] * h3 + h * p[4] * h4 + p[3] * h5
}

/// One-sided derivatives at a node: `(y'_left, y''_left, y'_right, y''_right)`.
#[derive(Debug, Clone, Copy)]
struct Deriv {
    dl: f64,
    ddl: f64,
    dr: f64,
    ddr: f64,
}

/// `A`, `A'`, `A''` at `x`, centred (`side = 0`) or from one side only.
fn coeff_jet<F>(coeff_a: &mut F, x: f64, side: f64) -> Result<(f64, f64, f64), JacobiError>
where
    F: FnMut(f64) -> Result<f64, JacobiError>,
{
    let h = 1e-4 * x.abs().max(1.0);
    if side == 0.0 {
        let (am, a0, ap) = (coeff_a(x - h)?, coeff_a(x)?, coeff_a(x + h)?);
        return Ok((a0, (ap - am) / (2.0 * h), (ap - 2.0 * a0 + am) / (h * h)));
    }
    let x1 = x + side * 1e-10 * x.abs().max(1.0);
    let (a1, a2, a3) = (coeff_a(x1)?, coeff_a(x1 + side * h)?, coeff_a(x1 + side * 2.0 * h)?);
    Ok((a1, side * (-3.0 * a1 + 4.0 * a2 - a3) / (2.0 * h), (a1 - 2.0 * a2 + a3) / (h * h)))
}

/// `(y', y'')` for `y' = A + b y - y^2` at a node whose value carries relative
/// error about `rt`. Close to the attracting equilibrium `p` the right-hand side
/// amplifies that error by the stiffness `2p - b`, and the derivatives of `p`
/// itself are used instead.
fn node_jet(y: f64, b: f64, rt: f64, (a, da, dda): (f64, f64, f64)) -> (f64, f64) {
    let co = Coeffs { a, b };
    let mut dy = co.rhs(y);
    let (p, _) = co.roots();
    let w = 2.0 * p - b;
    let noise = 4.0 * f64::EPSILON * (a.abs() + (b * y).abs() + y * y) + rt * y.abs() * w.abs();
    let dp = if w > 0.0 { da / w } else { 0.0 };
    if noise > 1e-3 * dy.abs() && w > 0.0 && (y - p).abs() <= 1e-3 * p.abs() {
        dy = dp;
    }
    let ddy = da + (b - 2.0 * y) * dy;
    let cancel = (da.abs() + ((b - 2.0 * y) * dy).abs()) / ddy.abs().max(f64::MIN_POSITIVE);
    if cancel > 1e4 && w > 0.0 && (y - p).abs() <= 1e-3 * p.abs() {
        return (dy, (dda - 2.0 * dp * dp) / w);
    }
    (dy, ddy)
}

/// `y'` and `y''` at every node, one-sided at breakpoints of `A` and at the ends.
fn node_derivs<F>(nodes: &[Node], bps: &[f64], b: f64, rt: f64, mut coeff_a: F) -> Result<Vec<Deriv>, JacobiError>
where
    F: FnMut(f64) -> Result<f64, JacobiError>,
{
    let mut out = Vec::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        let at_break = bps.iter().any(|&p| (p - n.x).abs() <= 1e-12 * p.abs().max(1.0));
        let first = i == 0;
        let last = i + 1 == nodes.len();
        let d = if at_break || first || last {
            let left = if first { None } else { Some(node_jet(n.y, b, rt, coeff_jet(&mut coeff_a, n.x, -1.0)?)) };
            let right = if last { None } else { Some(node_jet(n.y, b, rt, coeff_jet(&mut coeff_a, n.x, 1.0)?)) };
            let (dl, ddl) = left.or(right).expect("at least two nodes or a single side");
            let (dr, ddr) = right.unwrap_or((dl, ddl));
            Deriv { dl, ddl, dr, ddr }
        } else {
            let (d, dd) = node_jet(n.y, b, rt, coeff_jet(&mut coeff_a, n.x, 0.0)?);
            Deriv { dl: d, ddl: dd, dr: d, ddr: dd }
        };
        out.push(d);
    }
    Ok(out)
}

fn bracket(nodes: &[Node], x: f64) -> usize {
    nodes.partition_point(|n| n.x <= x).clamp(1, nodes.len() - 1)
}

fn dense_integral(nodes: &[Node], ds: &[Deriv], x: f64) -> f64 {
    let i = bracket(nodes, x);
    let (a, b) = (nodes[i - 1], nodes[i]);
    if x == a.x {
        return a.integral;
    }
    if x == b.x {
        return b.integral;
    }
    quintic(a.x, b.x, [a.integral, a.y, ds[i - 1].dr, b.integral, b.y, ds[i].dl], x)
}

fn dense_y(nodes: &[Node], ds: &[Deriv], x: f64) -> f64 {
    let i = bracket(nodes, x);
    let (a, b) = (nodes[i - 1], nodes[i]);
    if x == a.x {
        return a.y;
    }
    if x == b.x {
        return b.y;
    }
    let (da, db) = (ds[i - 1], ds[i]);
    quintic(a.x, b.x, [a.y, da.dr, da.ddr, b.y, db.dl, db.ddl], x)
}

impl JacobiSolution {
    pub fn k(&self) -> &RadialFunction {
        &self.k
    }

    pub fn rtol(&self) -> f64 {
        self.rtol
    }

    /// Largest solved radius; infinite when it exceeds the double range.
    pub fn t_max(&self) -> f64 {
        self.ln_t_max.exp()
    }

    pub fn ln_t_max(&self) -> f64 {
        self.ln_t_max
    }

    fn lin_end(&self) -> f64 {
        self.lin.last().expect("non-empty").x
    }

    fn check(&self, t: f64) -> Result<(), JacobiError> {
        if t > 0.0 && t.ln() <= self.ln_t_max + 1e-15 * self.ln_t_max.abs().max(1.0) {
            Ok(())
        } else {
            Err(JacobiError::OutOfRange { t, t_max: self.t_max() })
        }
    }

    /// `log f(t)`.
    pub fn log_f(&self, t: f64) -> Result<f64, JacobiError> {
        self.check(t)?;
        if t < SERIES_T0 {
            return Ok(t.ln() + self.k0sq * t * t / 6.0 + self.dk0sq * t.powi(3) / 12.0);
        }
        if t <= self.lin_end() || self.logseg.is_empty() {
            return Ok(dense_integral(&self.lin, &self.lin_d, t.min(self.lin_end())));
        }
        self.log_f_ln(t.ln())
    }

    /// `u(t) = f'(t)/f(t)`.
    pub fn u(&self, t: f64) -> Result<f64, JacobiError> {
        self.check(t)?;
        if t < SERIES_T0 {
            return Ok(1.0 / t + self.k0sq * t / 3.0 + self.dk0sq * t * t / 4.0);
        }
        if t <= self.lin_end() || self.logseg.is_empty() {
            return Ok(dense_y(&self.lin, &self.lin_d, t.min(self.lin_end())));
        }
        Ok(self.ln_u_ln(t.ln())?.exp())
    }

    /// `log f(e^s)`.
    pub fn log_f_ln(&self, s: f64) -> Result<f64, JacobiError> {
        if s <= self.lin_end().ln() || self.logseg.is_empty() {
            return self.log_f(s.exp());
        }
        if s > self.ln_t_max * (1.0 + 1e-15) {
            return Err(JacobiError::OutOfRange { t: s.exp(), t_max: self.t_max() });
        }
        Ok(dense_integral(&self.logseg, &self.log_d, s.min(self.ln_t_max)))
    }

    /// `ln u(e^s)`.
    pub fn ln_u_ln(&self, s: f64) -> Result<f64, JacobiError> {
        if s <= self.lin_end().ln() || self.logseg.is_empty() {
            return Ok(self.u(s.exp())?.ln());
        }
        if s > self.ln_t_max * (1.0 + 1e-15) {
            return Err(JacobiError::OutOfRange { t: s.exp(), t_max: self.t_max() });
        }
        Ok(dense_y(&self.logseg, &self.log_d, s.min(self.ln_t_max)).ln() - s)
    }

    /// `f(t)`; overflows to infinity outside the double range, use `log_f` there.
    pub fn f(&self, t: f64) -> Result<f64, JacobiError> {
        Ok(self.log_f(t)?.exp())
    }

    /// `f'(t) = u f`; same representable range caveat as [`Self::f`].
    pub fn f_prime(&self, t: f64) -> Result<f64, JacobiError> {
        Ok((self.log_f(t)? + self.u(t)?.ln()).exp())
    }

    /// `f(s)/f(t)` computed from log values.
    pub fn ratio(&self, s: f64, t: f64) -> Result<f64, JacobiError> {
        Ok((self.log_f(s)? - self.log_f(t)?).exp())
    }

    /// Solver nodes, starting at `t = 0` with `log f = -inf`, `u = +inf`.
    pub fn t_grid(&self) -> Vec<f64> {
        let mut g = vec![0.0];
        g.extend(self.lin.iter().map(|n| n.x));
        g.extend(self.logseg.iter().skip(1).map(|n| n.x.exp()));
        g
    }

    pub fn log_f_values(&self) -> Vec<f64> {
        let mut g = vec![f64::NEG_INFINITY];
        g.extend(self.lin.iter().map(|n| n.integral));
        g.extend(self.logseg.iter().skip(1).map(|n| n.integral));
        g
    }

    pub fn u_values(&self) -> Vec<f64> {
        let mut g = vec![f64::INFINITY];
        g.extend(self.lin.iter().map(|n| n.y));
        g.extend(self.logseg.iter().skip(1).map(|n| n.y / n.x.exp()));
        g
    }

    pub fn node_count(&self) -> usize {
        self.lin.len() + self.logseg.len().saturating_sub(1)
    }

    /// CSV with columns `t,log_f,u` over the solver nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,log_f,u")?;
        for ((t, lf), u) in self.t_grid().into_iter().zip(self.log_f_values()).zip(self.u_values()) {
            writeln!(w, "{t:e},{lf:e},{u:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacestReport {
    pub pass: bool,
    /// Least grid radius beyond which both bounds hold through the end of the range.
    pub r1: Option<f64>,
    pub r1_growth: Option<f64>,
    pub r1_log_derivative: Option<f64>,
    /// Least grid radius for the companion bound `f'(t) >= (log t)^{1+eps1} + (1+eps1)(log t)^{eps1}`.
    pub r1_derivative_bound: Option<f64>,
    /// Minimum over grid points `>= r1` of the two log-slacks.
    pub min_log_slack: Option<f64>,
    pub grid_points: usize,
}

fn first_tail_start(ok: &[bool], grid: &[f64]) -> Option<f64> {
    // least index i with ok[j] for all j >= i
    let mut idx = None;
    for i in (0..ok.len()).rev() {
        if ok[i] {
            idx = Some(i);
        } else {
            break;
        }
    }
    idx.map(|i| grid[i])
}

/// Check `f(t) >= t (log t)^{1+eps1}` and `u(t) >= 1/t + (1+eps1)/(t log t)` on a
/// geometric grid over `t_range` (clipped to the solved range).
pub fn jacest_check(sol: &JacobiSolution, eps: f64, eps1: f64, t_range: (f64, f64)) -> Result<JacestReport, JacobiError> {
    if !(eps1 > 0.0 && eps1 < eps) {
        return Err(JacobiError::InvalidArgument(format!("need 0 < eps1 < eps, got eps1={eps1}, eps={eps}")));
    }
    let e = std::f64::consts::E;
    if !(t_range.0 > e) {
        return Err(JacobiError::InvalidArgument(format!("t_range must start above e, got {}", t_range.0)));
    }
    let hi = t_range.1.min(sol.t_max());
    if hi < t_range.0 {
        return Err(JacobiError::OutOfRange { t: t_range.0, t_max: sol.t_max() });
    }
    let grid = crate::models::geometric_grid(t_range.0, hi, DEFAULT_PER_DECADE);
    let mut ok_f = Vec::with_capacity(grid.len());
    let mut ok_u = Vec::with_capacity(grid.len());
    let mut ok_d = Vec::with_capacity(grid.len());
    let mut slack = Vec::with_capacity(grid.len());
    for &t in &grid {
        let lt = t.ln();
        let llt = lt.ln();
        let log_f = sol.log_f(t)?;
        let u = sol.u(t)?;
        let s_f = log_f - (lt + (1.0 + eps1) * llt);
        // t u >= 1 + (1+eps1)/log t, as a log ratio
        let s_u = (t * u).ln() - (1.0 + (1.0 + eps1) / lt).ln();
        let ln_fp = log_f + u.ln();
        let bound = (1.0 + eps1) * llt + (1.0 + (1.0 + eps1) / lt).ln();
        ok_f.push(s_f >= 0.0);
        ok_u.push(s_u >= 0.0);
        ok_d.push(ln_fp >= bound);
        slack.push(s_f.min(s_u));
    }
    let both: Vec<bool> = ok_f.iter().zip(&ok_u).map(|(a, b)| *a && *b).collect();
    let r1 = first_tail_start(&both, &grid);
    let min_log_slack = r1.map(|r| {
        grid.iter().zip(&slack).filter(|(t, _)| **t >= r).map(|(_, s)| *s).fold(f64::INFINITY, f64::min)
    });
    Ok(JacestReport {
        pass: r1.is_some(),
        r1,
        r1_growth: first_tail_start(&ok_f, &grid),
        r1_log_derivative: first_tail_start(&ok_u, &grid),
        r1_derivative_bound: first_tail_start(&ok_d, &grid),
        min_log_slack,
        grid_points: grid.len(),
    })
}

/// Declared bound for the integrand `(b^2 - a^2)/b` beyond the quadrature range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailMajorant {
    /// The integrand vanishes identically beyond `t_max`.
    Vanishing,
    /// `integrand(t) <= c e^{-rate t}`.
    Exponential { c: f64, rate: f64 },
    /// `integrand(t) <= c t^{-power}`, `power > 1`.
    Power { c: f64, power: f64 },
}

impl TailMajorant {
    fn tail(&self, t_max: f64) -> Result<f64, JacobiError> {
        match *self {
            TailMajorant::Vanishing => Ok(0.0),
            TailMajorant::Exponential { c, rate } if c >= 0.0 && rate > 0.0 => Ok(c * (-rate * t_max).exp() / rate),
            TailMajorant::Power { c, power } if c >= 0.0 && power > 1.0 && t_max > 0.0 => {
                Ok(c * t_max.powf(1.0 - power) / (power - 1.0))
            }
            _ => Err(JacobiError::InvalidArgument(format!("invalid tail majorant {self:?}"))),
        }
    }
}

/// `I = ∫_0^∞ (b^2 - a^2)/b` and the resulting growth-ratio constant `c = exp((π/2) I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBound {
    pub integral_i: f64,
    pub c_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplemmaReport {
    #[serde(rename = "I")]
    pub integral_i: f64,
    pub c_bound: f64,
    /// Largest `log f_b - log f_a - (π/2) I` over the grid, floored at zero.
    pub max_violation: f64,
    /// Largest `log f_b - log f_a` seen.
    pub max_log_ratio: f64,
    pub quadrature_error: f64,
    pub tail_bound: f64,
    pub pass: bool,
}

/// Verify `log f_b - log f_a <= (π/2) I` on `[0, t_max]` for increasing `a <= b`.
pub fn implemma_check(
    profile: &CurvatureProfile,
    t_max: f64,
    tail: Option<TailMajorant>,
    rtol: f64,
) -> Result<(ComparisonBound, ImplemmaReport), JacobiError> {
    let (a, b) = (&profile.a, &profile.b);
    for (name, g) in [("a", a), ("b", b)] {
        if g.monotonicity() != Monotonicity::Increasing {
            return Err(JacobiError::Hypothesis(format!("{name} must be declared increasing")));
        }
    }
    let grid: Vec<f64> = (0..=2000).map(|i| t_max * i as f64 / 2000.0).collect();
    for (name, g) in [("a", a), ("b", b)] {
        if let Some(t) = g.check_monotonicity(&grid)? {
            return Err(JacobiError::Hypothesis(format!("{name} decreases near t = {t}")));
        }
    }
    for &t in &grid {
        let (av, bv) = (a.eval(t)?, b.eval(t)?);
        if bv < av * (1.0 - 1e-12) {
            return Err(JacobiError::Hypothesis(format!("b < a at t = {t}")));
        }
    }
    let tail = tail.ok_or(JacobiError::MissingTail(t_max))?;
    let tail_bound = tail.tail(t_max)?;

    let mut bps: Vec<f64> = (0..=(t_max.ceil() as usize)).map(|i| (i as f64).min(t_max)).collect();
    bps.extend(a.breakpoints().into_iter().chain(b.breakpoints()).filter(|&x| x > 0.0 && x < t_max));
    bps.push(t_max);
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let integrand = |t: f64| -> f64 {
        let (av, bv) = (a.eval(t).unwrap_or(f64::NAN), b.eval(t).unwrap_or(f64::NAN));
        if bv == 0.0 {
            0.0
        } else {
            (bv - av) * (bv + av) / bv
        }
    };
    let q = quad::integrate_pieces(integrand, &bps, 1e-13, 1e-12)?;
    let integral_i = q.value + tail_bound;
    let bound = FRAC_PI_2 * integral_i;

    let sa = solve_jacobi(a, t_max, rtol)?;
    let sb = solve_jacobi(b, t_max, rtol)?;
    let mut max_log_ratio = f64::NEG_INFINITY;
    for &t in grid.iter().skip(1) {
        max_log_ratio = max_log_ratio.max(sb.log_f(t)? - sa.log_f(t)?);
    }
    let max_violation = (max_log_ratio - bound).max(0.0);
    let cb = ComparisonBound { integral_i, c_bound: bound.exp() };
    let report = ImplemmaReport {
        integral_i,
        c_bound: cb.c_bound,
        max_violation,
        max_log_ratio,
        quadrature_error: q.error,
        tail_bound,
        pass: max_log_ratio <= bound + 1e-6,
    };
    Ok((cb, report))
}

/// `ln( f(t) cosh(k(t)(s - t)) )`, the comparison lower bound for `ln f(s)` when `k` increases.
pub fn ln_lower_cosh_bound(sol: &JacobiSolution, t: f64, s: f64) -> Result<f64, JacobiError> {
    if !(s >= t && t > 0.0) {
        return Err(JacobiError::InvalidArgument(format!("need s >= t > 0, got t={t}, s={s}")));
    }
    let k = sol.k().eval(t)?;
    Ok(sol.log_f(t)? + crate::models::ln_cosh(k * (s - t)))
}

/// `f(t) cosh(k(t)(s - t))`.
pub fn lower_cosh_bound(sol: &JacobiSolution, t: f64, s: f64) -> Result<f64, JacobiError> {
    Ok(ln_lower_cosh_bound(sol, t, s)?.exp())
}
