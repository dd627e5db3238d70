//! Rotationally symmetric models `dr^2 + f(r)^2 dσ^2`: geodesic distance, angular
//! gradients, ball and cone volumes, and the mass-ratio checks for cones over
//! sets of directions at the pole.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::{solve_jacobi, JacobiError, JacobiSolution};
use crate::models::{ln_sinh, x_coth_x, RadialFunction};
use crate::quad::{self, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotSymError {
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("r = {r} is outside the model range [0, {r_max}]")]
    Domain { r: f64, r_max: f64 },
    #[error("the angular coordinate is singular at the pole")]
    Pole,
    #[error("geodesic solve did not converge: {reason} (residual {residual:e})")]
    Numeric { reason: String, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

#[derive(Debug, Clone)]
enum Warp {
    /// `f = sinh(kappa r)/kappa`, and `f = r` for `kappa = 0`.
    Constant(f64),
    Solution(Arc<JacobiSolution>),
}

/// Model with pole `o` and warping function `f`, `f(0) = 0`, `f'(0) = 1`.
#[derive(Debug, Clone)]
pub struct RotSymSurface {
    warp: Warp,
    dim: usize,
}

fn check_dim(dim: usize) -> Result<(), RotSymError> {
    if dim < 2 {
        return Err(RotSymError::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
    }
    Ok(())
}

impl RotSymSurface {
    /// Constant curvature `-kappa^2`.
    pub fn constant_curvature(kappa: f64, dim: usize) -> Result<Self, RotSymError> {
        check_dim(dim)?;
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(RotSymError::InvalidArgument(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Self { warp: Warp::Constant(kappa), dim })
    }

    pub fn hyperbolic(dim: usize) -> Result<Self, RotSymError> {
        Self::constant_curvature(1.0, dim)
    }

    pub fn flat(dim: usize) -> Result<Self, RotSymError> {
        Self::constant_curvature(0.0, dim)
    }

    /// Warping function `f_k` of a solved Jacobi equation.
    pub fn from_solution(sol: JacobiSolution, dim: usize) -> Result<Self, RotSymError> {
        check_dim(dim)?;
        Ok(Self { warp: Warp::Solution(Arc::new(sol)), dim })
    }

    /// Solve `f'' = k^2 f` on `[0, r_max]` and use it as the warping function.
    pub fn from_curvature(k: &RadialFunction, r_max: f64, rtol: f64, dim: usize) -> Result<Self, RotSymError> {
        Self::from_solution(solve_jacobi(k, r_max, rtol)?, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        match &self.warp {
            Warp::Constant(_) => f64::INFINITY,
            Warp::Solution(s) => s.t_max(),
        }
    }

    /// `kappa` when the model has constant curvature `-kappa^2`.
    pub fn constant_kappa(&self) -> Option<f64> {
        match self.warp {
            Warp::Constant(k) => Some(k),
            Warp::Solution(_) => None,
        }
    }

    fn check_r(&self, r: f64) -> Result<(), RotSymError> {
        if r >= 0.0 && r <= self.r_max() * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(RotSymError::Domain { r, r_max: self.r_max() })
        }
    }

    fn clamp(&self, r: f64) -> f64 {
        r.min(self.r_max())
    }

    pub fn log_f(&self, r: f64) -> Result<f64, RotSymError> {
        self.check_r(r)?;
        Ok(match &self.warp {
            Warp::Constant(k) if *k == 0.0 => r.ln(),
            Warp::Constant(k) => ln_sinh(k * r) - k.ln(),
            Warp::Solution(s) => {
                if r == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    s.log_f(self.clamp(r))?
                }
            }
        })
    }

    pub fn f(&self, r: f64) -> Result<f64, RotSymError> {
        Ok(self.log_f(r)?.exp())
    }

    /// `log f(r + dr) - log f(r)` for `dr >= 0`, without the cancellation of the
    /// plain difference when `dr` is small.
    pub fn log_f_increment(&self, r: f64, dr: f64) -> Result<f64, RotSymError> {
        self.check_r(r + dr)?;
        match &self.warp {
            Warp::Constant(k) if *k == 0.0 => Ok((dr / r).ln_1p()),
            Warp::Constant(k) if k * dr < 20.0 => {
                // sinh(k(r+dr))/sinh(kr) = cosh(k dr) + coth(kr) sinh(k dr)
                let h = (0.5 * k * dr).sinh();
                Ok((2.0 * h * h + (k * dr).sinh() / (k * r).tanh()).ln_1p())
            }
            Warp::Solution(_) if dr <= 0.01 * r.min(1.0) => {
                let mut s = 0.0;
                for (x, w) in GL5.iter() {
                    s += w * self.u(r + 0.5 * dr * (1.0 + x))?;
                }
                Ok(0.5 * dr * s)
            }
            _ => Ok(self.log_f(r + dr)? - self.log_f(r)?),
        }
    }

    /// `u = f'/f`.
    pub fn u(&self, r: f64) -> Result<f64, RotSymError> {
        self.check_r(r)?;
        Ok(match &self.warp {
            Warp::Constant(k) => x_coth_x(k * r) / r,
            Warp::Solution(s) => s.u(self.clamp(r))?,
        })
    }

    /// `f''/f`, minus the radial curvature.
    pub fn k_squared(&self, r: f64) -> Result<f64, RotSymError> {
        self.check_r(r)?;
        Ok(match &self.warp {
            Warp::Constant(k) => k * k,
            Warp::Solution(s) => {
                let k = s.k().eval(self.clamp(r)).map_err(JacobiError::from)?;
                k * k
            }
        })
    }

    /// First grid radius where `f` fails to be increasing, `f(t) >= t`, or `f''/f >= 0`.
    pub fn check_invariants(&self, grid: &[f64]) -> Result<Option<(f64, String)>, RotSymError> {
        let mut prev = f64::NEG_INFINITY;
        for &r in grid.iter().filter(|&&r| r > 0.0) {
            let lf = self.log_f(r)?;
            if lf < prev {
                return Ok(Some((r, "f decreases".into())));
            }
            prev = lf;
            if lf < r.ln() * (1.0 + 1e-12) - 1e-12 {
                return Ok(Some((r, "f(t) < t".into())));
            }
            if self.k_squared(r)? < 0.0 {
                return Ok(Some((r, "positive radial curvature".into())));
            }
        }
        Ok(None)
    }
}

/// Point in polar coordinates about the pole; `theta` is reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub r: f64,
    pub theta: f64,
}

impl GeoPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self, RotSymError> {
        if !(r >= 0.0 && r.is_finite() && theta.is_finite()) {
            return Err(RotSymError::InvalidArgument(format!("bad point ({r}, {theta})")));
        }
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Ok(Self { r, theta: t })
    }

    pub fn pole() -> Self {
        Self { r: 0.0, theta: 0.0 }
    }
}

/// Angle between polar directions, in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Law of cosines in the stable haversine form; `None` unless the curvature is constant.
pub fn distance_closed_form(surface: &RotSymSurface, p: GeoPoint, q: GeoPoint) -> Option<f64> {
    let k = surface.constant_kappa()?;
    let dth = angle_between(p.theta, q.theta);
    let s2 = (0.5 * dth).sin().powi(2);
    if k == 0.0 {
        let dr = p.r - q.r;
        return Some((dr * dr + 4.0 * p.r * q.r * s2).sqrt());
    }
    let h = (0.5 * k * (p.r - q.r)).sinh();
    let v = h * h + (k * p.r).sinh() * (k * q.r).sinh() * s2;
    Some(2.0 * v.sqrt().asinh() / k)
}

/// Illinois-modified regula falsi on a sign-changing bracket `[a, b]`.
fn bracketed_root<G: Fn(f64) -> f64>(mut a: f64, mut b: f64, g: G) -> Result<f64, RotSymError> {
    let (mut fa, mut fb) = (g(a), g(b));
    if fa.is_nan() || fb.is_nan() || fa * fb > 0.0 {
        return Err(RotSymError::Numeric { reason: "turning radius not bracketed".into(), residual: fb });
    }
    for _ in 0..200 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc.is_nan() {
            return Err(RotSymError::Numeric { reason: "turning radius search hit a failed evaluation".into(), residual: fc });
        }
        // the angle integrals carry ~1e-13 quadrature noise
        if fc.abs() <= 1e-14 || (c - b).abs() <= 1e-14 * c.abs().max(b.abs()) {
            return Ok(c);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    Err(RotSymError::Numeric { reason: "turning radius search did not converge".into(), residual: fb })
}

/// Geodesic pieces for the family through the turning radius `rm`
/// (where `f(rm)` is the Clairaut constant), integrated in `w = sqrt(r - rm)`.
struct Clairaut<'a> {
    s: &'a RotSymSurface,
    rm: f64,
    lfm: f64,
    um: f64,
    k2m: f64,
}

impl<'a> Clairaut<'a> {
    fn new(s: &'a RotSymSurface, rm: f64) -> Result<Self, RotSymError> {
        Ok(Self { s, rm, lfm: s.log_f(rm)?, um: s.u(rm)?, k2m: s.k_squared(rm)? })
    }

    // log f(rm + w^2) - log f(rm), with a Taylor form where the difference cancels
    fn delta(&self, w: f64) -> f64 {
        let w2 = w * w;
        if w2 < 1e-6 * self.rm {
            self.um * w2 + 0.5 * (self.k2m - self.um * self.um) * w2 * w2
        } else {
            self.s.log_f_increment(self.rm, w2).unwrap_or(f64::NAN)
        }
    }

    /// `(dθ/dw, ds/dw)`.
    fn rates(&self, w: f64) -> (f64, f64) {
        if w == 0.0 {
            let c = (2.0 / self.um).sqrt();
            return (c * (-self.lfm).exp(), c);
        }
        let d = self.delta(w);
        let lf = self.lfm + d;
        let dtheta = 2.0 * w * (-lf).exp() / (2.0 * d).exp_m1().sqrt();
        let ds = 2.0 * w / (-(-2.0 * d).exp_m1()).sqrt();
        (dtheta, ds)
    }

    // the angular rate varies on the scale w ~ sqrt(rm); split geometrically from there
    fn breaks(&self, r_a: f64, r_b: f64) -> Vec<f64> {
        let (wa, wb) = ((r_a - self.rm).max(0.0).sqrt(), (r_b - self.rm).max(0.0).sqrt());
        let mut pts = vec![wa];
        let mut w = self.rm.sqrt();
        while w < wb {
            if w > wa * 1.5 {
                pts.push(w);
            }
            w *= 4.0;
        }
        if wb > wa {
            pts.push(wb);
        }
        pts
    }

    fn angle(&self, r_a: f64, r_b: f64) -> Result<f64, RotSymError> {
        let pts = self.breaks(r_a, r_b);
        Ok(quad::integrate_pieces(|w| self.rates(w).0, &pts, 1e-16, 1e-13)?.value)
    }

    fn length(&self, r_a: f64, r_b: f64) -> Result<f64, RotSymError> {
        let pts = self.breaks(r_a, r_b);
        Ok(quad::integrate_pieces(|w| self.rates(w).1, &pts, 1e-16, 1e-13)?.value)
    }
}

/// Geodesic distance from the Clairaut integral `f(r)^2 θ' = c`.
///
/// Geodesics are labelled by their turning radius `rm <= min(r_p, r_q)`. If the
/// angle `θ*` swept between the two radii with `rm = min(r_p, r_q)` exceeds the
/// separation, the geodesic is monotone in `r`; otherwise it passes through a
/// turning point below both. Either way `rm` is found by a bracketed root solve.
pub fn distance(surface: &RotSymSurface, p: GeoPoint, q: GeoPoint) -> Result<f64, RotSymError> {
    surface.check_r(p.r)?;
    surface.check_r(q.r)?;
    let dth = angle_between(p.theta, q.theta);
    let (lo, hi) = if p.r <= q.r { (p.r, q.r) } else { (q.r, p.r) };
    if dth == 0.0 || lo == 0.0 {
        return Ok(hi - lo);
    }
    if dth >= PI * (1.0 - 1e-14) {
        return Ok(lo + hi);
    }
    let at_lo = Clairaut::new(surface, lo)?;
    let theta_star = at_lo.angle(lo, hi)?;
    let x_hi = lo.ln();
    // walk down in ln(rm) until g changes sign relative to the top end
    let solve = |g: &dyn Fn(f64) -> f64| -> Result<f64, RotSymError> {
        let top = g(x_hi);
        let mut x_lo = x_hi;
        loop {
            x_lo -= 5.0;
            let v = g(x_lo);
            if v * top <= 0.0 {
                break;
            }
            if x_lo < x_hi - 600.0 || v.is_nan() {
                return Err(RotSymError::Numeric {
                    reason: "turning radius not bracketed".into(),
                    residual: v,
                });
            }
        }
        bracketed_root(x_lo, x_hi, g)
    };
    let angle_err = std::cell::Cell::new(None::<RotSymError>);
    let record = |r: Result<f64, RotSymError>| -> f64 {
        r.unwrap_or_else(|e| {
            angle_err.set(Some(e));
            f64::NAN
        })
    };
    let len = if dth <= theta_star {
        if (theta_star - dth).abs() <= 1e-15 {
            return at_lo.length(lo, hi);
        }
        let g = |x: f64| {
            record(Clairaut::new(surface, x.exp()).and_then(|c| c.angle(lo, hi))) - dth
        };
        let x = solve(&g)?;
        if let Some(e) = angle_err.take() {
            return Err(e);
        }
        Clairaut::new(surface, x.exp())?.length(lo, hi)?
    } else {
        let g = |x: f64| {
            let c = Clairaut::new(surface, x.exp());
            record(c.and_then(|c| Ok(c.angle(c.rm, lo)? + c.angle(c.rm, hi)?))) - dth
        };
        let x = solve(&g)?;
        if let Some(e) = angle_err.take() {
            return Err(e);
        }
        let c = Clairaut::new(surface, x.exp())?;
        c.length(c.rm, lo)? + c.length(c.rm, hi)?
    };
    if !len.is_finite() {
        return Err(RotSymError::Numeric { reason: "non-finite geodesic length".into(), residual: f64::NAN });
    }
    Ok(len)
}

/// `1/f(r)`: the norm of the gradient of the polar angle, a bound for `|∇∠_o|`
/// under the curvature upper bound `-a^2` when `f = f_a`.
pub fn angular_gradient_bound(surface: &RotSymSurface, p: GeoPoint) -> Result<f64, RotSymError> {
    if p.r == 0.0 {
        return Err(RotSymError::Pole);
    }
    Ok((-surface.log_f(p.r)?).exp())
}

/// Volume of the Euclidean unit ball in `R^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * TAU / k as f64,
    }
}

/// `ln ∫_0^t f^{k-1}`, scaled by the value at `t` so explosive `f` stays finite.
pub fn ln_power_integral(surface: &RotSymSurface, k: usize, t: f64) -> Result<f64, RotSymError> {
    surface.check_r(t)?;
    if k < 1 {
        return Err(RotSymError::InvalidArgument("power index must be >= 1".into()));
    }
    if t == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let p = (k - 1) as f64;
    let m = p * surface.log_f(t)?;
    let mut pts = vec![0.0];
    if let Warp::Solution(s) = &surface.warp {
        pts.extend(s.k().breakpoints().into_iter().filter(|&b| b > 0.0 && b < t));
    }
    pts.push(t);
    let g = |s: f64| if s == 0.0 && p > 0.0 { 0.0 } else { (p * surface.log_f(s).unwrap_or(f64::NAN) - m).exp() };
    let v = quad::integrate_pieces(g, &pts, 0.0, 1e-13)?.value;
    Ok(m + v.ln())
}

fn check_k(surface: &RotSymSurface, k: usize) -> Result<(), RotSymError> {
    if k < 2 || k > surface.dim {
        return Err(RotSymError::InvalidArgument(format!("need 2 <= k <= {}, got {k}", surface.dim)));
    }
    Ok(())
}

/// `ln` of the `k`-volume `k α_k ∫_0^t f^{k-1}` of a totally geodesic `k`-ball about the pole.
pub fn ln_ball_volume(surface: &RotSymSurface, k: usize, t: f64) -> Result<f64, RotSymError> {
    check_k(surface, k)?;
    Ok((k as f64 * unit_ball_volume(k)).ln() + ln_power_integral(surface, k, t)?)
}

pub fn ball_volume(surface: &RotSymSurface, k: usize, t: f64) -> Result<f64, RotSymError> {
    Ok(ln_ball_volume(surface, k, t)?.exp())
}

/// `k`-volume of the cone from the pole over a set of directions of `(k-1)`-measure `gamma_measure`, cut at radius `t`.
pub fn cone_mass(surface: &RotSymSurface, gamma_measure: f64, k: usize, t: f64) -> Result<f64, RotSymError> {
    if !(gamma_measure > 0.0) {
        return Err(RotSymError::InvalidArgument(format!("gamma measure must be positive, got {gamma_measure}")));
    }
    check_k(surface, k)?;
    Ok((gamma_measure.ln() + ln_power_integral(surface, k, t)?).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassRatioSeries {
    pub t_grid: Vec<f64>,
    pub mass: Vec<f64>,
    pub ball_vol: Vec<f64>,
    pub ratio: Vec<f64>,
}

impl MassRatioSeries {
    pub fn new(t_grid: Vec<f64>, mass: Vec<f64>, ball_vol: Vec<f64>) -> Result<Self, RotSymError> {
        if t_grid.len() != mass.len() || t_grid.len() != ball_vol.len() {
            return Err(RotSymError::InvalidArgument(format!(
                "series lengths differ: t {}, mass {}, ball {}",
                t_grid.len(),
                mass.len(),
                ball_vol.len()
            )));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RotSymError::InvalidArgument("t grid must be strictly increasing".into()));
        }
        let ratio = mass.iter().zip(&ball_vol).map(|(m, b)| m / b).collect();
        Ok(Self { t_grid, mass, ball_vol, ratio })
    }

    /// Cone from the pole over directions of measure `gamma_measure`.
    pub fn radial_cone(surface: &RotSymSurface, gamma_measure: f64, k: usize, t_grid: &[f64]) -> Result<Self, RotSymError> {
        let mut mass = Vec::with_capacity(t_grid.len());
        let mut ball = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            mass.push(cone_mass(surface, gamma_measure, k, t)?);
            ball.push(ball_volume(surface, k, t)?);
        }
        Self::new(t_grid.to_vec(), mass, ball)
    }

    /// Totally geodesic `k`-plane through the pole: `m = β_k`.
    pub fn totally_geodesic(surface: &RotSymSurface, k: usize, t_grid: &[f64]) -> Result<Self, RotSymError> {
        let ball = t_grid.iter().map(|&t| ball_volume(surface, k, t)).collect::<Result<Vec<_>, _>>()?;
        Self::new(t_grid.to_vec(), ball.clone(), ball)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `max_i (ratio_i - ratio_{i+1})^+`.
    pub max_violation: f64,
    pub worst_t: Option<f64>,
    pub pass: bool,
}

pub const MONOTONICITY_TOL: f64 = 1e-8;

pub fn monotonicity_check(series: &MassRatioSeries) -> MonotonicityReport {
    let mut worst = 0.0;
    let mut worst_t = None;
    for i in 1..series.ratio.len() {
        let v = series.ratio[i - 1] - series.ratio[i];
        if v > worst || v.is_nan() {
            worst = if v.is_nan() { f64::INFINITY } else { v };
            worst_t = Some(series.t_grid[i]);
        }
    }
    MonotonicityReport { max_violation: worst, worst_t, pass: worst <= MONOTONICITY_TOL }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeInequalityReport {
    pub t: f64,
    pub mass: f64,
    pub mass_derivative: f64,
    /// `(β_k(t)/β_k'(t)) m'(t)`.
    pub bound: f64,
    /// `(bound - m)/m`.
    pub relative_gap: f64,
    pub holds: bool,
    pub equality: bool,
}

pub const CONE_TOL: f64 = 1e-6;

/// Check `m(t) <= (β_k(t)/β_k'(t)) m'(t)`. `slice_mass` is `m'(t)` when known;
/// otherwise it is taken from a five-point difference of `total_mass`.
pub fn cone_inequality_check<F: Fn(f64) -> f64>(
    surface: &RotSymSurface,
    k: usize,
    t: f64,
    slice_mass: Option<f64>,
    total_mass: F,
) -> Result<ConeInequalityReport, RotSymError> {
    check_k(surface, k)?;
    if !(t > 0.0) {
        return Err(RotSymError::Degenerate("β_k'(0) = 0".into()));
    }
    let ln_fk = (k - 1) as f64 * surface.log_f(t)?;
    if ln_fk == f64::NEG_INFINITY {
        return Err(RotSymError::Degenerate(format!("β_k'({t}) = 0")));
    }
    let factor = (ln_power_integral(surface, k, t)? - ln_fk).exp();
    let m = total_mass(t);
    let dm = match slice_mass {
        Some(s) => s,
        None => {
            let h = (1e-3 * t.max(1.0)).min(0.25 * t);
            (total_mass(t - 2.0 * h) - 8.0 * total_mass(t - h) + 8.0 * total_mass(t + h) - total_mass(t + 2.0 * h))
                / (12.0 * h)
        }
    };
    let bound = factor * dm;
    let gap = (bound - m) / m.abs().max(f64::MIN_POSITIVE);
    Ok(ConeInequalityReport {
        t,
        mass: m,
        mass_derivative: dm,
        bound,
        relative_gap: gap,
        holds: gap >= -CONE_TOL,
        equality: gap.abs() <= CONE_TOL,
    })
}

/// Area of `S ∩ B(o, t)` for the sector `S` with apex `(apex_r, 0)`, axis pointing
/// at the pole (or away from it) and half-opening `half_angle`, by midpoint
/// quadrature on an `n x n` polar mesh. Constant-curvature models only.
pub fn offpole_sector_mass(
    surface: &RotSymSurface,
    apex_r: f64,
    half_angle: f64,
    toward_pole: bool,
    t: f64,
    n: usize,
) -> Result<f64, RotSymError> {
    let k = surface
        .constant_kappa()
        .ok_or_else(|| RotSymError::InvalidArgument("mesh sectors need a constant-curvature model".into()))?;
    if !(apex_r > 0.0 && half_angle > 0.0 && half_angle < PI && t > 0.0 && n > 0) {
        return Err(RotSymError::InvalidArgument("bad sector parameters".into()));
    }
    let apex = GeoPoint { r: apex_r, theta: 0.0 };
    let (dr, dth) = (t / n as f64, TAU / n as f64);
    let mut area = 0.0;
    for i in 0..n {
        let r = (i as f64 + 0.5) * dr;
        let fr = surface.f(r)?;
        for j in 0..n {
            let y = GeoPoint { r, theta: (j as f64 + 0.5) * dth };
            let e = distance_closed_form(surface, apex, y).expect("constant curvature");
            if e == 0.0 {
                continue;
            }
            // angle at the apex between the directions to o and to y
            let cos_a = if k == 0.0 {
                (apex_r * apex_r + e * e - r * r) / (2.0 * apex_r * e)
            } else {
                let (d, e, r) = (k * apex_r, k * e, k * r);
                (d.cosh() * e.cosh() - r.cosh()) / (d.sinh() * e.sinh())
            };
            let a = cos_a.clamp(-1.0, 1.0).acos();
            let inside = if toward_pole { a <= half_angle } else { a >= PI - half_angle };
            if inside {
                area += fr * dr * dth;
            }
        }
    }
    Ok(area)
}
