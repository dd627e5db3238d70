//! Mollified angular extension `h = P(h̃)` on 2-dimensional rotationally
//! symmetric models, and finite-difference checks of its decay.
//!
//! `R(φ)(x) = ∫ χ(b(ρ(y)) d(x, y)) φ(y) dm(y)` and `P(φ) = R(φ)/R(1)`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ConeSpec, ModelError, Monotonicity, RadialFunction};
use crate::quad::CompositeRule;
use crate::rotsym::{angle_between, distance, distance_closed_form, GeoPoint, RotSymError, RotSymSurface};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AngularError {
    #[error(transparent)]
    Geometry(#[from] RotSymError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("support ball around rho = {rho} leaves the model range (radius {radius})")]
    Domain { rho: f64, radius: f64 },
    #[error("quadrature did not reach {tol:e}: last relative change {achieved:e}")]
    Resolution { tol: f64, achieved: f64 },
    #[error("finite differences are dominated by quadrature noise at {point:?}: {detail}")]
    Noise { point: GeoPoint, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn sigma(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth cut-off: 1 on `[-1, 1]`, 0 outside `(-2, 2)`.
pub fn chi(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        return 1.0;
    }
    if a >= 2.0 {
        return 0.0;
    }
    let p = sigma(2.0 - a);
    p / (p + sigma(a - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub min: f64,
    pub max: f64,
    pub max_d1: f64,
    pub max_d2: f64,
    pub plateau_ok: bool,
    pub support_ok: bool,
}

/// Sample `chi` on `[-3, 3]` and bound its first two derivatives by differences.
pub fn check_kernel(n: usize) -> KernelCheck {
    let h = 6.0 / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| -3.0 + i as f64 * h).collect();
    let v: Vec<f64> = xs.iter().map(|&x| chi(x)).collect();
    let mut out = KernelCheck {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        max_d1: 0.0,
        max_d2: 0.0,
        plateau_ok: true,
        support_ok: true,
    };
    for i in 0..=n {
        out.min = out.min.min(v[i]);
        out.max = out.max.max(v[i]);
        if xs[i].abs() <= 1.0 && v[i] != 1.0 {
            out.plateau_ok = false;
        }
        if xs[i].abs() >= 2.0 && v[i] != 0.0 {
            out.support_ok = false;
        }
        if i > 0 && i < n {
            out.max_d1 = out.max_d1.max(((v[i + 1] - v[i - 1]) / (2.0 * h)).abs());
            out.max_d2 = out.max_d2.max(((v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h)).abs());
        }
    }
    out
}

/// `min(1, max(2 - 2ρ, L·∠(v0, θ)))`.
pub fn tilde_h(cone: &ConeSpec, p: GeoPoint) -> f64 {
    let ang = angle_between(p.theta, cone.v0);
    (2.0 - 2.0 * p.r).max(cone.l * ang).min(1.0)
}

/// Whether `p` lies in the cone `kΩ`, i.e. `∠(v0, θ) < k/L`.
pub fn in_cone(cone: &ConeSpec, k: f64, p: GeoPoint) -> bool {
    angle_between(p.theta, cone.v0) < k / cone.l
}

const ORDER: usize = 8;
const BASE_R: usize = 2;
const BASE_T: usize = 4;
pub const MAX_LEVEL: u32 = 6;

#[derive(Debug, Clone)]
pub struct Mollifier {
    pub surface: RotSymSurface,
    pub b: RadialFunction,
    pub cone: ConeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollified {
    pub value: f64,
    pub r_phi: f64,
    pub r_one: f64,
    pub level: u32,
    pub rel_change: f64,
}

impl Mollifier {
    pub fn new(surface: RotSymSurface, b: RadialFunction, cone: ConeSpec) -> Result<Self, AngularError> {
        if surface.dim() != 2 {
            return Err(AngularError::InvalidArgument(format!(
                "the mollifier is implemented on 2-dimensional models, got dim {}",
                surface.dim()
            )));
        }
        if !(b.eval(0.0)? > 0.0) {
            return Err(AngularError::InvalidArgument("b(0) must be positive".into()));
        }
        Ok(Self { surface, b, cone })
    }

    fn b_min(&self, lo: f64, hi: f64) -> Result<f64, AngularError> {
        Ok(match self.b.monotonicity() {
            Monotonicity::Increasing => self.b.eval(lo)?,
            Monotonicity::Decreasing => self.b.eval(hi)?,
            _ => {
                let mut m = f64::INFINITY;
                for i in 0..=64 {
                    m = m.min(self.b.eval(lo + (hi - lo) * i as f64 / 64.0)?);
                }
                m
            }
        })
    }

    /// Radius `R` with `b(ρ(y)) d(x, y) >= 2` whenever `d(x, y) >= R`, for `ρ(x) = rho`.
    pub fn support_radius(&self, rho: f64) -> Result<f64, AngularError> {
        let mut r = 2.0 / self.b.eval(rho)?;
        for _ in 0..100 {
            let hi = rho + r;
            if hi > self.surface.r_max() {
                return Err(AngularError::Domain { rho, radius: r });
            }
            let next = 2.0 / self.b_min((rho - r).max(0.0), hi)?;
            if next <= r * (1.0 + 1e-12) {
                return Ok(r);
            }
            r = next;
        }
        Err(AngularError::Domain { rho, radius: r })
    }

    fn dist(&self, p: GeoPoint, q: GeoPoint) -> Result<f64, AngularError> {
        match distance_closed_form(&self.surface, p, q) {
            Some(d) => Ok(d),
            None => Ok(distance(&self.surface, p, q)?),
        }
    }

    /// Half-width in angle of `{θ : d(p, (r, θ)) <= reach}`, or `None` if empty.
    fn angular_reach(&self, p: GeoPoint, r: f64, reach: f64) -> Result<Option<f64>, AngularError> {
        if (p.r - r).abs() >= reach {
            return Ok(None);
        }
        if p.r + r <= reach {
            return Ok(Some(PI));
        }
        let s2 = match self.surface.constant_kappa() {
            Some(0.0) => Some((reach * reach - (p.r - r).powi(2)) / (4.0 * p.r * r)),
            Some(k) => Some(
                ((0.5 * k * reach).sinh().powi(2) - (0.5 * k * (p.r - r)).sinh().powi(2))
                    / ((k * p.r).sinh() * (k * r).sinh()),
            ),
            None => None,
        };
        if let Some(s2) = s2 {
            return Ok(Some(2.0 * s2.clamp(0.0, 1.0).sqrt().asin()));
        }
        let g = |phi: f64| {
            distance(&self.surface, p, GeoPoint { r, theta: (p.theta + phi).rem_euclid(TAU) }).map(|d| d - reach)
        };
        // distance grows with the angle; bisect on [0, π]
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(Some(hi))
    }

    /// `(R(φ), R(1))` with a fixed composite rule at refinement `level`. For each
    /// radius the angular rule covers exactly the support of the kernel.
    fn integrals_at<F>(&self, p: GeoPoint, level: u32, phi: &F) -> Result<(f64, f64), AngularError>
    where
        F: Fn(GeoPoint) -> f64 + Sync,
    {
        let rad = self.support_radius(p.r)?;
        let r_lo = (p.r - rad).max(0.0);
        let r_hi = p.r + rad;
        let wrap = |x: f64| {
            let d = (x - p.theta).rem_euclid(TAU);
            if d > PI {
                d - TAU
            } else {
                d
            }
        };
        let v0 = self.cone.v0;
        let il = 1.0 / self.cone.l;
        let t_forced: Vec<f64> = [v0, v0 + il, v0 - il, v0 + PI].iter().map(|&x| wrap(x)).collect();
        let scale = 1usize << level;
        let rr = CompositeRule::with_breaks(r_lo, r_hi, BASE_R * scale, &[0.5, 1.0, p.r], ORDER);
        let rows: Vec<(f64, f64)> = rr
            .nodes
            .par_iter()
            .zip(&rr.weights)
            .map(|(&r, &wr)| -> Result<(f64, f64), AngularError> {
                if r <= 0.0 {
                    return Ok((0.0, 0.0));
                }
                let br = self.b.eval(r)?;
                let Some(half) = self.angular_reach(p, r, 2.0 / br)? else {
                    return Ok((0.0, 0.0));
                };
                let fr = self.surface.f(r)?;
                let tr = CompositeRule::with_breaks(-half, half, BASE_T * scale, &t_forced, ORDER);
                let (mut s_phi, mut s_one) = (0.0, 0.0);
                for (&t, &wt) in tr.nodes.iter().zip(&tr.weights) {
                    let y = GeoPoint { r, theta: (p.theta + t).rem_euclid(TAU) };
                    let k = chi(br * self.dist(p, y)?);
                    if k == 0.0 {
                        continue;
                    }
                    let w = wt * k;
                    s_one += w;
                    s_phi += w * phi(y);
                }
                Ok((wr * fr * s_phi, wr * fr * s_one))
            })
            .collect::<Result<_, _>>()?;
        Ok(rows.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1)))
    }

    /// `P(φ)(p)`, refining until `R(φ)` and `R(1)` both change by at most `tol` relatively.
    pub fn mollify_fn<F>(&self, p: GeoPoint, tol: f64, phi: F) -> Result<Mollified, AngularError>
    where
        F: Fn(GeoPoint) -> f64 + Sync,
    {
        if !(tol > 0.0) {
            return Err(AngularError::InvalidArgument("tolerance must be positive".into()));
        }
        let mut prev = self.integrals_at(p, 0, &phi)?;
        let mut change = f64::INFINITY;
        for level in 1..=MAX_LEVEL {
            let cur = self.integrals_at(p, level, &phi)?;
            let c_phi = (cur.0 - prev.0).abs() / cur.1.abs();
            let c_one = (cur.1 - prev.1).abs() / cur.1.abs();
            change = c_phi.max(c_one);
            if change <= tol {
                return Ok(Mollified { value: cur.0 / cur.1, r_phi: cur.0, r_one: cur.1, level, rel_change: change });
            }
            prev = cur;
        }
        Err(AngularError::Resolution { tol, achieved: change })
    }

    /// `h(p) = P(h̃)(p)`.
    pub fn mollify(&self, p: GeoPoint, tol: f64) -> Result<Mollified, AngularError> {
        let cone = self.cone;
        self.mollify_fn(p, tol, move |y| tilde_h(&cone, y))
    }

    fn h_at_level(&self, p: GeoPoint, level: u32) -> Result<f64, AngularError> {
        let cone = self.cone;
        let (a, b) = self.integrals_at(p, level, &move |y: GeoPoint| tilde_h(&cone, y))?;
        Ok(a / b)
    }

    /// Least `ρ` on a `step` grid in `[1, rho_max]` beyond which the support ball of
    /// every point stays outside `B(o, 1)` and moves the polar angle by at most `1/L`.
    /// Past it `h = 1` outside `2Ω`.
    pub fn r1(&self, rho_max: f64, step: f64) -> Result<Option<f64>, AngularError> {
        let mut last_bad = None;
        let mut rho = 1.0;
        while rho <= rho_max {
            let rad = self.support_radius(rho)?;
            let ok = rho - rad >= 1.0 && rad / self.surface.f(rho - rad)? <= 1.0 / self.cone.l;
            if !ok {
                last_bad = Some(rho);
            }
            rho += step;
        }
        Ok(match last_bad {
            None => Some(1.0),
            Some(b) if b + step <= rho_max => Some(b + step),
            Some(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub point: GeoPoint,
    pub h: f64,
    pub grad: f64,
    pub hess: f64,
    /// `|∇h| f_a(λρ)`.
    pub grad_bound_ratio: f64,
    /// `‖D²h‖ f_a(λρ) / b(ρ)`.
    pub hess_bound_ratio: f64,
    /// Same ratios with `f_a(ρ - t0)`, reported when `b` is increasing.
    pub grad_bound_ratio_t0: Option<f64>,
    pub hess_bound_ratio_t0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularField {
    pub cone: ConeSpec,
    pub quadrature_tol: f64,
    pub samples: Vec<FieldSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub r1: f64,
    pub lambda: f64,
    pub t0: f64,
    pub c4_grad: f64,
    pub c4_hess: f64,
    /// Least-squares slope of `log sup c4` against `log ρ` over the final half of the radii.
    pub grad_slope: f64,
    pub hess_slope: f64,
    pub pass: bool,
    pub field: AngularField,
}

pub const SLOPE_TOL: f64 = 0.05;

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

impl Mollifier {
    /// Gradient and Hessian norms of `h` at `p` from central differences in the
    /// warped metric, with the quadrature level frozen across the stencil.
    pub fn derivatives(&self, p: GeoPoint, tol: f64) -> Result<(f64, f64, f64), AngularError> {
        let centre = self.mollify(p, tol)?;
        let level = centre.level;
        let scale = 1.0 / self.b.eval(p.r)?;
        let (g1, h1) = self.stencil(p, level, centre.value, tol.cbrt() * scale, tol.powf(0.25) * scale)?;
        let (g2, h2) = self.stencil(p, level, centre.value, 2.0 * tol.cbrt() * scale, 2.0 * tol.powf(0.25) * scale)?;
        let g_noise = 10.0 * tol / (tol.cbrt() * scale);
        let h_noise = 10.0 * tol / (tol.sqrt() * scale * scale);
        if (g1 - g2).abs() > 0.1 * g1.max(g2) + g_noise {
            return Err(AngularError::Noise { point: p, detail: format!("gradient {g1:e} vs {g2:e} at doubled step") });
        }
        if (h1 - h2).abs() > 0.1 * h1.max(h2) + h_noise {
            return Err(AngularError::Noise { point: p, detail: format!("hessian {h1:e} vs {h2:e} at doubled step") });
        }
        Ok((centre.value, g1, h1))
    }

    fn stencil(&self, p: GeoPoint, level: u32, h0: f64, dg: f64, dh: f64) -> Result<(f64, f64), AngularError> {
        let fr = self.surface.f(p.r)?;
        let u = self.surface.u(p.r)?;
        let at = |dr: f64, dt: f64| self.h_at_level(GeoPoint { r: p.r + dr, theta: (p.theta + dt).rem_euclid(TAU) }, level);
        // gradient
        let (tg, th) = (dg / fr, dh / fr);
        let hr = (at(dg, 0.0)? - at(-dg, 0.0)?) / (2.0 * dg);
        let ht = (at(0.0, tg)? - at(0.0, -tg)?) / (2.0 * tg);
        let grad = (hr * hr + ht * ht / (fr * fr)).sqrt();
        // hessian
        let (rp, rm) = (at(dh, 0.0)?, at(-dh, 0.0)?);
        let (tp, tm) = (at(0.0, th)?, at(0.0, -th)?);
        let hr2 = (rp - rm) / (2.0 * dh);
        let ht2 = (tp - tm) / (2.0 * th);
        let hrr = (rp - 2.0 * h0 + rm) / (dh * dh);
        let htt = (tp - 2.0 * h0 + tm) / (th * th);
        let hrt = (at(dh, th)? - at(dh, -th)? - at(-dh, th)? + at(-dh, -th)?) / (4.0 * dh * th);
        let h11 = hrr;
        let h12 = (hrt - u * ht2) / fr;
        let h22 = htt / (fr * fr) + u * hr2;
        let mean = 0.5 * (h11 + h22);
        let disc = (0.25 * (h11 - h22).powi(2) + h12 * h12).sqrt();
        let hess = (mean.abs() + disc).max((mean - disc).abs());
        Ok((grad, hess))
    }

    /// Sample `h` along rays at angles `v0 + offsets[i]/L` for radii `rhos`, and
    /// fit the decay constants. `fa` is the model whose warping function is `f_a`.
    pub fn decay_check(
        &self,
        fa: &RotSymSurface,
        lambda: f64,
        t0: f64,
        offsets: &[f64],
        rhos: &[f64],
        tol: f64,
    ) -> Result<DecayReport, AngularError> {
        if !(lambda > 0.0 && lambda < 1.0 && t0 > 0.0) {
            return Err(AngularError::InvalidArgument("need 0 < lambda < 1 and t0 > 0".into()));
        }
        if rhos.len() < 2 || offsets.is_empty() {
            return Err(AngularError::InvalidArgument("need at least two radii and one ray".into()));
        }
        if offsets.iter().any(|o| o.abs() >= 3.0) {
            return Err(AngularError::InvalidArgument("rays must lie inside 3Ω".into()));
        }
        let increasing = self.b.monotonicity() == Monotonicity::Increasing;
        let mut samples = Vec::new();
        for &rho in rhos {
            for &o in offsets {
                let p = GeoPoint::new(rho, self.cone.v0 + o / self.cone.l)?;
                let (h, grad, hess) = self.derivatives(p, tol)?;
                let fl = fa.f(lambda * rho)?;
                let b = self.b.eval(rho)?;
                let (g0, h0) = if increasing && rho > t0 {
                    let f0 = fa.f(rho - t0)?;
                    (Some(grad * f0), Some(hess * f0 / b))
                } else {
                    (None, None)
                };
                samples.push(FieldSample {
                    point: p,
                    h,
                    grad,
                    hess,
                    grad_bound_ratio: grad * fl,
                    hess_bound_ratio: hess * fl / b,
                    grad_bound_ratio_t0: g0,
                    hess_bound_ratio_t0: h0,
                });
            }
        }
        let per_rho = |pick: fn(&FieldSample) -> f64| -> Vec<f64> {
            samples
                .chunks(offsets.len())
                .map(|c| c.iter().map(pick).fold(0.0, f64::max))
                .collect()
        };
        let sup_g = per_rho(|s| s.grad_bound_ratio);
        let sup_h = per_rho(|s| s.hess_bound_ratio);
        let start = rhos.len() / 2;
        let start = start.min(rhos.len() - 2);
        let lx: Vec<f64> = rhos[start..].iter().map(|r| r.ln()).collect();
        let slope = |v: &[f64]| {
            if v[start..].iter().all(|&x| x == 0.0) {
                return 0.0;
            }
            let ly: Vec<f64> = v[start..].iter().map(|&x| x.max(f64::MIN_POSITIVE).ln()).collect();
            ls_slope(&lx, &ly)
        };
        let (gs, hs) = (slope(&sup_g), slope(&sup_h));
        Ok(DecayReport {
            r1: rhos[0],
            lambda,
            t0,
            c4_grad: sup_g.iter().cloned().fold(0.0, f64::max),
            c4_hess: sup_h.iter().cloned().fold(0.0, f64::max),
            grad_slope: gs,
            hess_slope: hs,
            pass: gs <= SLOPE_TOL && hs <= SLOPE_TOL,
            field: AngularField { cone: self.cone, quadrature_tol: tol, samples },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub pairs: usize,
    /// Least `c` with `b(ρ(y))/b(ρ(x)) ∈ [1/c, c]` over all sampled pairs.
    pub c_fit: f64,
    pub worst: Option<(GeoPoint, GeoPoint)>,
}

/// Rejection-sample `n` pairs with `b(ρ(y)) d(x, y) <= 2` and `ρ(x) ∈ [rho_lo, rho_hi]`.
pub fn comparability_check(
    surface: &RotSymSurface,
    b: &RadialFunction,
    rho_lo: f64,
    rho_hi: f64,
    n: usize,
    seed: u64,
) -> Result<ComparabilityReport, AngularError> {
    if !(rho_lo >= 0.0 && rho_hi > rho_lo) || n == 0 {
        return Err(AngularError::InvalidArgument("bad sampling window".into()));
    }
    let b0 = b.eval(0.0)?;
    if !(b0 > 0.0) {
        return Err(AngularError::InvalidArgument("b(0) must be positive".into()));
    }
    let m = Mollifier { surface: surface.clone(), b: b.clone(), cone: ConeSpec::new(3.0, 0.0, 1)? };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut c_fit, mut worst, mut got, mut tries) = (1.0f64, None, 0usize, 0usize);
    while got < n {
        tries += 1;
        if tries > 10_000 * n {
            return Err(AngularError::InvalidArgument("rejection sampling stalled".into()));
        }
        let x = GeoPoint::new(rng.gen_range(rho_lo..=rho_hi), rng.gen_range(0.0..TAU))?;
        let rad = m.support_radius(x.r)?;
        let r = rng.gen_range((x.r - rad).max(0.0)..=x.r + rad);
        let half = if x.r - rad <= 0.0 { PI } else { (1.01 * rad / surface.f(x.r - rad)?).min(PI) };
        let y = GeoPoint::new(r, x.theta + rng.gen_range(-half..=half))?;
        let by = b.eval(y.r)?;
        if by * m.dist(x, y)? > 2.0 {
            continue;
        }
        got += 1;
        let q = by / b.eval(x.r)?;
        let c = q.max(1.0 / q);
        if c > c_fit {
            c_fit = c;
            worst = Some((x, y));
        }
    }
    Ok(ComparabilityReport { pairs: n, c_fit, worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyperbolic(l: f64) -> Mollifier {
        Mollifier::new(RotSymSurface::hyperbolic(2).unwrap(), RadialFunction::constant(1.0), ConeSpec::new(l, 0.0, 1).unwrap())
            .unwrap()
    }

    #[test]
    fn kernel_shape() {
        let k = check_kernel(6000);
        assert!(k.plateau_ok && k.support_ok);
        assert_eq!((k.min, k.max), (0.0, 1.0));
        assert!(k.max_d1 < 3.0 && k.max_d2 < 30.0, "{k:?}");
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tilde_h_cases() {
        let c = ConeSpec::new(4.0, 1.0, 1).unwrap();
        assert_eq!(tilde_h(&c, GeoPoint::pole()), 1.0);
        assert_eq!(tilde_h(&c, GeoPoint::new(3.0, 1.0).unwrap()), 0.0);
        assert_eq!(tilde_h(&c, GeoPoint::new(3.0, 1.0 + 2.0 / 4.0).unwrap()), 1.0);
        assert!((tilde_h(&c, GeoPoint::new(3.0, 1.0 - 0.1).unwrap()) - 0.4).abs() < 1e-14);
        assert_eq!(tilde_h(&c, GeoPoint::new(0.75, 1.0).unwrap()), 0.5);
    }

    #[test]
    fn normalization_and_linearity() {
        let m = hyperbolic(3.0);
        let p = GeoPoint::new(2.5, 0.2).unwrap();
        let one = m.mollify_fn(p, 1e-8, |_| 1.0).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
        let h = m.mollify(p, 1e-8).unwrap();
        assert!(h.value > 0.0 && h.value < 1.0);
        let c = m.cone;
        let lin = m.mollify_fn(p, 1e-8, move |y| 0.3 * tilde_h(&c, y) + 2.0).unwrap();
        assert!((lin.value - (0.3 * h.value + 2.0)).abs() < 2e-8);
    }

    #[test]
    fn r1_and_plateau() {
        let m = hyperbolic(3.0);
        let r1 = m.r1(12.0, 0.05).unwrap().unwrap();
        // 2/sinh(r - 2) <= 1/3
        let exact = 2.0 + 6.0f64.asinh();
        assert!(r1 >= exact - 1e-9 && r1 < exact + 0.05 + 1e-9, "{r1}");
        let p = GeoPoint::new(r1 + 0.5, 2.5 / 3.0).unwrap();
        assert_eq!(m.mollify(p, 1e-8).unwrap().value, 1.0);
    }

    #[test]
    fn support_radius_iterates_for_decreasing_b() {
        let b = RadialFunction::from_fn(|t| 1.0 / (1.0 + t), None, Monotonicity::Decreasing);
        let m = Mollifier::new(RotSymSurface::hyperbolic(2).unwrap(), b, ConeSpec::new(3.0, 0.0, 1).unwrap()).unwrap();
        // R = 2 (1 + 4 + R) has no fixed point
        assert!(matches!(m.support_radius(4.0), Err(AngularError::Domain { .. })));
        let bi = RadialFunction::from_fn(|t| 1.0 + t, None, Monotonicity::Increasing);
        let m = Mollifier::new(RotSymSurface::hyperbolic(2).unwrap(), bi, ConeSpec::new(3.0, 0.0, 1).unwrap()).unwrap();
        let r = m.support_radius(4.0).unwrap();
        assert!((r - 2.0 / (1.0 + 4.0 - r)).abs() < 1e-9 * r);
    }
    #[test]
    fn derivatives_match_linear_profile() {
        let m = hyperbolic(3.0);
        // inside Ω, far out, h ≈ L·θ so |∇h| ≈ L/sinh ρ
        let p = GeoPoint::new(6.0, 0.25 / 3.0).unwrap();
        let (h, g, hs) = m.derivatives(p, 1e-8).unwrap();
        assert!((h - 0.25).abs() < 1e-6);
        assert!((g / (3.0 / 6.0f64.sinh()) - 1.0).abs() < 1e-3, "{g}");
        // the Christoffel term u·h_θ/f dominates the Hessian
        assert!((hs / g - 1.0).abs() < 1e-2, "{hs} {g}");
        let q = GeoPoint::new(6.0, 2.5 / 3.0).unwrap();
        let (h, g, hs) = m.derivatives(q, 1e-8).unwrap();
        assert_eq!((h, g, hs), (1.0, 0.0, 0.0));
    }
}
