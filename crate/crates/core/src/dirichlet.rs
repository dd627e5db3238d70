//! Asymptotic Dirichlet problem for the Laplacian on 2-dimensional
//! rotationally symmetric surfaces, by separation of variables.
//!
//! With `u = Σ φ_n(r)(a_n cos nθ + b_n sin nθ)` each radial profile solves
//! `φ'' + u φ' - (n²/f²) φ = 0`, regular at the pole and `φ_n(R) = 1` on the
//! boundary of the exhaustion disk `B(o, R)`. The log-derivative `w = φ'/φ`
//! satisfies the Riccati equation `w' = n²/f² - u w - w²`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::quintic;
use crate::riccati::{self, Coeffs, Node, RiccatiError, RiccatiOptions};
use crate::rotsym::{RotSymError, RotSymSurface};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirichletError {
    #[error(transparent)]
    Geometry(#[from] RotSymError),
    #[error("radial integration failed: {0}")]
    Integration(#[from] RiccatiError),
    #[error("radius {r} is outside the solved range [0, {r_max}]")]
    Range { r: f64, r_max: f64 },
    #[error("invalid boundary data: {0}")]
    Data(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("conjugate gradient stalled after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub n: u32,
    /// Coefficient of `cos nθ`.
    pub a: f64,
    /// Coefficient of `sin nθ`; ignored for `n = 0`.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub fourier: Vec<FourierMode>,
    pub sup_norm: f64,
}

const SUP_SAMPLES: usize = 4096;

impl BoundaryData {
    /// Modes are merged by `n` and sorted; `sup_norm` is sampled on a fine circle grid.
    pub fn new(modes: Vec<FourierMode>) -> Result<Self, DirichletError> {
        if modes.is_empty() {
            return Err(DirichletError::Data("no Fourier modes".into()));
        }
        let mut merged: Vec<FourierMode> = Vec::new();
        for m in modes {
            if !(m.a.is_finite() && m.b.is_finite()) {
                return Err(DirichletError::Data(format!("non-finite coefficient in mode {}", m.n)));
            }
            let b = if m.n == 0 { 0.0 } else { m.b };
            match merged.iter_mut().find(|x| x.n == m.n) {
                Some(x) => {
                    x.a += m.a;
                    x.b += b;
                }
                None => merged.push(FourierMode { n: m.n, a: m.a, b }),
            }
        }
        merged.sort_by_key(|m| m.n);
        let mut d = Self { fourier: merged, sup_norm: 0.0 };
        d.sup_norm = (0..SUP_SAMPLES)
            .map(|i| d.eval(TAU * i as f64 / SUP_SAMPLES as f64).abs())
            .fold(0.0, f64::max);
        Ok(d)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.fourier.iter().map(|m| m.a * (m.n as f64 * theta).cos() + m.b * (m.n as f64 * theta).sin()).sum()
    }

    /// `Σ |a_n| + |b_n|`, an upper bound for the sup norm.
    pub fn coefficient_bound(&self) -> f64 {
        self.fourier.iter().map(|m| m.a.abs() + m.b.abs()).sum()
    }

    pub fn sum(&self, other: &Self) -> Result<Self, DirichletError> {
        Self::new(self.fourier.iter().chain(&other.fourier).copied().collect())
    }
}

const R0: f64 = 1e-3;

/// Regular radial profile of mode `n` on `[0, R]`, normalized to `φ_n(R) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    pub n: u32,
    pub radius: f64,
    /// Nodes with `y = φ'/φ` and `integral = ln φ` up to a constant.
    nodes: Vec<Node>,
    alpha: f64,
    ln_phi_r: f64,
}

impl ModeProfile {
    fn ln_unnormalized(&self, r: f64) -> f64 {
        let n = self.n as f64;
        if r < R0 {
            return n * r.ln() + 0.5 * self.alpha * r * r;
        }
        let i = self.nodes.partition_point(|p| p.x <= r).clamp(1, self.nodes.len() - 1);
        let (a, b) = (self.nodes[i - 1], self.nodes[i]);
        if r == b.x {
            return b.integral;
        }
        quintic(a.x, b.x, [a.integral, a.y, a.dy, b.integral, b.y, b.dy], r)
    }

    /// `ln φ_n(r)`.
    pub fn ln_eval(&self, r: f64) -> Result<f64, DirichletError> {
        if !(r >= 0.0 && r <= self.radius * (1.0 + 1e-14)) {
            return Err(DirichletError::Range { r, r_max: self.radius });
        }
        if self.n == 0 {
            return Ok(0.0);
        }
        if r == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.ln_unnormalized(r.min(self.radius)) - self.ln_phi_r)
    }

    pub fn eval(&self, r: f64) -> Result<f64, DirichletError> {
        Ok(self.ln_eval(r)?.exp())
    }
}

/// Solve the mode-`n` radial equation on `[0, radius]`.
pub fn solve_mode(surface: &RotSymSurface, n: u32, radius: f64, rtol: f64) -> Result<ModeProfile, DirichletError> {
    if !(rtol > 0.0 && rtol <= 1e-2) {
        return Err(DirichletError::InvalidArgument(format!("rtol must lie in (0, 1e-2], got {rtol}")));
    }
    if !(radius > R0) || radius > surface.r_max() * (1.0 + 1e-12) {
        return Err(DirichletError::Range { r: radius, r_max: surface.r_max() });
    }
    if n == 0 {
        return Ok(ModeProfile { n, radius, nodes: Vec::new(), alpha: 0.0, ln_phi_r: 0.0 });
    }
    let nf = n as f64;
    let k0sq = surface.k_squared(0.0)?;
    // w = n/r + alpha r + O(r^2)
    let alpha = -k0sq * nf / 6.0;
    let w0 = nf / R0 + alpha * R0;
    let i0 = nf * R0.ln() + 0.5 * alpha * R0 * R0;
    let two_ln_n = 2.0 * nf.ln();
    let coeffs = |r: f64| -> Result<Coeffs, RotSymError> {
        Ok(Coeffs { a: (two_ln_n - 2.0 * surface.log_f(r)?).exp(), b: -surface.u(r)? })
    };
    let opts = RiccatiOptions { rtol: 0.1 * rtol, atol: 1e-300, h_init: 1e-4 * R0, ..Default::default() };
    let nodes = riccati::integrate(coeffs, R0, w0, i0, radius, &[], &opts)?;
    let ln_phi_r = nodes.last().expect("integrator returns the initial node").integral;
    Ok(ModeProfile { n, radius, nodes, alpha, ln_phi_r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attainment {
    Attained,
    NotAttained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub n: u32,
    /// `sup_{r <= R_{J-1}} |φ^{(J)} - φ^{(J-1)}|` for the last two radii.
    pub last_change: f64,
    pub converged: bool,
    /// End of the window `R_{J-1}` on which the limit profile is examined.
    pub window: f64,
    pub limit_at_window: f64,
    /// Least-squares slope of the limit profile over the final 20% of the window.
    pub final_slope: f64,
    pub attained: Attainment,
}

pub const ATTAIN_THRESHOLD: f64 = 1.0 - 1e-3;
const PROFILE_SAMPLES: usize = 400;

#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub surface: RotSymSurface,
    pub data: BoundaryData,
    pub radii: Vec<f64>,
    pub rtol: f64,
    /// `profiles[j][m]` is mode `data.fourier[m]` on `B(o, radii[j])`.
    pub profiles: Vec<Vec<ModeProfile>>,
    pub modes: Vec<ModeReport>,
}

impl HarmonicSolution {
    /// `u` on the disk `B(o, radii[j])`.
    pub fn eval_on(&self, j: usize, r: f64, theta: f64) -> Result<f64, DirichletError> {
        let mut s = 0.0;
        for (m, p) in self.data.fourier.iter().zip(&self.profiles[j]) {
            let phi = p.eval(r)?;
            s += phi * (m.a * (m.n as f64 * theta).cos() + m.b * (m.n as f64 * theta).sin());
        }
        Ok(s)
    }

    /// `u` on the largest disk.
    pub fn eval(&self, r: f64, theta: f64) -> Result<f64, DirichletError> {
        self.eval_on(self.radii.len() - 1, r, theta)
    }

    /// `sup |u|` over an `nr x nt` polar sample of the largest disk.
    pub fn sample_sup(&self, nr: usize, nt: usize) -> Result<f64, DirichletError> {
        let big = *self.radii.last().expect("non-empty radii");
        let mut s: f64 = 0.0;
        for i in 0..=nr {
            let r = big * i as f64 / nr as f64;
            for k in 0..nt {
                s = s.max(self.eval(r, TAU * k as f64 / nt as f64)?.abs());
            }
        }
        Ok(s)
    }
}

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

/// Solve every mode on every disk of the exhaustion and judge attainment of the
/// boundary values at infinity from the profile on the largest disk.
pub fn exhaust(
    surface: &RotSymSurface,
    data: &BoundaryData,
    radii: &[f64],
    rtol: f64,
) -> Result<HarmonicSolution, DirichletError> {
    if radii.len() < 2 {
        return Err(DirichletError::InvalidArgument("need at least two exhaustion radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DirichletError::InvalidArgument("radii must be strictly increasing".into()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..radii.len()).flat_map(|j| (0..data.fourier.len()).map(move |m| (j, m))).collect();
    let solved: Vec<ModeProfile> = jobs
        .par_iter()
        .map(|&(j, m)| solve_mode(surface, data.fourier[m].n, radii[j], rtol))
        .collect::<Result<_, _>>()?;
    let mut profiles: Vec<Vec<ModeProfile>> = vec![Vec::new(); radii.len()];
    for ((j, _), p) in jobs.iter().zip(solved) {
        profiles[*j].push(p);
    }

    let last = radii.len() - 1;
    let window = radii[last - 1];
    let grid: Vec<f64> = (0..=PROFILE_SAMPLES).map(|i| window * i as f64 / PROFILE_SAMPLES as f64).collect();
    let tail_start = (0.8 * PROFILE_SAMPLES as f64).round() as usize;
    let mut modes = Vec::new();
    for (m, mode) in data.fourier.iter().enumerate() {
        let (cur, prev) = (&profiles[last][m], &profiles[last - 1][m]);
        let mut change: f64 = 0.0;
        let mut limit = Vec::with_capacity(grid.len());
        for &r in &grid {
            let v = cur.eval(r)?;
            change = change.max((v - prev.eval(r)?).abs());
            limit.push(v);
        }
        let lim_w = *limit.last().expect("non-empty grid");
        let slope = ls_slope(&grid[tail_start..], &limit[tail_start..]);
        let attained = if lim_w >= ATTAIN_THRESHOLD && slope >= 0.0 {
            Attainment::Attained
        } else {
            Attainment::NotAttained
        };
        modes.push(ModeReport {
            n: mode.n,
            last_change: change,
            converged: change <= 10.0 * rtol,
            window,
            limit_at_window: lim_w,
            final_slope: slope,
            attained,
        });
    }
    Ok(HarmonicSolution {
        surface: surface.clone(),
        data: data.clone(),
        radii: radii.to_vec(),
        rtol,
        profiles,
        modes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub radius: f64,
    pub nr: usize,
    pub nt: usize,
    /// `u` at the pole.
    pub centre: f64,
    /// `values[i * nt + k]` at `r = (i + 1) h`, `θ = k Δθ`, `i < nr - 1`.
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl FdSolution {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        if i == 0 {
            self.centre
        } else {
            self.values[(i - 1) * self.nt + k]
        }
    }
}

/// Finite-volume discretization of `(f u_r)_r + u_θθ/f = 0` on `B(o, radius)` with
/// `u = data` on the boundary, solved by conjugate gradients. The system is the
/// normal equation of the discrete Dirichlet energy, so it is symmetric positive definite.
pub fn fd_laplace(
    surface: &RotSymSurface,
    data: &BoundaryData,
    radius: f64,
    nr: usize,
    nt: usize,
    tol: f64,
) -> Result<FdSolution, DirichletError> {
    if nr < 4 || nt < 8 {
        return Err(DirichletError::InvalidArgument("grid too coarse".into()));
    }
    if radius > surface.r_max() * (1.0 + 1e-12) {
        return Err(DirichletError::Range { r: radius, r_max: surface.r_max() });
    }
    let h = radius / nr as f64;
    let dt = TAU / nt as f64;
    // radial conductances f_{i+1/2} dθ / h and angular ones h / (f_i dθ)
    let cr: Vec<f64> = (0..nr).map(|i| surface.f((i as f64 + 0.5) * h).map(|f| f * dt / h)).collect::<Result<_, _>>()?;
    let ct: Vec<f64> = (0..nr).map(|i| if i == 0 { Ok(0.0) } else { surface.f(i as f64 * h).map(|f| h / (f * dt)) }).collect::<Result<_, _>>()?;
    let boundary: Vec<f64> = (0..nt).map(|k| data.eval(k as f64 * dt)).collect();
    let n_in = nr - 1;
    let size = 1 + n_in * nt;
    let idx = |i: usize, k: usize| 1 + (i - 1) * nt + k;

    // y = A x for the interior unknowns (boundary taken as zero)
    let apply = |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        let c0 = cr[0];
        for k in 0..nt {
            let d = x[0] - x[idx(1, k)];
            y[0] += c0 * d;
            y[idx(1, k)] -= c0 * d;
        }
        for i in 1..=n_in {
            for k in 0..nt {
                let p = idx(i, k);
                if i < n_in {
                    let d = x[p] - x[idx(i + 1, k)];
                    y[p] += cr[i] * d;
                    y[idx(i + 1, k)] -= cr[i] * d;
                } else {
                    y[p] += cr[i] * x[p];
                }
                let d = x[p] - x[idx(i, (k + 1) % nt)];
                y[p] += ct[i] * d;
                y[idx(i, (k + 1) % nt)] -= ct[i] * d;
            }
        }
    };
    let mut rhs = vec![0.0; size];
    for k in 0..nt {
        rhs[idx(n_in, k)] += cr[n_in] * boundary[k];
    }
    // Jacobi-preconditioned CG
    let mut diag = vec![0.0; size];
    diag[0] = cr[0] * nt as f64;
    for i in 1..=n_in {
        for k in 0..nt {
            diag[idx(i, k)] = cr[i - 1] + cr[i] + 2.0 * ct[i];
        }
    }
    let mut x = vec![0.0; size];
    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; size];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let max_iter = 20 * size;
    let mut it = 0;
    loop {
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_b;
        if res <= tol {
            break;
        }
        if it >= max_iter {
            return Err(DirichletError::NoConvergence { iterations: it, residual: res });
        }
        apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..size {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..size {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..size {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    Ok(FdSolution { radius, nr, nt, centre: x[0], values: x[1..].to_vec(), iterations: it })
}

/// Largest nodal difference between the finite-volume and spectral solutions on disk `j`.
pub fn fd_discrepancy(sol: &HarmonicSolution, j: usize, fd: &FdSolution) -> Result<f64, DirichletError> {
    let h = fd.radius / fd.nr as f64;
    let dt = TAU / fd.nt as f64;
    let mut worst = (sol.eval_on(j, 0.0, 0.0)? - fd.centre).abs();
    for i in 1..fd.nr {
        for k in 0..fd.nt {
            worst = worst.max((sol.eval_on(j, i as f64 * h, k as f64 * dt)? - fd.at(i, k)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos1() -> BoundaryData {
        BoundaryData::new(vec![FourierMode { n: 1, a: 1.0, b: 0.0 }]).unwrap()
    }

    #[test]
    fn hyperbolic_mode_one_closed_form() {
        let h = RotSymSurface::hyperbolic(2).unwrap();
        let p = solve_mode(&h, 1, 6.0, 1e-10).unwrap();
        for r in [0.0005, 0.1, 1.0, 3.0, 5.9, 6.0] {
            let want = (r / 2.0f64).tanh() / 3.0f64.tanh();
            assert!((p.eval(r).unwrap() - want).abs() < 1e-8, "r = {r}");
        }
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn flat_modes_are_powers() {
        let e = RotSymSurface::flat(2).unwrap();
        for n in [1u32, 2, 5] {
            let p = solve_mode(&e, n, 4.0, 1e-12).unwrap();
            for r in [0.01, 0.5, 2.0, 3.9] {
                let want = (r / 4.0f64).powi(n as i32);
                assert!((p.eval(r).unwrap() - want).abs() < 1e-10, "n {n} r {r}");
            }
        }
    }

    #[test]
    fn verdicts() {
        let h = RotSymSurface::hyperbolic(2).unwrap();
        let s = exhaust(&h, &cos1(), &[5.0, 10.0, 20.0], 1e-10).unwrap();
        assert_eq!(s.modes[0].attained, Attainment::Attained);
        let e = RotSymSurface::flat(2).unwrap();
        let s = exhaust(&e, &cos1(), &[5.0, 10.0, 20.0], 1e-10).unwrap();
        assert_eq!(s.modes[0].attained, Attainment::NotAttained);
        assert!(!s.modes[0].converged);
    }

    #[test]
    fn constant_data_is_exact() {
        let h = RotSymSurface::hyperbolic(2).unwrap();
        let d = BoundaryData::new(vec![FourierMode { n: 0, a: 0.7, b: 3.0 }]).unwrap();
        let s = exhaust(&h, &d, &[2.0, 4.0], 1e-8).unwrap();
        assert_eq!(s.eval(1.3, 0.4).unwrap(), 0.7);
        assert_eq!(d.sup_norm, 0.7);
    }

    #[test]
    fn fd_oracle_agrees() {
        let h = RotSymSurface::hyperbolic(2).unwrap();
        let d = BoundaryData::new(vec![FourierMode { n: 1, a: 1.0, b: 0.0 }, FourierMode { n: 3, a: 0.0, b: 0.5 }]).unwrap();
        let s = exhaust(&h, &d, &[1.5, 3.0], 1e-10).unwrap();
        let fd = fd_laplace(&h, &d, 3.0, 120, 64, 1e-12).unwrap();
        let err = fd_discrepancy(&s, 1, &fd).unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn bad_inputs() {
        let h = RotSymSurface::hyperbolic(2).unwrap();
        assert!(exhaust(&h, &cos1(), &[3.0], 1e-8).is_err());
        assert!(exhaust(&h, &cos1(), &[3.0, 2.0], 1e-8).is_err());
        assert!(BoundaryData::new(vec![]).is_err());
        assert!(solve_mode(&h, 1, 1e-4, 1e-8).is_err());
    }
}
