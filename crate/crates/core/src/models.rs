//! Radial curvature-bound profiles `(a, b)`: `-b(r)^2 <= K <= -a(r)^2` at distance `r`
//! from the pole, the data tuple that the convexity conditions are stated on,
//! and a catalog of analytic models.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{InterpError, Pchip};

/// Relative tolerance used by all inequality checks in this module.
pub const CHECK_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("model '{model}' requires parameter '{param}'")]
    MissingParam { model: String, param: String },
    #[error("model '{model}' violates constraint {constraint}")]
    Constraint { model: String, constraint: String },
    #[error("t = {t} is outside the domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },
    #[error("interpolation: {0}")]
    Interp(#[from] InterpError),
    #[error("empty grid")]
    EmptyGrid,
    #[error("grid point {t} lies below the threshold {t1}")]
    BelowThreshold { t: f64, t1: f64 },
    #[error("invalid data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    /// Non-decreasing.
    Increasing,
    /// Non-increasing.
    Decreasing,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    Analytic,
    SampledGrid,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Inner {
    Constant(f64),
    LogPinchedA { eps: f64, r_star: f64, core: Option<f64> },
    LogPinchedB { eps_tilde: f64, r_star: f64, core: Option<f64> },
    SuperexpA,
    SuperexpB { c: f64, eps: f64 },
    SinhIterate { m: u32 },
    Grid(Arc<Pchip>),
    Closure { f: ScalarFn, df: Option<ScalarFn> },
}

/// A non-negative function of the distance to the pole.
#[derive(Clone)]
pub struct RadialFunction {
    inner: Inner,
    monotonicity: Monotonicity,
    t_max: f64,
}

impl fmt::Debug for RadialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.inner {
            Inner::Constant(k) => format!("constant({k})"),
            Inner::LogPinchedA { eps, r_star, core } => format!("log-pinched-a(eps={eps}, r*={r_star}, core={core:?})"),
            Inner::LogPinchedB { eps_tilde, r_star, core } => {
                format!("log-pinched-b(eps~={eps_tilde}, r*={r_star}, core={core:?})")
            }
            Inner::SuperexpA => "superexp-a".into(),
            Inner::SuperexpB { c, eps } => format!("superexp-b(c={c}, eps={eps})"),
            Inner::SinhIterate { m } => format!("sinh-iterate({m})"),
            Inner::Grid(p) => format!("grid({} points)", p.knots().len()),
            Inner::Closure { .. } => "closure".into(),
        };
        f.debug_struct("RadialFunction")
            .field("model", &name)
            .field("monotonicity", &self.monotonicity)
            .field("t_max", &self.t_max)
            .finish()
    }
}

/// `x coth x`, continuous at 0.
pub(crate) fn x_coth_x(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

/// `ln cosh x` without overflow.
pub(crate) fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ln sinh x` for `x > 0` without overflow.
pub(crate) fn ln_sinh(x: f64) -> f64 {
    if x < 1.0 {
        x.sinh().ln()
    } else {
        x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln` of the curvature root of `sinh^{∘m}`, i.e. `ln sqrt(F''/F)` with `F = sinh^{∘m}`.
fn ln_sinh_iterate_root(m: u32, t: f64) -> f64 {
    if m == 0 {
        return f64::NEG_INFINITY;
    }
    // F_j, ln F_j', ln A_j with A_j = F_j''/F_j
    let mut f = t;
    let mut ln_fp = 0.0;
    let mut ln_acc = f64::NEG_INFINITY;
    for _ in 0..m {
        let next_ln_acc = log_add_exp(2.0 * ln_fp, x_coth_x(f).ln() + ln_acc);
        ln_fp += ln_cosh(f);
        f = f.sinh();
        ln_acc = next_ln_acc;
    }
    0.5 * ln_acc
}

impl RadialFunction {
    fn analytic(inner: Inner, monotonicity: Monotonicity) -> Self {
        Self { inner, monotonicity, t_max: f64::INFINITY }
    }

    pub fn constant(k: f64) -> Self {
        Self::analytic(Inner::Constant(k), Monotonicity::Increasing)
    }

    /// Sampled function, interpolated monotonically. Monotonicity is read off the samples.
    pub fn from_samples(t: Vec<f64>, v: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(i) = v.iter().position(|&x| x < 0.0) {
            return Err(ModelError::InvalidData(format!("negative sample at index {i}")));
        }
        let inc = v.windows(2).all(|w| w[1] >= w[0]);
        let dec = v.windows(2).all(|w| w[1] <= w[0]);
        let monotonicity = if inc {
            Monotonicity::Increasing
        } else if dec {
            Monotonicity::Decreasing
        } else {
            Monotonicity::None
        };
        let p = Pchip::new(t, v)?;
        let t_max = p.domain().1;
        Ok(Self { inner: Inner::Grid(Arc::new(p)), monotonicity, t_max })
    }

    /// Function given by a closure, with optional derivative and a declared monotonicity.
    pub fn from_fn<F>(f: F, df: Option<ScalarFn>, monotonicity: Monotonicity) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::analytic(Inner::Closure { f: Arc::new(f), df }, monotonicity)
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn kind(&self) -> FunctionKind {
        match self.inner {
            Inner::Grid(_) => FunctionKind::SampledGrid,
            _ => FunctionKind::Analytic,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match &self.inner {
            Inner::Grid(p) => p.domain(),
            _ => (0.0, self.t_max),
        }
    }

    /// Points where the function is only piecewise smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.inner {
            Inner::LogPinchedA { r_star, .. } | Inner::LogPinchedB { r_star, .. } => vec![*r_star],
            Inner::Grid(p) => p.knots().to_vec(),
            _ => Vec::new(),
        }
    }

    fn check_domain(&self, t: f64) -> Result<(), ModelError> {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi {
            Ok(())
        } else {
            Err(ModelError::Domain { t, lo, hi })
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        self.check_domain(t)?;
        Ok(match &self.inner {
            Inner::Constant(k) => *k,
            Inner::Grid(p) => p.eval(t)?,
            Inner::Closure { f, .. } => f(t),
            _ => self.ln_eval(t)?.exp(),
        })
    }

    /// Natural log of the value; finite well past the point where the value overflows.
    pub fn ln_eval(&self, t: f64) -> Result<f64, ModelError> {
        self.check_domain(t)?;
        Ok(match &self.inner {
            Inner::Constant(k) => k.ln(),
            Inner::LogPinchedA { eps, r_star, core } => {
                if t < *r_star {
                    match core {
                        Some(c) => c.ln(),
                        None => 0.5 * (1.0 + eps).ln() - r_star.ln() - 0.5 * r_star.ln().ln(),
                    }
                } else {
                    0.5 * (1.0 + eps).ln() - t.ln() - 0.5 * t.ln().ln()
                }
            }
            Inner::LogPinchedB { eps_tilde, r_star, core } => {
                if t < *r_star {
                    match core {
                        Some(c) => c.ln(),
                        None => eps_tilde * r_star.ln().ln() - r_star.ln(),
                    }
                } else {
                    eps_tilde * t.ln().ln() - t.ln()
                }
            }
            Inner::SuperexpA => ln_sinh_iterate_root(2, t),
            Inner::SuperexpB { c, eps } => 0.5 * c.ln() + (1.0 - 0.5 * eps) * t + 0.5 * (t / E3).exp(),
            Inner::SinhIterate { m } => ln_sinh_iterate_root(*m, t),
            Inner::Grid(p) => p.eval(t)?.ln(),
            Inner::Closure { f, .. } => f(t).ln(),
        })
    }

    /// `ln k(e^s)`, usable when `e^s` itself overflows.
    pub fn ln_at_ln(&self, s: f64) -> Result<f64, ModelError> {
        match &self.inner {
            Inner::Constant(k) => Ok(k.ln()),
            Inner::LogPinchedA { eps, r_star, .. } if s >= r_star.ln() => Ok(0.5 * (1.0 + eps).ln() - s - 0.5 * s.ln()),
            Inner::LogPinchedB { eps_tilde, r_star, .. } if s >= r_star.ln() => Ok(eps_tilde * s.ln() - s),
            _ => self.ln_eval(s.exp()),
        }
    }

    /// First derivative, when available in closed form (or from the interpolant).
    pub fn deriv(&self, t: f64) -> Result<Option<f64>, ModelError> {
        self.check_domain(t)?;
        Ok(match &self.inner {
            Inner::Constant(_) => Some(0.0),
            Inner::LogPinchedA { r_star, .. } => {
                if t < *r_star {
                    Some(0.0)
                } else {
                    let a = self.eval(t)?;
                    Some(-a * (1.0 / t + 0.5 / (t * t.ln())))
                }
            }
            Inner::LogPinchedB { eps_tilde, r_star, .. } => {
                if t < *r_star {
                    Some(0.0)
                } else {
                    let b = self.eval(t)?;
                    Some(b * (eps_tilde / (t * t.ln()) - 1.0 / t))
                }
            }
            Inner::SuperexpA => {
                // a^2 = cosh^2 t + x coth x with x = sinh t
                let x = t.sinh();
                let dxcoth = if x.abs() < 1e-6 { 2.0 * x / 3.0 } else { 1.0 / x.tanh() - x / (x.sinh() * x.sinh()) };
                let d_a2 = 2.0 * t.cosh() * t.sinh() + dxcoth * t.cosh();
                Some(d_a2 / (2.0 * self.eval(t)?))
            }
            Inner::SuperexpB { eps, .. } => {
                let b = self.eval(t)?;
                Some(b * ((1.0 - 0.5 * eps) + 0.5 * (t / E3).exp() / E3))
            }
            Inner::SinhIterate { .. } => None,
            Inner::Grid(p) => Some(p.eval_with_deriv(t)?.1),
            Inner::Closure { df, .. } => df.as_ref().map(|d| d(t)),
        })
    }

    /// Verify the declared monotonicity on `grid`; returns the first offending `t`.
    pub fn check_monotonicity(&self, grid: &[f64]) -> Result<Option<f64>, ModelError> {
        let mut prev: Option<f64> = None;
        for &t in grid {
            let v = self.eval(t)?;
            if let Some(p) = prev {
                let tol = CHECK_RTOL * p.abs().max(v.abs());
                let bad = match self.monotonicity {
                    Monotonicity::Increasing => v < p - tol,
                    Monotonicity::Decreasing => v > p + tol,
                    Monotonicity::None => false,
                };
                if bad {
                    return Ok(Some(t));
                }
            }
            prev = Some(v);
        }
        Ok(None)
    }

    /// Largest relative disagreement between `deriv` and central differences at interior grid points.
    pub fn derivative_mismatch(&self, grid: &[f64]) -> Result<f64, ModelError> {
        let mut worst: f64 = 0.0;
        for &t in grid {
            let Some(d) = self.deriv(t)? else { return Ok(f64::NAN) };
            let h = 1e-5 * t.abs().max(1.0);
            let (lo, hi) = self.domain();
            if t - h < lo || t + h > hi || self.breakpoints().iter().any(|&b| (b - t).abs() <= h) {
                continue;
            }
            let fd = (self.eval(t + h)? - self.eval(t - h)?) / (2.0 * h);
            let scale = d.abs().max(fd.abs()).max(1e-300);
            worst = worst.max((fd - d).abs() / scale);
        }
        Ok(worst)
    }
}

const E3: f64 = 20.085_536_923_187_668;

/// Serialized form of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Catalog {
        model: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_star: Option<f64>,
    },
    Grid {
        grid: GridSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_star: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CurvatureProfile {
    pub a: RadialFunction,
    pub b: RadialFunction,
    pub r_star: f64,
    spec: Option<ProfileSpec>,
}

impl CurvatureProfile {
    pub fn new(a: RadialFunction, b: RadialFunction, r_star: f64) -> Result<Self, ModelError> {
        if !(r_star >= 0.0) {
            return Err(ModelError::InvalidData(format!("r_star must be >= 0, got {r_star}")));
        }
        Ok(Self { a, b, r_star, spec: None })
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self, ModelError> {
        let mut p = match spec {
            ProfileSpec::Catalog { model, params, r_star } => catalog_lookup(model, params, *r_star)?,
            ProfileSpec::Grid { grid, r_star } => {
                let a = RadialFunction::from_samples(grid.t.clone(), grid.a.clone())?;
                let b = RadialFunction::from_samples(grid.t.clone(), grid.b.clone())?;
                Self::new(a, b, r_star.unwrap_or(grid.t[0]))?
            }
        };
        p.spec = Some(spec.clone());
        Ok(p)
    }

    pub fn spec(&self) -> Option<&ProfileSpec> {
        self.spec.as_ref()
    }

    /// First grid point `t >= r_star` with `b(t) < a(t)` or `a(t) < 0`.
    pub fn ordering_violation(&self, grid: &[f64]) -> Result<Option<f64>, ModelError> {
        for &t in grid.iter().filter(|&&t| t >= self.r_star) {
            let (a, b) = (self.a.eval(t)?, self.b.eval(t)?);
            if a < 0.0 || b < a * (1.0 - CHECK_RTOL) {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }
}

fn param(model: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64, ModelError> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| ModelError::MissingParam { model: model.into(), param: key.into() })
}

fn constraint(model: &str, ok: bool, text: &str) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::Constraint { model: model.into(), constraint: text.into() })
    }
}

/// Build a catalog profile.
///
/// * `constant` (`k`): `a = b = k`
/// * `euclidean`: `a = b = 0`
/// * `log-pinched` (`eps`, `eps_tilde`, optional `core`): for `t >= r_star`,
///   `a^2 = (1+eps)/(t^2 log t)`, `b^2 = (log t)^{2 eps_tilde}/t^2`; below `r_star`
///   both are held at their value at `r_star`, or at `core` when given
/// * `superexp` (`c`, `eps`): `a^2 = sinh t coth(sinh t) + cosh^2 t` (so `f_a = sinh(sinh t)`),
///   `b^2 = c e^{(2-eps)t} exp(e^{t/e^3})`
/// * `sinh-iterate` (`m`): `a = b` with `f_a` the `m`-fold iterate of `sinh`
pub fn catalog_lookup(name: &str, params: &BTreeMap<String, f64>, r_star: Option<f64>) -> Result<CurvatureProfile, ModelError> {
    let r0 = r_star.unwrap_or(0.0);
    let (a, b, r) = match name {
        "constant" => {
            let k = param(name, params, "k")?;
            constraint(name, k.is_finite() && k >= 0.0, "k >= 0")?;
            (RadialFunction::constant(k), RadialFunction::constant(k), r0)
        }
        "euclidean" => (RadialFunction::constant(0.0), RadialFunction::constant(0.0), r0),
        "log-pinched" => {
            let eps = param(name, params, "eps")?;
            let eps_tilde = param(name, params, "eps_tilde")?;
            let r = r_star.ok_or_else(|| ModelError::MissingParam { model: name.into(), param: "r_star".into() })?;
            constraint(name, eps_tilde > 0.0, "eps_tilde > 0")?;
            constraint(name, eps > eps_tilde, "eps > eps_tilde")?;
            constraint(name, r > 1.0, "r_star > 1")?;
            constraint(
                name,
                r.ln().powf(1.0 + 2.0 * eps_tilde) >= 1.0 + eps,
                "b >= a at r_star, i.e. (log r_star)^(1+2 eps_tilde) >= 1+eps",
            )?;
            let core = params.get("core").copied();
            if let Some(c) = core {
                constraint(name, c > 0.0 && c.is_finite(), "core > 0")?;
            }
            let mono = |v_at_star: f64| match core {
                Some(c) if c < v_at_star => Monotonicity::None,
                _ => Monotonicity::Decreasing,
            };
            let a_star = ((1.0 + eps) / (r * r * r.ln())).sqrt();
            let b_star = r.ln().powf(eps_tilde) / r;
            (
                RadialFunction::analytic(Inner::LogPinchedA { eps, r_star: r, core }, mono(a_star)),
                RadialFunction::analytic(Inner::LogPinchedB { eps_tilde, r_star: r, core }, mono(b_star)),
                r,
            )
        }
        "superexp" => {
            let c = params.get("c").copied().unwrap_or(1.0);
            let eps = param(name, params, "eps")?;
            constraint(name, c > 0.0, "c > 0")?;
            constraint(name, eps > 0.0, "eps > 0")?;
            (
                RadialFunction::analytic(Inner::SuperexpA, Monotonicity::Increasing),
                RadialFunction::analytic(Inner::SuperexpB { c, eps }, Monotonicity::Increasing),
                r0,
            )
        }
        "sinh-iterate" => {
            let m = param(name, params, "m")?;
            constraint(name, m >= 1.0 && m.fract() == 0.0 && m <= 8.0, "m is an integer in [1, 8]")?;
            let f = RadialFunction::analytic(Inner::SinhIterate { m: m as u32 }, Monotonicity::Increasing);
            (f.clone(), f, r0)
        }
        "custom-grid" => {
            return Err(ModelError::InvalidData(
                "custom-grid profiles are given as {\"grid\": {\"t\": [...], \"a\": [...], \"b\": [...]}}".into(),
            ))
        }
        other => return Err(ModelError::UnknownModel(other.into())),
    };
    CurvatureProfile::new(a, b, r)
}

/// The data tuple `(a, b, T1, eps, eps_tilde, C1, n)`.
#[derive(Debug, Clone)]
pub struct DataC {
    pub profile: CurvatureProfile,
    pub t1: f64,
    pub eps: f64,
    pub eps_tilde: f64,
    pub c1: f64,
    pub dim: usize,
}

impl DataC {
    pub fn new(profile: CurvatureProfile, t1: f64, eps: f64, eps_tilde: f64, c1: f64, dim: usize) -> Result<Self, ModelError> {
        if !(eps_tilde > 0.0 && eps > eps_tilde) {
            return Err(ModelError::InvalidData(format!("need eps > eps_tilde > 0, got eps={eps}, eps_tilde={eps_tilde}")));
        }
        if !(c1 >= 1.0) {
            return Err(ModelError::InvalidData(format!("need C1 >= 1, got {c1}")));
        }
        if dim < 2 {
            return Err(ModelError::InvalidData(format!("need dimension >= 2, got {dim}")));
        }
        if !t1.is_finite() {
            return Err(ModelError::InvalidData("T1 must be finite".into()));
        }
        Ok(Self { profile, t1, eps, eps_tilde, c1, dim })
    }
}

/// The truncated cone `C(v0, 1/L)`, in the 2-dimensional models `v0` is a polar angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub l: f64,
    pub v0: f64,
    pub multiplier: u32,
}

impl ConeSpec {
    pub fn new(l: f64, v0: f64, multiplier: u32) -> Result<Self, ModelError> {
        if !(l > 8.0 / std::f64::consts::PI) || !l.is_finite() {
            return Err(ModelError::InvalidData(format!("cone parameter L must exceed 8/pi, got {l}")));
        }
        if multiplier == 0 {
            return Err(ModelError::InvalidData("cone multiplier must be positive".into()));
        }
        Ok(Self { l, v0: v0.rem_euclid(std::f64::consts::TAU), multiplier })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub pass: bool,
    pub first_violation: Option<f64>,
    /// Infimum over the grid of `(rhs_bound - lhs)/scale`; negative means violated.
    pub inf_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CReport {
    pub conditions: Vec<ConditionReport>,
}

impl CReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Check the four growth conditions on `grid`:
///
/// * C1: `a^2(t) >= (1+eps)/(t^2 log t)`
/// * C2: `b^2(t) >= (log t)^{2 eps_tilde}/t^2`
/// * C3: `b(t+1) <= C1 b(t)`
/// * C4: `b(t/2) <= C1 b(t)`
pub fn check_c_conditions(data: &DataC, grid: &[f64]) -> Result<CReport, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    for &t in grid {
        if t < data.t1 || !(t > 1.0) {
            return Err(ModelError::BelowThreshold { t, t1: data.t1.max(1.0) });
        }
    }
    let names = ["C1", "C2", "C3", "C4"];
    let mut slacks = [f64::INFINITY; 4];
    let mut first: [Option<f64>; 4] = [None; 4];
    let (a, b) = (&data.profile.a, &data.profile.b);
    for &t in grid {
        let lt = t.ln();
        // log-space comparisons: slack = ln(bound side) - ln(other side)
        let s1 = 2.0 * a.ln_eval(t)? - ((1.0 + data.eps).ln() - 2.0 * lt - lt.ln());
        let lb = b.ln_eval(t)?;
        let s2 = 2.0 * lb - (2.0 * data.eps_tilde * lt.ln() - 2.0 * lt);
        let s3 = data.c1.ln() + lb - b.ln_eval(t + 1.0)?;
        let s4 = data.c1.ln() + lb - b.ln_eval(0.5 * t)?;
        for (i, s) in [s1, s2, s3, s4].into_iter().enumerate() {
            // -inf - (-inf) for a zero profile compared with itself is NaN; treat as equality
            let s = if s.is_nan() { 0.0 } else { s };
            if s < slacks[i] {
                slacks[i] = s;
            }
            if s < -CHECK_RTOL && first[i].is_none() {
                first[i] = Some(t);
            }
        }
    }
    let conditions = (0..4)
        .map(|i| ConditionReport {
            name: names[i].into(),
            pass: first[i].is_none(),
            first_violation: first[i],
            inf_slack: slacks[i],
        })
        .collect();
    Ok(CReport { conditions })
}

/// Geometric grid on `[lo, hi]` with `per_decade` points per factor of ten, endpoints included.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && per_decade > 0, "bad geometric grid");
    let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let step = (hi / lo).ln() / n as f64;
    let mut g: Vec<f64> = (0..=n).map(|i| lo * (step * i as f64).exp()).collect();
    g[0] = lo;
    g[n] = hi;
    g
}

pub const DEFAULT_PER_DECADE: usize = 64;

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn log_pinched(r: f64, core: Option<f64>) -> CurvatureProfile {
        let mut p = params(&[("eps", 1.0), ("eps_tilde", 0.5)]);
        if let Some(c) = core {
            p.insert("core".into(), c);
        }
        catalog_lookup("log-pinched", &p, Some(r)).unwrap()
    }

    #[test]
    fn constant_and_flat() {
        let p = catalog_lookup("constant", &params(&[("k", 1.0)]), None).unwrap();
        assert_eq!(p.a.eval(3.0).unwrap(), 1.0);
        assert_eq!(p.b.eval(0.0).unwrap(), 1.0);
        let e = catalog_lookup("euclidean", &BTreeMap::new(), None).unwrap();
        assert_eq!(e.a.eval(5.0).unwrap(), 0.0);
        assert_eq!(e.b.eval(5.0).unwrap(), 0.0);
    }

    #[test]
    fn log_pinched_closed_forms() {
        let p = log_pinched(10.0, None);
        for t in [10.0, 37.0, 1e3, 1e5] {
            let a2 = p.a.eval(t).unwrap().powi(2);
            let b2 = p.b.eval(t).unwrap().powi(2);
            assert!((a2 / (2.0 / (t * t * t.ln())) - 1.0).abs() < 1e-13);
            assert!((b2 / (t.ln() / (t * t)) - 1.0).abs() < 1e-13);
            assert!((p.a.ln_at_ln(t.ln()).unwrap() - p.a.ln_eval(t).unwrap()).abs() < 1e-12);
        }
        assert_eq!(p.a.eval(3.0).unwrap(), p.a.eval(10.0).unwrap());
        assert_eq!(p.a.monotonicity(), Monotonicity::Decreasing);
    }

    #[test]
    fn constraint_errors_name_the_constraint() {
        let e = catalog_lookup("log-pinched", &params(&[("eps", 0.5), ("eps_tilde", 0.5)]), Some(10.0)).unwrap_err();
        assert!(matches!(&e, ModelError::Constraint { constraint, .. } if constraint.contains("eps > eps_tilde")));
        assert!(matches!(catalog_lookup("nope", &BTreeMap::new(), None), Err(ModelError::UnknownModel(_))));
        assert!(matches!(
            catalog_lookup("constant", &BTreeMap::new(), None),
            Err(ModelError::MissingParam { .. })
        ));
    }

    #[test]
    fn superexp_root_is_sinh_sinh_curvature() {
        let p = catalog_lookup("superexp", &params(&[("c", 1.0), ("eps", 0.1)]), None).unwrap();
        for t in [0.0f64, 0.5, 1.0, 2.0, 3.0] {
            let x: f64 = t.sinh();
            let direct = (x_coth_x(x) + t.cosh().powi(2)).sqrt();
            assert!((p.a.eval(t).unwrap() / direct - 1.0).abs() < 1e-13, "t={t}");
        }
        let it = catalog_lookup("sinh-iterate", &params(&[("m", 2.0)]), None).unwrap();
        assert!((it.a.ln_eval(4.0).unwrap() - p.a.ln_eval(4.0).unwrap()).abs() < 1e-13);
        let one = catalog_lookup("sinh-iterate", &params(&[("m", 1.0)]), None).unwrap();
        assert!((one.a.eval(2.0).unwrap() - 1.0).abs() < 1e-15);
        // the lower bound stays finite in log space far past overflow
        assert!(p.b.ln_eval(300.0).unwrap().is_finite());
    }

    #[test]
    fn catalog_derivatives_match_finite_differences() {
        let models = [
            log_pinched(10.0, None),
            catalog_lookup("superexp", &params(&[("c", 2.0), ("eps", 0.1)]), None).unwrap(),
            catalog_lookup("constant", &params(&[("k", 0.7)]), None).unwrap(),
        ];
        for p in &models {
            let grid = geometric_grid(p.r_star.max(0.1), 30.0, 16);
            assert!(p.a.derivative_mismatch(&grid).unwrap() < 1e-4, "{:?}", p.a);
            assert!(p.b.derivative_mismatch(&grid).unwrap() < 1e-4, "{:?}", p.b);
        }
    }

    #[test]
    fn c_conditions_on_log_pinched() {
        let p = log_pinched(std::f64::consts::E.powi(2), None);
        let data = DataC::new(p, std::f64::consts::E.powi(2), 1.0, 0.5, 2.0, 2).unwrap();
        let grid = geometric_grid(std::f64::consts::E.powi(2), 1e3, DEFAULT_PER_DECADE);
        let rep = check_c_conditions(&data, &grid).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn c1_fails_on_flat_model() {
        let e = catalog_lookup("euclidean", &BTreeMap::new(), None).unwrap();
        let data = DataC::new(e, 3.0, 1.0, 0.5, 1.0, 2).unwrap();
        let grid = geometric_grid(3.0, 100.0, 8);
        let rep = check_c_conditions(&data, &grid).unwrap();
        let c1 = rep.get("C1").unwrap();
        assert!(!c1.pass);
        assert_eq!(c1.first_violation, Some(3.0));
    }

    #[test]
    fn decreasing_b_passes_c3_with_unit_constant() {
        let p = log_pinched(10.0, None);
        let data = DataC::new(p, 10.0, 1.0, 0.5, 1.0, 2).unwrap();
        let rep = check_c_conditions(&data, &geometric_grid(10.0, 1e4, 32)).unwrap();
        assert!(rep.get("C3").unwrap().pass);
    }

    #[test]
    fn c_conditions_reject_points_below_threshold() {
        let p = log_pinched(10.0, None);
        let data = DataC::new(p, 10.0, 1.0, 0.5, 1.0, 2).unwrap();
        assert!(matches!(check_c_conditions(&data, &[5.0]), Err(ModelError::BelowThreshold { .. })));
        assert!(matches!(check_c_conditions(&data, &[]), Err(ModelError::EmptyGrid)));
    }

    #[test]
    fn grid_profile_round_trip() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let spec = ProfileSpec::Grid {
            grid: GridSpec { t: t.clone(), a: t.iter().map(|x| 1.0 + x).collect(), b: t.iter().map(|x| 2.0 + x).collect() },
            r_star: None,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: ProfileSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let p = CurvatureProfile::from_spec(&back).unwrap();
        assert!((p.a.eval(2.25).unwrap() - 3.25).abs() < 1e-12);
        assert!(matches!(p.a.eval(20.0), Err(ModelError::Domain { .. })));
        assert_eq!(p.a.monotonicity(), Monotonicity::Increasing);

        let cat: ProfileSpec = serde_json::from_str(r#"{"model":"constant","params":{"k":2},"r_star":0}"#).unwrap();
        assert!(matches!(cat, ProfileSpec::Catalog { .. }));
    }

    #[test]
    fn cone_spec_validation() {
        assert!(ConeSpec::new(2.0, 0.0, 1).is_err());
        let c = ConeSpec::new(4.0, -1.0, 1).unwrap();
        assert!(c.v0 >= 0.0 && c.v0 < std::f64::consts::TAU);
    }
}
