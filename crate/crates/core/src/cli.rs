//! Command-line front end.
//!
//! Every subcommand takes its parameters from flags, from a JSON config, or from
//! both; a flag overrides the matching key of the config section. Reports go to
//! stdout as pretty JSON and, with `--out`, to `<dir>/<command>.json` next to the
//! CSV grids. Exit status: 0 when every requested check passes, 1 when a check
//! fails or a computation breaks down, 2 for configuration errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::angular::{in_cone, Mollifier};
use crate::convexity::{
    beta_threshold, betal_margin, certificate_margin_ln, find_r0, run_construction, EpsilonRule, RuleVariant,
    DEFAULT_N_MAX,
};
use crate::dirichlet::{exhaust, fd_discrepancy, fd_laplace, BoundaryData, FourierMode};
use crate::jacobi::{implemma_check, jacest_check, solve_jacobi, solve_jacobi_ln, JacobiSolution, TailMajorant};
use crate::models::{
    check_c_conditions, geometric_grid, ConeSpec, CurvatureProfile, DataC, ProfileSpec, DEFAULT_PER_DECADE,
};
use crate::rotsym::{
    ball_volume, cone_inequality_check, distance, distance_closed_form, monotonicity_check, GeoPoint,
    MassRatioSeries, RotSymSurface,
};
use crate::sc_gate::{decide_sc, Branch, ScParams};

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_QUAD_TOL: f64 = 1e-4;
pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn run_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Run(e.to_string())
}

fn cfg_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Parser, Debug, Clone)]
#[command(name = "hadamard", version, about = "Curvature-comparison checks for rotationally symmetric models")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for the JSON report and CSV grids.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    #[arg(long, global = true)]
    pub quad_tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Tabulate a curvature profile and check the growth conditions.
    Models(ModelsArgs),
    /// Solve the Jacobi equation and optionally check growth bounds.
    Jacobi(JacobiArgs),
    /// Decide which strict-convexity branch applies.
    ScCheck(ScCheckArgs),
    /// Evaluate convexity-certificate and Hessian margins.
    Certify(CertifyArgs),
    /// Run the exhaustion and its angle budget.
    Construct(ConstructArgs),
    /// Distances, ball volumes and mass ratios on the model surface.
    Rotsym(RotsymArgs),
    /// Sample the angular extension and its decay.
    Angular(AngularArgs),
    /// Solve the Dirichlet problem on an exhaustion by disks.
    Dirichlet(DirichletArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Models(_) => "models",
            Command::Jacobi(_) => "jacobi",
            Command::ScCheck(_) => "sc-check",
            Command::Certify(_) => "certify",
            Command::Construct(_) => "construct",
            Command::Rotsym(_) => "rotsym",
            Command::Angular(_) => "angular",
            Command::Dirichlet(_) => "dirichlet",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "models" => Command::Models(Default::default()),
            "jacobi" => Command::Jacobi(Default::default()),
            "sc-check" => Command::ScCheck(Default::default()),
            "certify" => Command::Certify(Default::default()),
            "construct" => Command::Construct(Default::default()),
            "rotsym" => Command::Rotsym(Default::default()),
            "angular" => Command::Angular(Default::default()),
            "dirichlet" => Command::Dirichlet(Default::default()),
            _ => return None,
        })
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in {s:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Catalog name (constant, euclidean, log-pinched, superexp, sinh-iterate) or a profile JSON file.
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Shorthand for `--param k=<value>`.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub r_star: Option<f64>,
}

/// The growth-condition data attached to a profile.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataArgs {
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps_tilde: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScParamArgs {
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub pinch2_eps: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub data: DataArgs,
    #[arg(long)]
    pub t_lo: Option<f64>,
    #[arg(long)]
    pub t_hi: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    /// Also check the growth conditions C1-C4.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub check_c: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobiCheck {
    None,
    Jacest,
    Implemma,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobiArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_enum)]
    pub check: Option<JacobiCheck>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Lower end of the range for the growth bounds.
    #[arg(long)]
    pub t_lo: Option<f64>,
    /// Tail majorant for the comparison integral (config only).
    #[arg(skip)]
    pub tail: Option<TailMajorant>,
}

// serde cannot combine `flatten` with `deny_unknown_fields`
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScCheckArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ScParamArgs,
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
}

// serde cannot combine `flatten` with `deny_unknown_fields`
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ScParamArgs,
    /// Level `R` of the sublevel set.
    #[arg(long = "level")]
    #[serde(rename = "level")]
    pub level: Option<f64>,
    #[arg(long)]
    pub c4: Option<f64>,
    /// Values of `log ρ` at which the certificate margin is evaluated.
    #[arg(long, value_delimiter = ',')]
    pub ln_rho: Option<Vec<f64>>,
    /// Perturbation sizes for the Hessian margin.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub l_bump: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Unit,
    Eps,
    Harmonic,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Angle budget.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c_angle: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantName>,
    /// Transition width of the narrow cutoff.
    #[arg(long)]
    pub bump_width: Option<f64>,
    #[arg(long)]
    pub l_bump: Option<f64>,
    /// Starting radius; searched for when absent.
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Range of the Jacobi solution.
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotsymOp {
    Distance,
    Volume,
    Mono,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceKind {
    RadialCone,
    TotallyGeodesic,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotsymArgs {
    #[arg(value_enum)]
    pub op: Option<RotsymOp>,
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Polar coordinates `r,theta` of the first point.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Dimension of the balls or slices.
    #[arg(long = "k-dim")]
    #[serde(rename = "k-dim")]
    pub k_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub slice: Option<SliceKind>,
    /// Measure of the set of directions spanned by a radial cone.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Accepted for compatibility; the report is always JSON.
    #[arg(long)]
    #[serde(skip)]
    pub json: bool,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngularArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Cone aperture parameter `L > 8/π`.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub rays: Option<usize>,
    /// Radial extent of the sampled field beyond `R₁`.
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Quadrature tolerance used for the derivative field.
    #[arg(long)]
    pub deriv_tol: Option<f64>,
    /// Random points checked for `h = 1` outside the double cone.
    #[arg(long)]
    pub outside_samples: Option<usize>,
    /// Search limit for `R₁`.
    #[arg(long)]
    pub rho_max: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirichletArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Boundary data JSON: `{"fourier": [{"n": 1, "a": 1.0, "b": 0.0}, ...]}`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Inline boundary modes (config only).
    #[arg(skip)]
    pub fourier: Option<Vec<FourierMode>>,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Radial and angular sample counts of the exported field.
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub nt: Option<usize>,
    /// Cross-check the largest disk against the finite-volume solver.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fd: Option<bool>,
    #[arg(long)]
    pub fd_nr: Option<usize>,
    #[arg(long)]
    pub fd_nt: Option<usize>,
}

/// The JSON run configuration. Sections are keyed by subcommand name and use the
/// flag names (with `_` for `-`) as keys.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ProfileSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<Value>,
    #[serde(rename = "sc-check", skip_serializing_if = "Option::is_none")]
    pub sc_check: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construct: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotsym: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<Value>,
    /// Directory of the config file; relative paths inside it resolve against this.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Err(CliError::Config(format!("{} is empty", path.display())));
        }
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn section(&self, name: &str) -> Option<&Value> {
        match name {
            "models" => self.models.as_ref(),
            "jacobi" => self.jacobi.as_ref(),
            "sc-check" => self.sc_check.as_ref(),
            "certify" => self.certify.as_ref(),
            "construct" => self.construct.as_ref(),
            "rotsym" => self.rotsym.as_ref(),
            "angular" => self.angular.as_ref(),
            "dirichlet" => self.dirichlet.as_ref(),
            _ => None,
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Overlay the non-null fields of `flags` on the config section and read the result back.
fn merged<T: Serialize + DeserializeOwned>(flags: &T, section: Option<&Value>, name: &str) -> Result<T, CliError> {
    let mut base = match section {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::Config(format!("section {name:?} must be an object"))),
    };
    if let Value::Object(f) = serde_json::to_value(flags).map_err(cfg_err)? {
        for (k, v) in f {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Config(format!("section {name:?}: {e}")))
}

/// Global settings after merging flags and config.
#[derive(Debug, Clone)]
struct Ctx<'a> {
    cfg: &'a RunConfig,
    rtol: f64,
    quad_tol: f64,
    seed: u64,
}

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    /// Pretty JSON report, newline-terminated.
    pub json: String,
    /// `(file name, contents)` pairs.
    pub csv: Vec<(String, String)>,
    pub pass: bool,
    /// Failing check and its slack, when `pass` is false.
    pub failure: Option<String>,
}

fn profile_spec(m: &ModelArgs, cfg: &RunConfig) -> Result<ProfileSpec, CliError> {
    let mut extra: BTreeMap<String, f64> = m.params.iter().cloned().collect();
    if let Some(k) = m.k {
        extra.insert("k".into(), k);
    }
    let spec = match &m.model {
        Some(name) if name.ends_with(".json") => {
            let path = PathBuf::from(name);
            let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{name}: {e}")))?
        }
        Some(name) => ProfileSpec::Catalog { model: name.clone(), params: BTreeMap::new(), r_star: None },
        None => cfg.model.clone().ok_or_else(|| CliError::Config("no model given (use --model or \"model\")".into()))?,
    };
    Ok(match spec {
        ProfileSpec::Catalog { model, mut params, r_star } => {
            params.extend(extra);
            ProfileSpec::Catalog { model, params, r_star: m.r_star.or(r_star) }
        }
        ProfileSpec::Grid { grid, r_star } => {
            if !extra.is_empty() {
                return Err(CliError::Config("model parameters do not apply to grid profiles".into()));
            }
            ProfileSpec::Grid { grid, r_star: m.r_star.or(r_star) }
        }
    })
}

fn load_profile(m: &ModelArgs, cfg: &RunConfig) -> Result<(ProfileSpec, CurvatureProfile), CliError> {
    let spec = profile_spec(m, cfg)?;
    let p = CurvatureProfile::from_spec(&spec).map_err(cfg_err)?;
    Ok((spec, p))
}

fn catalog_param(spec: &ProfileSpec, name: &str) -> Option<f64> {
    match spec {
        ProfileSpec::Catalog { params, .. } => params.get(name).copied(),
        ProfileSpec::Grid { .. } => None,
    }
}

/// Model surface with warping function `f_a`, exact for the constant-curvature entries.
fn model_surface(spec: &ProfileSpec, profile: &CurvatureProfile, r_max: f64, rtol: f64, dim: usize) -> Result<RotSymSurface, CliError> {
    if let ProfileSpec::Catalog { model, params, .. } = spec {
        match model.as_str() {
            "constant" => {
                let k = params.get("k").copied().unwrap_or(0.0);
                return RotSymSurface::constant_curvature(k, dim).map_err(cfg_err);
            }
            "euclidean" => return RotSymSurface::flat(dim).map_err(cfg_err),
            _ => {}
        }
    }
    RotSymSurface::from_curvature(&profile.a, r_max, rtol, dim).map_err(run_err)
}

fn data_c(spec: &ProfileSpec, profile: &CurvatureProfile, d: &DataArgs) -> Result<DataC, CliError> {
    let eps = d
        .eps
        .or_else(|| catalog_param(spec, "eps"))
        .ok_or_else(|| CliError::Config("growth data needs eps".into()))?;
    let eps_tilde = d
        .eps_tilde
        .or_else(|| catalog_param(spec, "eps_tilde"))
        .ok_or_else(|| CliError::Config("growth data needs eps_tilde".into()))?;
    let t1 = d.t1.unwrap_or(profile.r_star.max(std::f64::consts::E));
    DataC::new(profile.clone(), t1, eps, eps_tilde, d.c1.unwrap_or(2.0), d.dim.unwrap_or(2)).map_err(cfg_err)
}

fn sc_params(data: &DataC, a: &ScParamArgs) -> Result<ScParams, CliError> {
    let eps1 = a.eps1.unwrap_or(0.5 * (data.eps + data.eps_tilde));
    let alpha = a.alpha.unwrap_or(0.4 * (eps1 - data.eps_tilde));
    ScParams::new(
        data,
        eps1,
        alpha,
        a.lambda.unwrap_or(0.75),
        a.t0.unwrap_or(1.0),
        a.pinch2_eps.unwrap_or(0.1),
    )
    .map_err(cfg_err)
}

fn merged_data(flags: &DataArgs, cfg: &RunConfig) -> Result<DataArgs, CliError> {
    let section = cfg.data.as_ref().map(serde_json::to_value).transpose().map_err(cfg_err)?;
    merged(flags, section.as_ref(), "data")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn report<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(run_err)?;
    s.push('\n');
    Ok(s)
}

fn outcome(command: &'static str, value: Value, csv: Vec<(String, String)>, failure: Option<String>) -> Result<Outcome, CliError> {
    Ok(Outcome { command, json: report(&value)?, csv, pass: failure.is_none(), failure })
}

fn jacobi_solution(k: &crate::models::RadialFunction, t_max: f64, rtol: f64) -> Result<JacobiSolution, CliError> {
    solve_jacobi(k, t_max, rtol).map_err(run_err)
}

fn cmd_models(a: &ModelsArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a: ModelsArgs = ModelsArgs { model: a.model.clone(), data: a.data.clone(), ..merged(a, ctx.cfg.section("models"), "models")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let dom_hi = profile.a.domain().1.min(profile.b.domain().1);
    let data = match a.check_c.unwrap_or(false) {
        true => Some(data_c(&spec, &profile, &merged_data(&a.data, ctx.cfg)?)?),
        false => None,
    };
    let floor = data.as_ref().map_or(0.0, |d| d.t1);
    let lo = a.t_lo.unwrap_or(profile.r_star.max(std::f64::consts::E).max(floor));
    let hi = a.t_hi.unwrap_or(1e5).min(dom_hi);
    if !(hi > lo && lo > 0.0) {
        return Err(CliError::Config(format!("empty grid [{lo}, {hi}]")));
    }
    let grid = geometric_grid(lo, hi, a.per_decade.unwrap_or(DEFAULT_PER_DECADE));
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let (av, bv) = (profile.a.eval(t).map_err(run_err)?, profile.b.eval(t).map_err(run_err)?);
        rows.push(vec![t.to_string(), av.to_string(), bv.to_string()]);
    }
    let ordering = profile.ordering_violation(&grid).map_err(run_err)?;
    let mut failure = ordering.map(|t| format!("b < a or a < 0 at t = {t}"));
    let conditions = if let Some(data) = &data {
        let rep = check_c_conditions(data, &grid).map_err(run_err)?;
        if failure.is_none() {
            if let Some(c) = rep.conditions.iter().find(|c| !c.pass) {
                failure = Some(format!("{} fails, inf slack {:e}", c.name, c.inf_slack));
            }
        }
        Some(rep)
    } else {
        None
    };
    let value = json!({
        "paper_anchor": "curvature-growth-conditions",
        "model": spec,
        "r_star": profile.r_star,
        "grid": {"lo": lo, "hi": hi, "points": grid.len()},
        "a_monotonicity": profile.a.monotonicity(),
        "b_monotonicity": profile.b.monotonicity(),
        "ordering_violation": ordering,
        "conditions": conditions,
        "pass": failure.is_none(),
    });
    outcome("models", value, vec![("models.csv".into(), csv_table(&["t", "a", "b"], rows))], failure)
}

fn cmd_jacobi(a: &JacobiArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a = JacobiArgs { model: a.model.clone(), ..merged(a, ctx.cfg.section("jacobi"), "jacobi")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let t_max = a.t_max.unwrap_or(20.0);
    let sol = jacobi_solution(&profile.a, t_max, ctx.rtol)?;
    let mut csv = Vec::new();
    sol.write_csv(&mut csv)?;
    let mut failure = None;
    let mut jacest = None;
    let mut implemma = None;
    match a.check.unwrap_or(JacobiCheck::None) {
        JacobiCheck::None => {}
        JacobiCheck::Jacest => {
            let eps = a
                .eps
                .or_else(|| catalog_param(&spec, "eps"))
                .ok_or_else(|| CliError::Config("jacest check needs eps".into()))?;
            let eps1 = a.eps1.unwrap_or(0.5 * eps);
            let lo = a.t_lo.unwrap_or(3.0);
            let rep = jacest_check(&sol, eps, eps1, (lo, t_max)).map_err(|e| match e {
                crate::jacobi::JacobiError::InvalidArgument(m) => CliError::Config(m),
                e => run_err(e),
            })?;
            if !rep.pass {
                failure = Some(format!("growth bounds fail; min log slack {:?}", rep.min_log_slack));
            }
            jacest = Some(rep);
        }
        JacobiCheck::Implemma => {
            let (bound, rep) = implemma_check(&profile, t_max, a.tail, ctx.rtol).map_err(run_err)?;
            if !rep.pass {
                failure = Some(format!("comparison bound exceeded by {:e}", rep.max_violation));
            }
            implemma = Some(json!({"bound": bound, "report": rep}));
        }
    }
    let anchor = match a.check.unwrap_or(JacobiCheck::None) {
        JacobiCheck::Implemma => "jacobi-comparison-integral",
        _ => "jacobi-field-growth",
    };
    let value = json!({
        "paper_anchor": anchor,
        "model": spec,
        "t_max": t_max,
        "rtol": ctx.rtol,
        "nodes": sol.node_count(),
        "log_f_end": sol.log_f(t_max).map_err(run_err)?,
        "u_end": sol.u(t_max).map_err(run_err)?,
        "jacest": jacest,
        "implemma": implemma,
        "pass": failure.is_none(),
    });
    outcome("jacobi", value, vec![("jacobi.csv".into(), String::from_utf8(csv).map_err(run_err)?)], failure)
}

fn cmd_sc_check(a: &ScCheckArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a = ScCheckArgs { model: a.model.clone(), data: a.data.clone(), ..merged(a, ctx.cfg.section("sc-check"), "sc-check")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let data = data_c(&spec, &profile, &merged_data(&a.data, ctx.cfg)?)?;
    let params = sc_params(&data, &a.params)?;
    let w = a.window.unwrap_or_else(|| vec![1e2, 1e5]);
    if w.len() != 2 {
        return Err(CliError::Config("window needs two values".into()));
    }
    let verdict = decide_sc(&data, &params, (w[0], w[1])).map_err(|e| match e {
        crate::sc_gate::ScError::Params(m) | crate::sc_gate::ScError::Domain { reason: m, .. } => CliError::Config(m),
        e => run_err(e),
    })?;
    // worst slack of the deciding branch; for branch 2 the supremum of log L
    let sup_slack = match verdict.branch {
        Branch::Branch2 => verdict.report(Branch::Branch2).and_then(|r| r.sup_log_l),
        Branch::None => None,
        b => verdict.report(b).and_then(|r| r.min_slack),
    };
    let failure = (verdict.branch == Branch::None).then(|| {
        let worst: Vec<String> = verdict
            .reports
            .iter()
            .map(|r| format!("{:?}: {}", r.branch, r.reason.clone().unwrap_or_else(|| format!("min slack {:?}", r.min_slack))))
            .collect();
        format!("no branch applies ({})", worst.join("; "))
    });
    let csv = csv_table(
        &["t", "slack", "value"],
        verdict.evidence.iter().map(|p| vec![p.t.to_string(), p.slack.to_string(), p.value.to_string()]),
    );
    let value = json!({
        "paper_anchor": "strict-convexity-branches",
        "model": spec,
        "branch": verdict.branch,
        "witness": verdict.witness,
        "window": verdict.window,
        "sup_slack": sup_slack,
        "caveat": verdict.caveat,
        "reports": verdict.reports.iter().map(|r| json!({
            "branch": r.branch,
            "pass": r.pass,
            "reason": r.reason,
            "first_violation": r.first_violation,
            "min_slack": r.min_slack,
            "sup_log_l": r.sup_log_l,
            "trend_slope": r.trend_slope,
            "points": r.evidence.len(),
        })).collect::<Vec<_>>(),
    });
    outcome("sc-check", value, vec![("sc-check.csv".into(), csv)], failure)
}

fn cmd_certify(a: &CertifyArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a = CertifyArgs { model: a.model.clone(), data: a.data.clone(), ..merged(a, ctx.cfg.section("certify"), "certify")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let data = data_c(&spec, &profile, &merged_data(&a.data, ctx.cfg)?)?;
    let params = sc_params(&data, &a.params)?;
    let level = a.level.unwrap_or(10.0);
    let c4 = a.c4.unwrap_or(1.0);
    // the boundary regime starts where (log rho)^alpha reaches R
    let ln_entry = level.powf(1.0 / params.alpha);
    let ln_rhos = a.ln_rho.unwrap_or_else(|| [1.0, 2.0, 10.0, 100.0].iter().map(|m| m * ln_entry).collect());
    if ln_rhos.is_empty() {
        return Err(CliError::Config("ln_rho is empty".into()));
    }
    let ln_top = ln_rhos.iter().cloned().fold(level.ln(), f64::max) + 1.0;
    let sol = solve_jacobi_ln(&profile.a, ln_top.max(level.ln() + 1.0), ctx.rtol).map_err(run_err)?;
    let mut margins = Vec::new();
    let mut failure = None;
    for &lr in &ln_rhos {
        let m = certificate_margin_ln(&data, &params, &sol, level, lr, c4).map_err(run_err)?;
        if !(m.margin > 0.0) && failure.is_none() {
            failure = Some(format!("certificate margin {:e} at ln rho = {lr}", m.margin));
        }
        margins.push(m);
    }
    let mut hess = None;
    if let Some(betas) = &a.beta {
        let l_bump = a.l_bump.unwrap_or(4.0);
        let r = level.max(profile.r_star);
        let mut rows = Vec::new();
        for &beta in betas {
            let rule = EpsilonRule::new(beta, RuleVariant::UnitBump, l_bump).map_err(cfg_err)?;
            let m = betal_margin(&rule, &profile, &sol, r).map_err(run_err)?;
            if !(m > 0.0) && failure.is_none() {
                failure = Some(format!("Hessian margin {m:e} at beta = {beta}"));
            }
            rows.push(json!({"beta": beta, "margin": m}));
        }
        let unit = EpsilonRule::new(1.0, RuleVariant::UnitBump, l_bump).map_err(cfg_err)?;
        let threshold = beta_threshold(&unit, &profile, &sol, r).map_err(run_err)?;
        hess = Some(json!({"R": r, "l_bump": l_bump, "beta_threshold": threshold, "margins": rows}));
    }
    let value = json!({
        "paper_anchor": "convexity-certificate",
        "model": spec,
        "params": params,
        "R": level,
        "c4": c4,
        "certificate": margins,
        "hessian_margin": hess,
        "pass": failure.is_none(),
    });
    outcome("certify", value, Vec::new(), failure)
}

fn cmd_construct(a: &ConstructArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a = ConstructArgs { model: a.model.clone(), ..merged(a, ctx.cfg.section("construct"), "construct")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let variant = match a.variant.unwrap_or(VariantName::Unit) {
        VariantName::Unit => RuleVariant::UnitBump,
        VariantName::Eps => RuleVariant::EpsBump { eps: a.bump_width.unwrap_or(0.5) },
        VariantName::Harmonic => RuleVariant::HarmonicStep,
    };
    let rule = EpsilonRule::new(a.beta.unwrap_or(0.1), variant, a.l_bump.unwrap_or(4.0)).map_err(cfg_err)?;
    let alpha = a.alpha.unwrap_or(0.1);
    let c_angle = a.c_angle.unwrap_or(1.0);
    if !(alpha > 0.0 && alpha <= std::f64::consts::FRAC_PI_2) {
        return Err(CliError::Config(format!("alpha must lie in (0, pi/2], got {alpha}")));
    }
    let sol = jacobi_solution(&profile.a, a.t_max.unwrap_or(80.0), ctx.rtol)?;
    let r0 = match a.r0 {
        Some(r) => r,
        None => find_r0(&profile, &sol, &rule, alpha, c_angle).map_err(run_err)?,
    };
    let tr = run_construction(&profile, &sol, &rule, r0, alpha, c_angle, a.n_max.unwrap_or(DEFAULT_N_MAX))
        .map_err(run_err)?;
    let failure = (!tr.converged).then(|| format!("{:?}: sum {:e} against budget {alpha}", tr.status, tr.sum));
    let rows = csv_table(
        &["n", "lo", "hi", "r_n", "eps_n", "realized", "t_n_bound", "theta_n_bound", "term", "partial_sum"],
        tr.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.lo.to_string(),
                r.hi.to_string(),
                fmt_opt(r.r_n),
                fmt_opt(r.eps_n),
                r.realized.to_string(),
                r.t_n_bound.to_string(),
                r.theta_n_bound.to_string(),
                r.term.to_string(),
                r.partial_sum.to_string(),
            ]
        }),
    );
    let steps = csv_table(
        &["i", "r", "eps"],
        tr.steps.iter().map(|s| vec![s.i.to_string(), s.r.to_string(), s.eps.to_string()]),
    );
    let value = json!({
        "paper_anchor": "convex-exhaustion-angle-budget",
        "model": spec,
        "rule": tr.rule,
        "r0": tr.r0,
        "alpha": tr.alpha_budget,
        "c_angle": tr.c_angle,
        "converged": tr.converged,
        "status": tr.status,
        "sum": tr.sum,
        "tail_bound": tr.tail_bound,
        "intervals": tr.rows.len(),
        "steps": tr.steps.len(),
        "eps_nonincreasing": tr.eps_nonincreasing,
        "monotone_hypotheses": tr.monotone_hypotheses,
        "note": tr.note,
    });
    outcome(
        "construct",
        value,
        vec![("construct.csv".into(), rows), ("construct_steps.csv".into(), steps)],
        failure,
    )
}

fn point(v: &Option<Vec<f64>>, name: &str) -> Result<GeoPoint, CliError> {
    match v.as_deref() {
        Some([r, th]) => GeoPoint::new(*r, *th).map_err(cfg_err),
        _ => Err(CliError::Config(format!("--{name} needs r,theta"))),
    }
}

fn cmd_rotsym(a: &RotsymArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a = RotsymArgs { model: a.model.clone(), json: a.json, ..merged(a, ctx.cfg.section("rotsym"), "rotsym")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let op = a.op.ok_or_else(|| CliError::Config("rotsym needs an operation: distance, volume or mono".into()))?;
    let k = a.k_dim.unwrap_or(2);
    if k < 1 {
        return Err(CliError::Config("k-dim must be at least 1".into()));
    }
    let ts = a.t.clone().unwrap_or_else(|| (1..=20).map(|i| 0.5 * i as f64).collect());
    if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0)) {
        return Err(CliError::Config("t values must be positive".into()));
    }
    let t_top = ts.iter().cloned().fold(0.0, f64::max);
    match op {
        RotsymOp::Distance => {
            let (p, q) = (point(&a.p, "p")?, point(&a.q, "q")?);
            let surface = model_surface(&spec, &profile, p.r.max(q.r).max(1.0) * 1.01, ctx.rtol, 2)?;
            let d = distance(&surface, p, q).map_err(run_err)?;
            let closed = distance_closed_form(&surface, p, q);
            let value = json!({
                "paper_anchor": "rotationally-symmetric-model",
                "op": "distance",
                "model": spec,
                "p": p,
                "q": q,
                "distance": d,
                "closed_form": closed,
            });
            outcome("rotsym", value, Vec::new(), None)
        }
        RotsymOp::Volume => {
            let surface = model_surface(&spec, &profile, t_top * 1.01, ctx.rtol, k.max(2))?;
            let vols = ts.iter().map(|&t| ball_volume(&surface, k, t)).collect::<Result<Vec<_>, _>>().map_err(run_err)?;
            let csv = csv_table(&["t", "ball_volume"], ts.iter().zip(&vols).map(|(t, v)| vec![t.to_string(), v.to_string()]));
            let value = json!({
                "paper_anchor": "rotationally-symmetric-model",
                "op": "volume",
                "model": spec,
                "k": k,
                "t": ts,
                "ball_volume": vols,
            });
            outcome("rotsym", value, vec![("rotsym.csv".into(), csv)], None)
        }
        RotsymOp::Mono => {
            let surface = model_surface(&spec, &profile, t_top * 1.01, ctx.rtol, k.max(2))?;
            let slice = a.slice.unwrap_or(SliceKind::RadialCone);
            let gamma = a.gamma.unwrap_or(1.0);
            let series = match slice {
                SliceKind::RadialCone => MassRatioSeries::radial_cone(&surface, gamma, k, &ts),
                SliceKind::TotallyGeodesic => MassRatioSeries::totally_geodesic(&surface, k, &ts),
            }
            .map_err(run_err)?;
            let mono = monotonicity_check(&series);
            let mut cone = Vec::new();
            if slice == SliceKind::RadialCone {
                let s2 = surface.clone();
                for &t in &ts {
                    let mass = |x: f64| crate::rotsym::cone_mass(&s2, gamma, k, x).unwrap_or(f64::NAN);
                    cone.push(cone_inequality_check(&surface, k, t, None, mass).map_err(run_err)?);
                }
            }
            let mut failure = (!mono.pass).then(|| format!("mass ratio drops by {:e} at t = {:?}", mono.max_violation, mono.worst_t));
            if failure.is_none() {
                if let Some(c) = cone.iter().find(|c| !c.holds) {
                    failure = Some(format!("cone inequality fails at t = {}, relative gap {:e}", c.t, c.relative_gap));
                }
            }
            let csv = csv_table(
                &["t", "mass", "ball_volume", "ratio"],
                (0..series.t_grid.len()).map(|i| {
                    vec![
                        series.t_grid[i].to_string(),
                        series.mass[i].to_string(),
                        series.ball_vol[i].to_string(),
                        series.ratio[i].to_string(),
                    ]
                }),
            );
            let value = json!({
                "paper_anchor": "mass-ratio-monotonicity",
                "op": "mono",
                "model": spec,
                "k": k,
                "slice": slice,
                "monotonicity": mono,
                "cone_inequality": cone,
                "pass": failure.is_none(),
            });
            outcome("rotsym", value, vec![("rotsym.csv".into(), csv)], failure)
        }
    }
}

fn cmd_angular(a: &AngularArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let a = AngularArgs { model: a.model.clone(), ..merged(a, ctx.cfg.section("angular"), "angular")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let cone = ConeSpec::new(a.l.unwrap_or(3.0), a.v0.unwrap_or(0.0), 1).map_err(cfg_err)?;
    let rays = a.rays.unwrap_or(3);
    let span = a.span.unwrap_or(5.0);
    let step = a.step.unwrap_or(1.0);
    let rho_max = a.rho_max.unwrap_or(40.0);
    if rays == 0 || !(span > 0.0 && step > 0.0 && step <= span) {
        return Err(CliError::Config("need rays >= 1 and 0 < step <= span".into()));
    }
    let deriv_tol = a.deriv_tol.unwrap_or(1e-8);
    // support balls reach about one unit past the sampled radii
    let surface = model_surface(&spec, &profile, rho_max + span + 4.0, ctx.rtol, 2)?;
    let moll = Mollifier::new(surface.clone(), profile.b.clone(), cone).map_err(cfg_err)?;
    let r1 = moll
        .r1(rho_max, 0.5)
        .map_err(run_err)?
        .ok_or_else(|| CliError::Run(format!("no R1 found below rho_max = {rho_max}")))?;

    let p1_point = GeoPoint::new(r1 + 0.5 * span, cone.v0 + 0.5 / cone.l).map_err(run_err)?;
    let p1 = moll.mollify_fn(p1_point, ctx.quad_tol, |_| 1.0).map_err(run_err)?;
    let p1_err = (p1.value - 1.0).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut outside = Vec::new();
    let mut outside_err: f64 = 0.0;
    let n_out = a.outside_samples.unwrap_or(50);
    while outside.len() < n_out {
        let r = rng.gen_range(r1..r1 + span);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let p = GeoPoint::new(r, th).map_err(run_err)?;
        if in_cone(&cone, 2.0, p) {
            continue;
        }
        let h = moll.mollify(p, ctx.quad_tol).map_err(run_err)?.value;
        outside_err = outside_err.max((h - 1.0).abs());
        outside.push(p);
    }

    let offsets: Vec<f64> = if rays == 1 {
        vec![0.25]
    } else {
        (0..rays).map(|i| 0.25 + 2.25 * i as f64 / (rays - 1) as f64).collect()
    };
    let n_rho = (span / step).round() as usize;
    let rhos: Vec<f64> = (0..=n_rho).map(|i| r1 + step * i as f64).collect();
    let lambda = a.lambda.unwrap_or(0.75);
    let decay = moll
        .decay_check(&surface, lambda, a.t0.unwrap_or(1.0), &offsets, &rhos, deriv_tol)
        .map_err(|e| match e {
            crate::angular::AngularError::InvalidArgument(m) => CliError::Config(m),
            e => run_err(e),
        })?;

    let tol_ok = |e: f64| e <= ctx.quad_tol;
    let mut failure = None;
    if !tol_ok(p1_err) {
        failure = Some(format!("P(1) misses 1 by {p1_err:e}"));
    } else if !tol_ok(outside_err) {
        failure = Some(format!("h misses 1 outside the double cone by {outside_err:e}"));
    } else if !decay.pass {
        failure = Some(format!("decay slopes {:.4} (gradient), {:.4} (Hessian)", decay.grad_slope, decay.hess_slope));
    }
    let csv = csv_table(
        &["r", "theta", "h", "grad_bound_ratio", "hess_bound_ratio"],
        decay.field.samples.iter().map(|s| {
            vec![
                s.point.r.to_string(),
                s.point.theta.to_string(),
                s.h.to_string(),
                s.grad_bound_ratio.to_string(),
                s.hess_bound_ratio.to_string(),
            ]
        }),
    );
    let value = json!({
        "paper_anchor": "angular-extension-decay",
        "model": spec,
        "cone": cone,
        "r1": r1,
        "quad_tol": ctx.quad_tol,
        "normalization": {"point": p1_point, "value": p1.value, "error": p1_err},
        "outside_double_cone": {"samples": outside.len(), "max_error": outside_err},
        "decay": {
            "lambda": decay.lambda,
            "t0": decay.t0,
            "deriv_tol": deriv_tol,
            "offsets": offsets,
            "radii": rhos,
            "c4_grad": decay.c4_grad,
            "c4_hess": decay.c4_hess,
            "grad_slope": decay.grad_slope,
            "hess_slope": decay.hess_slope,
            "pass": decay.pass,
        },
        "pass": failure.is_none(),
    });
    outcome("angular", value, vec![("field.csv".into(), csv)], failure)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataFile {
    fourier: Vec<FourierMode>,
    #[serde(default)]
    #[allow(dead_code)]
    sup_norm: Option<f64>,
}

fn cmd_dirichlet(a: &DirichletArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let section = ctx.cfg.section("dirichlet");
    let flag_data = a.data.clone();
    let a = DirichletArgs { model: a.model.clone(), ..merged(a, section, "dirichlet")? };
    let (spec, profile) = load_profile(&a.model, ctx.cfg)?;
    let modes = match (&flag_data, &a.data, &a.fourier) {
        (Some(p), _, _) => read_data_file(p)?,
        (None, Some(p), _) => read_data_file(&ctx.cfg.resolve(p))?,
        (None, None, Some(m)) => m.clone(),
        _ => return Err(CliError::Config("no boundary data (use --data or \"fourier\")".into())),
    };
    let data = BoundaryData::new(modes).map_err(cfg_err)?;
    let radii = a.radii.unwrap_or_else(|| vec![5.0, 10.0, 20.0]);
    let big = *radii.last().ok_or_else(|| CliError::Config("radii is empty".into()))?;
    let surface = model_surface(&spec, &profile, big, ctx.rtol, 2)?;
    let sol = exhaust(&surface, &data, &radii, ctx.rtol).map_err(|e| match e {
        crate::dirichlet::DirichletError::InvalidArgument(m) => CliError::Config(m),
        e => run_err(e),
    })?;
    let (nr, nt) = (a.nr.unwrap_or(20), a.nt.unwrap_or(32));
    if nr == 0 || nt == 0 {
        return Err(CliError::Config("nr and nt must be positive".into()));
    }
    let sup_u = sol.sample_sup(nr.max(2), nt).map_err(run_err)?;
    let bound = data.sup_norm * (1.0 + 1e-6);
    let max_principle = sup_u <= bound;
    let mut failure = (!max_principle).then(|| format!("sup |u| = {sup_u:e} exceeds sup |data| = {:e}", data.sup_norm));

    let j = radii.len() - 1;
    let fd = if a.fd.unwrap_or(false) {
        let fd = fd_laplace(&surface, &data, big, a.fd_nr.unwrap_or(200), a.fd_nt.unwrap_or(128), 1e-12).map_err(run_err)?;
        let err = fd_discrepancy(&sol, j, &fd).map_err(run_err)?;
        if err > 1e-3 && failure.is_none() {
            failure = Some(format!("finite-volume discrepancy {err:e}"));
        }
        Some(json!({"nr": fd.nr, "nt": fd.nt, "iterations": fd.iterations, "max_abs_diff": err}))
    } else {
        None
    };

    let mut rows = Vec::with_capacity(nr * nt);
    for i in 1..=nr {
        let r = big * i as f64 / nr as f64;
        for kk in 0..nt {
            let th = std::f64::consts::TAU * kk as f64 / nt as f64;
            let u = sol.eval_on(j, r, th).map_err(run_err)?;
            rows.push(vec![r.to_string(), th.to_string(), u.to_string()]);
        }
    }
    let value = json!({
        "paper_anchor": "asymptotic-dirichlet-problem",
        "model": spec,
        "radii": radii,
        "data": data,
        "modes": sol.modes,
        "sup_norm_check": {
            "sup_u": sup_u,
            "sup_data": data.sup_norm,
            "coefficient_bound": data.coefficient_bound(),
            "pass": max_principle,
        },
        "fd_check": fd,
        "pass": failure.is_none(),
    });
    outcome("dirichlet", value, vec![("dirichlet.csv".into(), csv_table(&["r", "theta", "u"], rows))], failure)
}

fn read_data_file(p: &Path) -> Result<Vec<FourierMode>, CliError> {
    let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    let f: DataFile = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    Ok(f.fourier)
}

/// Run a parsed command line without touching the file system beyond reading inputs.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let command = match (&cli.command, &cfg.command) {
        (Some(c), _) => c.clone(),
        (None, Some(name)) => Command::from_name(name).ok_or_else(|| CliError::Config(format!("unknown command {name:?}")))?,
        (None, None) => return Err(CliError::Config("no subcommand given and the config names none".into())),
    };
    let ctx = Ctx {
        cfg: &cfg,
        rtol: cli.rtol.or(cfg.rtol).unwrap_or(DEFAULT_RTOL),
        quad_tol: cli.quad_tol.or(cfg.quad_tol).unwrap_or(DEFAULT_QUAD_TOL),
        seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
    };
    if !(ctx.rtol > 0.0 && ctx.rtol < 1.0) || !(ctx.quad_tol > 0.0 && ctx.quad_tol < 1.0) {
        return Err(CliError::Config("rtol and quad_tol must lie in (0, 1)".into()));
    }
    match &command {
        Command::Models(a) => cmd_models(a, &ctx),
        Command::Jacobi(a) => cmd_jacobi(a, &ctx),
        Command::ScCheck(a) => cmd_sc_check(a, &ctx),
        Command::Certify(a) => cmd_certify(a, &ctx),
        Command::Construct(a) => cmd_construct(a, &ctx),
        Command::Rotsym(a) => cmd_rotsym(a, &ctx),
        Command::Angular(a) => cmd_angular(a, &ctx),
        Command::Dirichlet(a) => cmd_dirichlet(a, &ctx),
    }
}

/// Output directory: the flag, else the config entry (relative to the config file).
fn out_dir(cli: &Cli) -> Result<Option<PathBuf>, CliError> {
    if cli.out.is_some() {
        return Ok(cli.out.clone());
    }
    match &cli.config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            Ok(cfg.out.as_ref().map(|o| cfg.resolve(o)))
        }
        None => Ok(None),
    }
}

pub fn write_outcome(o: &Outcome, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{}.json", o.command)), &o.json)?;
    for (name, body) in &o.csv {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Parse `args`, run, write outputs and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = execute(&cli).and_then(|o| {
        if let Some(dir) = out_dir(&cli)? {
            write_outcome(&o, &dir)?;
        }
        Ok(o)
    });
    match result {
        Ok(o) => {
            print!("{}", o.json);
            if let Some(f) = &o.failure {
                let mut msg = String::new();
                let _ = write!(msg, "check failed ({}): {f}", o.command);
                eprintln!("{msg}");
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> Result<Outcome, CliError> {
        let cli = Cli::try_parse_from(std::iter::once("hadamard").chain(args.iter().copied())).unwrap();
        execute(&cli)
    }

    #[test]
    fn jacobi_constant_matches_sinh() {
        let o = exec(&["jacobi", "--model", "constant", "--k", "1"]).unwrap();
        assert!(o.pass);
        let csv = &o.csv[0].1;
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,log_f,u"));
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            if v[0] >= 0.1 {
                assert!((v[1] - v[0].sinh().ln()).abs() < 1e-8, "{line}");
                assert!((v[2] * v[0].tanh() - 1.0).abs() < 1e-8, "{line}");
            }
        }
    }

    #[test]
    fn missing_model_is_config_error() {
        let e = exec(&["jacobi"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = exec(&["jacobi", "--model", "no-such-model"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn flags_override_config_section() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"command":"jacobi","model":{"model":"constant","params":{"k":2}},"jacobi":{"t_max":5}}"#).unwrap();
        let cli = Cli::try_parse_from(["hadamard", "--config", p.to_str().unwrap()]).unwrap();
        let o = execute(&cli).unwrap();
        let v: Value = serde_json::from_str(&o.json).unwrap();
        assert_eq!(v["t_max"], 5.0);
        let cli = Cli::try_parse_from(["hadamard", "--config", p.to_str().unwrap(), "jacobi", "--t-max", "3"]).unwrap();
        let v: Value = serde_json::from_str(&execute(&cli).unwrap().json).unwrap();
        assert_eq!(v["t_max"], 3.0);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"command":"jacobi","model":{"model":"constant","params":{"k":1}},"jacobi":{"tmax":5}}"#).unwrap();
        let cli = Cli::try_parse_from(["hadamard", "--config", p.to_str().unwrap()]).unwrap();
        assert_eq!(execute(&cli).unwrap_err().exit_code(), 2);
    }
}
