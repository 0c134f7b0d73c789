//! Run configuration: a TOML file with `[problem]`, `[solver]` and one
//! `[experiment.<name>]` section.

use std::path::Path;

use dynbc::linear::Scheme;
use dynbc::presets::{self, Geometry, Preset};
use dynbc::quasilinear::{PicardConfig, ProblemSpec};
use dynbc::{parse, Var};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::CliError;

pub const EXPERIMENTS: [&str; 7] = [
    "validate",
    "solve",
    "mms-converge",
    "scaling",
    "contraction",
    "uniqueness",
    "compat-necessity",
];

type Text = Spanned<String>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `interval` or `strip`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_y: Option<usize>,
    #[serde(alias = "a_2", alias = "a2", skip_serializing_if = "Option::is_none")]
    pub a_xx: Option<Text>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_xy: Option<Text>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_yy: Option<Text>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<Text>,
    #[serde(alias = "b_1", alias = "b1", skip_serializing_if = "Option::is_none")]
    pub b_x: Option<Text>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_y: Option<Text>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Text>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<Text>,
    #[serde(rename = "T", alias = "horizon", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    /// Picard window length; defaults to the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(rename = "R", alias = "radius", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(alias = "tol", skip_serializing_if = "Option::is_none")]
    pub tol_fp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compat_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateParams {
    /// Lattice points per state variable in the structure check.
    pub points: usize,
    pub time_levels: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        ValidateParams {
            points: 5,
            time_levels: 5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    /// Skip the norm report (it scans all time pairs).
    pub skip_norms: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_spatial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_temporal: Option<String>,
    pub levels: usize,
    /// Time step of the spatial study; defaults to the solver step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_dt: Option<f64>,
    /// Node counts for the temporal study (`[n]` or `[n_x, n_y]`); defaults
    /// to the problem grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_nodes: Option<Vec<usize>>,
    pub min_spatial_order: f64,
    pub temporal_order: [f64; 2],
}

impl Default for MmsParams {
    fn default() -> Self {
        MmsParams {
            exact_spatial: None,
            exact_temporal: None,
            levels: 4,
            spatial_dt: None,
            temporal_nodes: None,
            min_spatial_order: 1.8,
            temporal_order: [0.85, 1.15],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    pub horizons: Vec<f64>,
    pub thetas: Vec<f64>,
    pub n_steps: usize,
    /// Allowed distance between fitted slope and predicted exponent.
    pub slope_tol: f64,
    /// Also fit the `C^{beta/2}(C^1)` norm.
    pub c1: bool,
    pub c1_window: [f64; 2],
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            horizons: vec![0.02, 0.04, 0.08, 0.16],
            thetas: vec![0.0],
            n_steps: 40,
            slope_tol: 0.15,
            c1: true,
            c1_window: [0.35, 0.7],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionParams {
    pub taus: Vec<f64>,
    /// Manufactured solution whose forcing is added before iterating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    /// Bounds on `r(tau_i) / r(tau_{i+1})`.
    pub ratio_window: [f64; 2],
    pub max_iterations: usize,
}

impl Default for ContractionParams {
    fn default() -> Self {
        ContractionParams {
            taus: vec![0.04, 0.01],
            exact: None,
            ratio_window: [1.5, 2.7],
            max_iterations: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessParams {
    /// Offset shape in `t`, `x`, `y`; its value at `t = 0` is removed.
    pub shape: String,
    /// Offsets as signed fractions of the ball radius.
    pub fractions: Vec<f64>,
    /// Extra offsets with random shapes drawn from the run seed.
    pub random: usize,
    /// Pass when the spread is at most `tol_factor * tol_fp`.
    pub tol_factor: f64,
}

impl Default for UniquenessParams {
    fn default() -> Self {
        UniquenessParams {
            shape: "t*cos(3*x)".into(),
            fractions: vec![0.5, -0.5],
            random: 0,
            tol_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompatParams {
    pub steps: Vec<usize>,
    pub min_growth: f64,
    pub max_variation: f64,
}

impl Default for CompatParams {
    fn default() -> Self {
        CompatParams {
            steps: vec![4, 16, 64],
            min_growth: 2.0,
            max_variation: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveParams>,
    #[serde(rename = "mms-converge", skip_serializing_if = "Option::is_none")]
    pub mms_converge: Option<MmsParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessParams>,
    #[serde(rename = "compat-necessity", skip_serializing_if = "Option::is_none")]
    pub compat_necessity: Option<CompatParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Validate(ValidateParams),
    Solve(SolveParams),
    MmsConverge(MmsParams),
    Scaling(ScalingParams),
    Contraction(ContractionParams),
    Uniqueness(UniquenessParams),
    CompatNecessity(CompatParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Validate(_) => "validate",
            Experiment::Solve(_) => "solve",
            Experiment::MmsConverge(_) => "mms-converge",
            Experiment::Scaling(_) => "scaling",
            Experiment::Contraction(_) => "contraction",
            Experiment::Uniqueness(_) => "uniqueness",
            Experiment::CompatNecessity(_) => "compat-necessity",
        }
    }

    pub fn default_for(name: &str) -> Option<Experiment> {
        Some(match name {
            "validate" => Experiment::Validate(Default::default()),
            "solve" => Experiment::Solve(Default::default()),
            "mms-converge" => Experiment::MmsConverge(Default::default()),
            "scaling" => Experiment::Scaling(Default::default()),
            "contraction" => Experiment::Contraction(Default::default()),
            "uniqueness" => Experiment::Uniqueness(Default::default()),
            "compat-necessity" => Experiment::CompatNecessity(Default::default()),
            _ => return None,
        })
    }
}

impl ExperimentSection {
    fn selected(&self) -> Vec<Experiment> {
        let mut out = Vec::new();
        if let Some(p) = &self.validate {
            out.push(Experiment::Validate(p.clone()));
        }
        if let Some(p) = &self.solve {
            out.push(Experiment::Solve(p.clone()));
        }
        if let Some(p) = &self.mms_converge {
            out.push(Experiment::MmsConverge(p.clone()));
        }
        if let Some(p) = &self.scaling {
            out.push(Experiment::Scaling(p.clone()));
        }
        if let Some(p) = &self.contraction {
            out.push(Experiment::Contraction(p.clone()));
        }
        if let Some(p) = &self.uniqueness {
            out.push(Experiment::Uniqueness(p.clone()));
        }
        if let Some(p) = &self.compat_necessity {
            out.push(Experiment::CompatNecessity(p.clone()));
        }
        out
    }

    fn from_experiment(e: &Experiment) -> Self {
        let mut s = ExperimentSection::default();
        match e.clone() {
            Experiment::Validate(p) => s.validate = Some(p),
            Experiment::Solve(p) => s.solve = Some(p),
            Experiment::MmsConverge(p) => s.mms_converge = Some(p),
            Experiment::Scaling(p) => s.scaling = Some(p),
            Experiment::Contraction(p) => s.contraction = Some(p),
            Experiment::Uniqueness(p) => s.uniqueness = Some(p),
            Experiment::CompatNecessity(p) => s.compat_necessity = Some(p),
        }
        s
    }
}

/// The file as written, before defaults are applied.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

/// Fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ResolvedProblem,
    pub solver: ResolvedSolver,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedProblem {
    pub preset: Option<String>,
    pub geometry: Geometry,
    pub a_xx: String,
    pub a_xy: Option<String>,
    pub a_yy: Option<String>,
    pub f: String,
    pub b_x: String,
    pub b_y: Option<String>,
    pub h: String,
    pub u0: String,
    pub horizon: f64,
    pub beta: f64,
    pub exact_spatial: Option<String>,
    pub exact_temporal: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSolver {
    pub scheme: Scheme,
    pub dt: f64,
    pub window: f64,
    pub radius: Option<f64>,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub rho_max: f64,
    pub shrink: f64,
    pub compat_tol: Option<f64>,
}

const DEFAULT_STEPS: usize = 100;

impl ResolvedProblem {
    pub fn spec(&self) -> dynbc::Result<ProblemSpec> {
        self.as_preset().spec()
    }

    fn as_preset(&self) -> Preset {
        Preset {
            name: self.preset.clone().unwrap_or_default(),
            geometry: self.geometry,
            a_xx: self.a_xx.clone(),
            a_xy: self.a_xy.clone(),
            a_yy: self.a_yy.clone(),
            f: self.f.clone(),
            b_x: self.b_x.clone(),
            b_y: self.b_y.clone(),
            h: self.h.clone(),
            u0: self.u0.clone(),
            horizon: self.horizon,
            beta: self.beta,
            exact_spatial: self.exact_spatial.clone(),
            exact_temporal: self.exact_temporal.clone(),
        }
    }
}

impl ResolvedSolver {
    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            radius: self.radius,
            window: self.window,
            dt: self.dt,
            scheme: self.scheme,
            tol_fp: self.tol_fp,
            max_iterations: self.max_iter,
            rho_max: self.rho_max,
            shrink: self.shrink,
            compat_tol: self.compat_tol,
        }
    }
}

/// Maps a byte offset to a 1-based line number.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, message: impl Into<String>) -> CliError {
        CliError::Config(format!("{}: {}", self.origin, message.into()))
    }

    fn err_at(&self, text: &Text, message: impl Into<String>) -> CliError {
        CliError::Config(format!(
            "{}:{}: {}",
            self.origin,
            line_of(self.src, text.span().start),
            message.into()
        ))
    }
}

impl RawConfig {
    pub fn from_toml_str(src: &str) -> Result<RawConfig, toml::de::Error> {
        toml::from_str(src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let src =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse_config(&src, &path.display().to_string())
}

/// Parses and validates configuration text; `origin` labels error messages.
pub fn parse_config(src: &str, origin: &str) -> Result<RunConfig, CliError> {
    let raw = RawConfig::from_toml_str(src).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    resolve(&raw, src, origin)
}

fn resolve(raw: &RawConfig, src: &str, origin: &str) -> Result<RunConfig, CliError> {
    let ctx = Ctx { src, origin };
    let problem = resolve_problem(&raw.problem, &ctx)?;
    let solver = resolve_solver(&raw.solver, problem.horizon, &ctx)?;
    let selected = raw.experiment.as_ref().map(|e| e.selected()).unwrap_or_default();
    let experiment = match selected.len() {
        1 => selected.into_iter().next().unwrap(),
        0 => return Err(ctx.err("missing [experiment.<name>] section")),
        _ => {
            let names: Vec<&str> = selected.iter().map(|e| e.name()).collect();
            return Err(ctx.err(format!("conflicting experiment sections: {}", names.join(", "))));
        }
    };
    Ok(RunConfig {
        problem,
        solver,
        experiment,
    })
}

fn check_expr(ctx: &Ctx, key: &str, text: &Text, boundary: bool) -> Result<String, CliError> {
    let e = parse(text.get_ref()).map_err(|e| ctx.err_at(text, format!("{key}: {e}")))?;
    if boundary && (e.uses(Var::P1) || e.uses(Var::P2)) {
        return Err(ctx.err_at(
            text,
            format!("{key}: boundary coefficients may not use gradient variables (p1, p2)"),
        ));
    }
    Ok(text.get_ref().clone())
}

fn resolve_problem(p: &ProblemConfig, ctx: &Ctx) -> Result<ResolvedProblem, CliError> {
    let base = match &p.preset {
        Some(name) => Some(presets::by_name(name).ok_or_else(|| {
            ctx.err(format!(
                "unknown preset `{name}` (known: {})",
                presets::NAMES.join(", ")
            ))
        })?),
        None => None,
    };

    let kind = p
        .geometry
        .clone()
        .unwrap_or_else(|| match base.as_ref().map(|b| b.geometry) {
            Some(Geometry::Strip { .. }) => "strip".into(),
            _ => "interval".into(),
        });
    let geometry = match kind.as_str() {
        "interval" => {
            let (lo, hi, n) = match base.as_ref().map(|b| b.geometry) {
                Some(Geometry::Interval { x_lo, x_hi, n }) => (x_lo, x_hi, n),
                _ => (0.0, 1.0, 65),
            };
            if p.period.is_some() || p.height.is_some() || p.n_x.is_some() || p.n_y.is_some() {
                return Err(ctx.err("strip sizes given for an interval geometry"));
            }
            Geometry::Interval {
                x_lo: p.x_lo.unwrap_or(lo),
                x_hi: p.x_hi.unwrap_or(hi),
                n: p.n.unwrap_or(n),
            }
        }
        "strip" => {
            let (per, hgt, nx, ny) = match base.as_ref().map(|b| b.geometry) {
                Some(Geometry::Strip {
                    period,
                    height,
                    n_x,
                    n_y,
                }) => (period, height, n_x, n_y),
                _ => (1.0, 1.0, 16, 17),
            };
            if p.x_lo.is_some() || p.x_hi.is_some() || p.n.is_some() {
                return Err(ctx.err("interval sizes given for a strip geometry"));
            }
            Geometry::Strip {
                period: p.period.unwrap_or(per),
                height: p.height.unwrap_or(hgt),
                n_x: p.n_x.unwrap_or(nx),
                n_y: p.n_y.unwrap_or(ny),
            }
        }
        other => return Err(ctx.err(format!("unknown geometry `{other}` (interval or strip)"))),
    };
    geometry.grid().map_err(|e| ctx.err(format!("geometry: {e}")))?;
    let strip = matches!(geometry, Geometry::Strip { .. });

    let pick =
        |key: &str, given: &Option<Text>, preset: Option<String>, default: Option<&str>, boundary: bool| match given {
            Some(t) => check_expr(ctx, key, t, boundary).map(Some),
            None => Ok(preset.or_else(|| default.map(str::to_string))),
        };
    let required = |key: &str, v: Option<String>| v.ok_or_else(|| ctx.err(format!("missing key `{key}` in [problem]")));

    let b = base.as_ref();
    let a_xx = required("a_xx", pick("a_xx", &p.a_xx, b.map(|b| b.a_xx.clone()), None, false)?)?;
    let b_x = required("b_x", pick("b_x", &p.b_x, b.map(|b| b.b_x.clone()), None, true)?)?;
    let f = required("f", pick("f", &p.f, b.map(|b| b.f.clone()), Some("0"), false)?)?;
    let h = required("h", pick("h", &p.h, b.map(|b| b.h.clone()), Some("0"), true)?)?;
    let u0 = required("u0", pick("u0", &p.u0, b.map(|b| b.u0.clone()), Some("0"), false)?)?;
    let a_xy = pick("a_xy", &p.a_xy, b.and_then(|b| b.a_xy.clone()), None, false)?;
    let a_yy = pick("a_yy", &p.a_yy, b.and_then(|b| b.a_yy.clone()), None, false)?;
    let b_y = pick("b_y", &p.b_y, b.and_then(|b| b.b_y.clone()), None, true)?;
    let (a_xy, a_yy, b_y) = if strip {
        (
            Some(a_xy.unwrap_or_else(|| "0".into())),
            Some(required("a_yy", a_yy)?),
            Some(required("b_y", b_y)?),
        )
    } else {
        for (key, v) in [("a_xy", &p.a_xy), ("a_yy", &p.a_yy), ("b_y", &p.b_y)] {
            if let Some(t) = v {
                return Err(ctx.err_at(t, format!("{key} is only meaningful on a strip")));
            }
        }
        (None, None, None)
    };

    // changing any coefficient invalidates the preset's manufactured solutions
    let keep_exact = b.is_some_and(|b| {
        std::mem::discriminant(&b.geometry) == std::mem::discriminant(&geometry)
            && b.a_xx == a_xx
            && b.a_xy.as_deref().unwrap_or("0") == a_xy.as_deref().unwrap_or("0")
            && b.a_yy == a_yy
            && b.f == f
            && b.b_x == b_x
            && b.b_y == b_y
            && b.h == h
    });
    let resolved = ResolvedProblem {
        preset: p.preset.clone(),
        geometry,
        a_xx,
        a_xy,
        a_yy,
        f,
        b_x,
        b_y,
        h,
        u0,
        horizon: p.horizon.or(b.map(|b| b.horizon)).unwrap_or(0.1),
        beta: p.beta.or(b.map(|b| b.beta)).unwrap_or(0.5),
        exact_spatial: b.filter(|_| keep_exact).and_then(|b| b.exact_spatial.clone()),
        exact_temporal: b.filter(|_| keep_exact).and_then(|b| b.exact_temporal.clone()),
    };
    if !(resolved.horizon > 0.0 && resolved.horizon.is_finite()) {
        return Err(ctx.err("T must be positive"));
    }
    resolved.spec().map_err(|e| ctx.err(format!("problem: {e}")))?;
    Ok(resolved)
}

fn resolve_solver(s: &SolverConfig, horizon: f64, ctx: &Ctx) -> Result<ResolvedSolver, CliError> {
    let dt = match (s.dt, s.n_steps) {
        (Some(_), Some(_)) => return Err(ctx.err("conflicting keys: give either dt or n_steps in [solver]")),
        (Some(dt), None) => dt,
        (None, Some(0)) => return Err(ctx.err("n_steps must be positive")),
        (None, Some(n)) => horizon / n as f64,
        (None, None) => horizon / DEFAULT_STEPS as f64,
    };
    let d = PicardConfig::default();
    let r = ResolvedSolver {
        scheme: s.scheme.unwrap_or(d.scheme),
        dt,
        window: s.window.unwrap_or(horizon),
        radius: s.radius,
        tol_fp: s.tol_fp.unwrap_or(d.tol_fp),
        max_iter: s.max_iter.unwrap_or(d.max_iterations),
        rho_max: s.rho_max.unwrap_or(d.rho_max),
        shrink: s.shrink.unwrap_or(d.shrink),
        compat_tol: s.compat_tol,
    };
    r.picard().validate().map_err(|e| ctx.err(format!("solver: {e}")))?;
    Ok(r)
}

impl RunConfig {
    /// Picks the experiment for a subcommand: the config's own section if it
    /// names the same experiment, an error if it names another.
    pub fn for_subcommand(raw_src: &str, origin: &str, name: &str) -> Result<RunConfig, CliError> {
        let mut raw = RawConfig::from_toml_str(raw_src).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        let default =
            Experiment::default_for(name).ok_or_else(|| CliError::Config(format!("unknown experiment `{name}`")))?;
        let present = raw.experiment.as_ref().map(|e| e.selected()).unwrap_or_default();
        match present.as_slice() {
            [] => raw.experiment = Some(ExperimentSection::from_experiment(&default)),
            [one] if one.name() == name => {}
            _ => {
                let names: Vec<&str> = present.iter().map(|e| e.name()).collect();
                return Err(CliError::Config(format!(
                    "{origin}: subcommand `{name}` conflicts with experiment section(s) {}",
                    names.join(", ")
                )));
            }
        }
        resolve(&raw, raw_src, origin)
    }

    /// The resolved configuration in file form, every default spelled out.
    pub fn to_raw(&self) -> RawConfig {
        let p = &self.problem;
        let text = |v: &str| Some(Spanned::new(0..0, v.to_string()));
        let opt = |v: &Option<String>| v.as_deref().and_then(text);
        let mut problem = ProblemConfig {
            preset: p.preset.clone(),
            a_xx: text(&p.a_xx),
            a_xy: opt(&p.a_xy),
            a_yy: opt(&p.a_yy),
            f: text(&p.f),
            b_x: text(&p.b_x),
            b_y: opt(&p.b_y),
            h: text(&p.h),
            u0: text(&p.u0),
            horizon: Some(p.horizon),
            beta: Some(p.beta),
            ..Default::default()
        };
        match p.geometry {
            Geometry::Interval { x_lo, x_hi, n } => {
                problem.geometry = Some("interval".into());
                problem.x_lo = Some(x_lo);
                problem.x_hi = Some(x_hi);
                problem.n = Some(n);
            }
            Geometry::Strip {
                period,
                height,
                n_x,
                n_y,
            } => {
                problem.geometry = Some("strip".into());
                problem.period = Some(period);
                problem.height = Some(height);
                problem.n_x = Some(n_x);
                problem.n_y = Some(n_y);
            }
        }
        let s = &self.solver;
        RawConfig {
            problem,
            solver: SolverConfig {
                scheme: Some(s.scheme),
                dt: Some(s.dt),
                n_steps: None,
                window: Some(s.window),
                radius: s.radius,
                tol_fp: Some(s.tol_fp),
                max_iter: Some(s.max_iter),
                rho_max: Some(s.rho_max),
                shrink: Some(s.shrink),
                compat_tol: s.compat_tol,
            },
            experiment: Some(ExperimentSection::from_experiment(&self.experiment)),
        }
    }

    /// Canonical text of the resolved configuration; hashed into reports.
    pub fn to_toml_string(&self) -> String {
        self.to_raw().to_toml_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_numbers_are_one_based() {
        assert_eq!(line_of("a\nb\nc", 0), 1);
        assert_eq!(line_of("a\nb\nc", 2), 2);
        assert_eq!(line_of("a\nb\nc", 4), 3);
    }

    #[test]
    fn preset_overrides_drop_exact_solutions() {
        let c = parse_config("[problem]\npreset = \"heat-dynbc\"\nn = 33\n[experiment.solve]\n", "t").unwrap();
        assert!(c.problem.exact_spatial.is_some());
        let c = parse_config(
            "[problem]\npreset = \"heat-dynbc\"\nf = \"1\"\n[experiment.solve]\n",
            "t",
        )
        .unwrap();
        assert!(c.problem.exact_spatial.is_none());
    }

    #[test]
    fn strip_needs_its_second_direction() {
        let e = parse_config(
            "[problem]\ngeometry = \"strip\"\na_xx = \"1\"\nb_x = \"0\"\n[experiment.solve]\n",
            "t",
        )
        .unwrap_err();
        assert!(e.to_string().contains("a_yy"), "{e}");
    }

    #[test]
    fn dt_and_n_steps_conflict() {
        let e = parse_config(
            "[problem]\npreset = \"heat-dynbc\"\n[solver]\ndt = 0.1\nn_steps = 3\n[experiment.solve]\n",
            "t",
        )
        .unwrap_err();
        assert!(e.to_string().contains("conflicting"), "{e}");
    }
}
