//! Quasilinear problems
//!
//! ```text
//! D_t u = sum a_ij(t, x, u, grad u) D_ij u + f(t, x, u, grad u)   inside,
//! D_t u + sum b_j(t, x', u) D_j u = h(t, x', u)                   on the boundary,
//! ```
//!
//! solved by frozen-coefficient Picard iteration: each iterate solves the
//! linear problem whose coefficients are evaluated at the previous iterate.
//! The window length is shrunk until the iteration stays in the ball around
//! the first iterate and contracts, and longer horizons are covered by
//! restarting from the last window's final state.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Var};
use crate::field::SpaceTimeField;
use crate::geometry::{Axis, DirectionPair, Grid, TimeGrid};
use crate::holder::{self, ValueNorm};
use crate::linear::{
    self, compat_tol, solve_linear, BoundaryResidual, Coef, DiscreteSolution, LinearCoefficients, LinearProblem, Scheme,
};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum {
    /// Expression in `x` (and `y`).
    Expr(Expr),
    Field(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub a_xx: Expr,
    /// Off-diagonal entry; the operator carries `2 a_xy D_xy`. Strip only.
    pub a_xy: Option<Expr>,
    pub a_yy: Option<Expr>,
    pub f: Expr,
    pub b_x: Expr,
    pub b_y: Option<Expr>,
    pub h: Expr,
    pub u0: InitialDatum,
    pub horizon: f64,
    pub beta: f64,
}

const STATE_VARS: [Var; 3] = [Var::U, Var::P1, Var::P2];

impl ProblemSpec {
    /// Interior expressions `(name, expr)`: top-order coefficients, then `f`.
    pub fn interior_exprs(&self) -> Vec<(&'static str, &Expr)> {
        let mut out = vec![("a_xx", &self.a_xx)];
        if let Some(e) = &self.a_xy {
            out.push(("a_xy", e));
        }
        if let Some(e) = &self.a_yy {
            out.push(("a_yy", e));
        }
        out.push(("f", &self.f));
        out
    }

    pub fn boundary_exprs(&self) -> Vec<(&'static str, &Expr)> {
        let mut out = vec![("b_x", &self.b_x)];
        if let Some(e) = &self.b_y {
            out.push(("b_y", e));
        }
        out.push(("h", &self.h));
        out
    }

    pub fn validate(&self) -> Result<()> {
        holder::HolderExponent::new(self.beta)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let two_d = self.grid.dim() == 2;
        if !two_d && (self.a_xy.is_some() || self.a_yy.is_some() || self.b_y.is_some()) {
            return Err(Error::InvalidArgument(
                "a_xy, a_yy and b_y are only meaningful on the strip".into(),
            ));
        }
        if two_d && self.a_yy.is_none() {
            return Err(Error::InvalidArgument("the strip needs a_yy".into()));
        }
        for (name, e) in self.interior_exprs().into_iter().chain(self.boundary_exprs()) {
            if !two_d && (e.uses(Var::Y) || e.uses(Var::P2)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = `{e}` uses y or p2 on a 1-D grid"
                )));
            }
        }
        for (name, e) in self.boundary_exprs() {
            if e.uses(Var::P1) || e.uses(Var::P2) {
                return Err(Error::InvalidArgument(format!(
                    "boundary coefficient {name} = `{e}` may not use gradient variables"
                )));
            }
        }
        if let InitialDatum::Expr(e) = &self.u0 {
            for v in STATE_VARS.iter().chain([&Var::T]) {
                if e.uses(*v) {
                    return Err(Error::InvalidArgument(format!("initial datum `{e}` may not use {v}")));
                }
            }
        }
        self.initial_field().map(|_| ())
    }

    pub fn initial_field(&self) -> Result<Vec<f64>> {
        match &self.u0 {
            InitialDatum::Field(v) => {
                self.grid.check_len(v)?;
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument("initial datum is not finite".into()));
                }
                Ok(v.clone())
            }
            InitialDatum::Expr(e) => (0..self.grid.n_nodes())
                .map(|k| {
                    let pos = self.grid.position(k);
                    e.eval(&EvalContext::at(0.0, pos))
                        .map_err(|err| Error::eval(format!("initial datum `{e}` at {pos:?}"), err))
                })
                .collect(),
        }
    }

    /// True when no coefficient depends on `u`, `p1` or `p2`.
    pub fn is_u_independent(&self) -> bool {
        self.interior_exprs()
            .into_iter()
            .chain(self.boundary_exprs())
            .all(|(_, e)| STATE_VARS.iter().all(|v| !e.uses(*v)))
    }
}

fn state_ctx(t: f64, pos: [f64; 2], u: f64, p: [f64; 2]) -> EvalContext {
    let mut c = EvalContext::at(t, pos);
    c.set(Var::U, u);
    c.set(Var::P1, p[0]);
    c.set(Var::P2, p[1]);
    c
}

fn eval_state(e: &Expr, name: &str, t: f64, pos: [f64; 2], u: f64, p: [f64; 2]) -> Result<f64> {
    e.eval(&state_ctx(t, pos, u, p))
        .map_err(|err| Error::eval(format!("{name} = `{e}` at t={t}, x={pos:?}, u={u}, p={p:?}"), err))
}

/// `e(t, x, U, grad U)` on every level and node (or only on boundary nodes,
/// zero elsewhere).
fn nemytskii_table(
    e: &Expr,
    name: &str,
    field: &SpaceTimeField,
    grads: &[Vec<[f64; 2]>],
    boundary_only: bool,
) -> Result<Vec<f64>> {
    let grid = *field.grid();
    let time = *field.time();
    let nodes: Vec<usize> = if boundary_only {
        grid.boundary_nodes().iter().map(|b| b.index).collect()
    } else {
        (0..grid.n_nodes()).collect()
    };
    let levels: Result<Vec<Vec<f64>>> = (0..field.n_levels())
        .into_par_iter()
        .map(|n| {
            let t = time.time(n);
            let u = field.level(n);
            let mut out = vec![0.0; grid.n_nodes()];
            for &k in &nodes {
                out[k] = eval_state(e, name, t, grid.position(k), u[k], grads[n][k])?;
            }
            Ok(out)
        })
        .collect();
    Ok(levels?.concat())
}

fn level_gradients(field: &SpaceTimeField) -> Result<Vec<Vec<[f64; 2]>>> {
    let grid = *field.grid();
    field.levels().map(|l| grid.gradient(l)).collect()
}

fn freeze_one(
    e: &Expr,
    name: &str,
    field: &SpaceTimeField,
    grads: &[Vec<[f64; 2]>],
    boundary_only: bool,
) -> Result<Coef> {
    if STATE_VARS.iter().all(|v| !e.uses(*v)) {
        return Ok(Coef::expr(e.clone()));
    }
    Ok(Coef::Table(Arc::new(nemytskii_table(
        e,
        name,
        field,
        grads,
        boundary_only,
    )?)))
}

pub(crate) fn freeze_with_initial(spec: &ProblemSpec, field: &SpaceTimeField, u_init: &[f64]) -> Result<LinearProblem> {
    if field.grid() != &spec.grid {
        return Err(Error::GridMismatch);
    }
    if field.level(0) != u_init {
        return Err(Error::InvalidArgument(
            "the frozen field does not match the initial datum at the first level".into(),
        ));
    }
    let grads = level_gradients(field)?;
    let opt = |e: &Option<Expr>, name: &str, b: bool| -> Result<Coef> {
        match e {
            Some(e) => freeze_one(e, name, field, &grads, b),
            None => Ok(Coef::Zero),
        }
    };
    let coeffs = LinearCoefficients {
        a_xx: freeze_one(&spec.a_xx, "a_xx", field, &grads, false)?,
        a_xy: opt(&spec.a_xy, "a_xy", false)?,
        a_yy: opt(&spec.a_yy, "a_yy", false)?,
        b_x: freeze_one(&spec.b_x, "b_x", field, &grads, true)?,
        b_y: opt(&spec.b_y, "b_y", true)?,
        ..Default::default()
    };
    Ok(LinearProblem {
        grid: spec.grid,
        time: *field.time(),
        coeffs,
        f: freeze_one(&spec.f, "f", field, &grads, false)?,
        h: freeze_one(&spec.h, "h", field, &grads, true)?,
        u0: u_init.to_vec(),
    })
}

/// The linear problem with every coefficient evaluated along `u`. Gradients
/// of `u` are one-sided at the boundary; `b_j` and `h` only see the trace.
pub fn freeze_coefficients(spec: &ProblemSpec, u: &SpaceTimeField) -> Result<LinearProblem> {
    spec.validate()?;
    if u.time().t0 != 0.0 {
        return Err(Error::InvalidArgument("the frozen field must start at t = 0".into()));
    }
    freeze_with_initial(spec, u, &spec.initial_field()?)
}

/// Compatibility residual at time `t` for the state `u`:
/// `sum a D^2 u + f + sum b_j D_j u - h` on every boundary node.
pub fn compatibility_residual(spec: &ProblemSpec, t: f64, u: &[f64]) -> Result<BoundaryResidual> {
    let grid = &spec.grid;
    grid.check_len(u)?;
    let grad = grid.gradient(u)?;
    let mut terms = Vec::new();
    for b in grid.boundary_nodes() {
        let (k, pos) = (b.index, b.position);
        let p = grad[k];
        let mut a_term = 0.0;
        for (e, pair, factor) in [
            (Some(&spec.a_xx), DirectionPair::XX, 1.0),
            (spec.a_xy.as_ref(), DirectionPair::XY, 2.0),
            (spec.a_yy.as_ref(), DirectionPair::YY, 1.0),
        ] {
            if let Some(e) = e {
                let d2 = grid.closure_second_derivative_stencil(k, pair).apply(u);
                a_term += factor * eval_state(e, "a", t, pos, u[k], p)? * d2;
            }
        }
        let f = eval_state(&spec.f, "f", t, pos, u[k], p)?;
        let mut b_term = eval_state(&spec.b_x, "b_x", t, pos, u[k], p)? * grid.gradient_stencil(k, Axis::X).apply(u);
        if let Some(e) = &spec.b_y {
            b_term += eval_state(e, "b_y", t, pos, u[k], p)? * grid.gradient_stencil(k, Axis::Y).apply(u);
        }
        let h = eval_state(&spec.h, "h", t, pos, u[k], p)?;
        terms.push([a_term, f, b_term, h]);
    }
    Ok(BoundaryResidual::from_terms(grid, terms))
}

pub fn check_compatibility(spec: &ProblemSpec) -> Result<BoundaryResidual> {
    spec.validate()?;
    compatibility_residual(spec, 0.0, &spec.initial_field()?)
}

/// Ranges for the state variables in [`check_ag4`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub u: (f64, f64),
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    /// Lattice points per state variable (0 is added when in range).
    pub points: usize,
    /// Time levels spread evenly over `[0, horizon]`.
    pub time_levels: usize,
}

impl SampleBox {
    pub fn symmetric(u: f64, p: f64) -> Self {
        SampleBox {
            u: (-u, u),
            p1: (-p, p),
            p2: (-p, p),
            points: 9,
            time_levels: 5,
        }
    }
}

fn lattice((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = if n <= 1 || lo == hi {
        vec![lo]
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    if lo <= 0.0 && 0.0 <= hi && !out.contains(&0.0) {
        out.push(0.0);
    }
    out
}

/// `(min ellipticity, min b . nu)` over grid nodes, a time ladder and a
/// deterministic lattice of state values.
pub fn check_ag4(spec: &ProblemSpec, sample: &SampleBox) -> Result<(f64, f64)> {
    spec.validate()?;
    let grid = spec.grid;
    let us = lattice(sample.u, sample.points);
    let p1s = lattice(sample.p1, sample.points);
    let p2s = if grid.dim() == 2 {
        lattice(sample.p2, sample.points)
    } else {
        vec![0.0]
    };
    let nt = sample.time_levels.max(1);
    let times: Vec<f64> = (0..nt)
        .map(|i| {
            if nt == 1 {
                0.0
            } else {
                spec.horizon * i as f64 / (nt - 1) as f64
            }
        })
        .collect();
    let mut states = Vec::new();
    for &u in &us {
        for &p1 in &p1s {
            for &p2 in &p2s {
                states.push((u, [p1, p2]));
            }
        }
    }
    let interior: Result<Vec<f64>> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|k| {
            let pos = grid.position(k);
            let mut m = f64::INFINITY;
            for &t in &times {
                for &(u, p) in &states {
                    let a = eval_state(&spec.a_xx, "a_xx", t, pos, u, p)?;
                    let nu = match (&spec.a_xy, &spec.a_yy) {
                        (None, None) => a,
                        (b, c) => {
                            let b = b.as_ref().map_or(Ok(0.0), |e| eval_state(e, "a_xy", t, pos, u, p))?;
                            let c = c.as_ref().map_or(Ok(0.0), |e| eval_state(e, "a_yy", t, pos, u, p))?;
                            0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
                        }
                    };
                    m = m.min(nu);
                }
            }
            Ok(m)
        })
        .collect();
    let mut boundary = f64::INFINITY;
    for b in grid.boundary_nodes() {
        for &t in &times {
            for &u in &us {
                let mut s = 0.0;
                if b.normal[0] != 0.0 {
                    s += eval_state(&spec.b_x, "b_x", t, b.position, u, [0.0; 2])? * b.normal[0];
                }
                if b.normal[1] != 0.0 {
                    if let Some(e) = &spec.b_y {
                        s += eval_state(e, "b_y", t, b.position, u, [0.0; 2])? * b.normal[1];
                    }
                }
                boundary = boundary.min(s);
            }
        }
    }
    Ok((interior?.into_iter().fold(f64::INFINITY, f64::min), boundary))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Ball radius; defaults to `1 + 2 ||u0||_{C^{1+beta}}`.
    pub radius: Option<f64>,
    /// Initial window length.
    pub window: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub tol_fp: f64,
    pub max_iterations: usize,
    pub rho_max: f64,
    pub shrink: f64,
    /// Absolute compatibility tolerance; defaults to `10 (h^2 + dt)` times the
    /// size of the residual terms.
    pub compat_tol: Option<f64>,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            radius: None,
            window: 0.1,
            dt: 1e-3,
            scheme: Scheme::ImplicitEuler,
            tol_fp: 1e-10,
            max_iterations: 30,
            rho_max: 0.5,
            shrink: 0.5,
            compat_tol: None,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let ok = self.radius.is_none_or(pos)
            && pos(self.window)
            && pos(self.dt)
            && pos(self.tol_fp)
            && self.max_iterations > 0
            && self.rho_max > 0.0
            && self.rho_max < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.compat_tol.is_none_or(pos);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid Picard configuration {self:?}")))
        }
    }

    pub fn resolved_radius(&self, spec: &ProblemSpec) -> Result<f64> {
        match self.radius {
            Some(r) => Ok(r),
            None => Ok(1.0 + 2.0 * holder::space_norm(&spec.initial_field()?, &spec.grid, 1, spec.beta)?),
        }
    }

    fn tolerance_for(&self, grid: &Grid, r: &BoundaryResidual) -> f64 {
        self.compat_tol.unwrap_or_else(|| compat_tol(grid, self.dt, r.scale))
    }

    fn steps(&self, length: f64) -> usize {
        ((length / self.dt).round() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub window: usize,
    pub attempt: usize,
    pub t_start: f64,
    pub tau: f64,
    pub k: usize,
    pub distance: f64,
    /// `d_k / d_{k-1}`, present only when `d_{k-1} > 0`.
    pub ratio: Option<f64>,
    /// `d(u_k, U_0)`.
    pub ball_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window: usize,
    pub attempt: usize,
    pub t_start: f64,
    pub tau: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Why the attempt was abandoned, if it was.
    pub restart_reason: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterations: Vec<IterationRecord>,
    pub windows: Vec<WindowRecord>,
    /// Every linear solve, including the builds of `U_0`.
    pub linear_solves: usize,
}

impl IterationTrace {
    /// Ratios of converged attempts.
    pub fn converged_ratios(&self) -> Vec<f64> {
        let ok: Vec<(usize, usize)> = self
            .windows
            .iter()
            .filter(|w| w.converged)
            .map(|w| (w.window, w.attempt))
            .collect();
        self.iterations
            .iter()
            .filter(|r| ok.contains(&(r.window, r.attempt)))
            .filter_map(|r| r.ratio)
            .collect()
    }

    /// Total iterations of converged attempts (linear solves minus `U_0`).
    pub fn converged_iterations(&self) -> usize {
        self.windows.iter().filter(|w| w.converged).map(|w| w.iterations).sum()
    }

    /// CSV rows `window,attempt,t_start,tau,k,d_k,r_k,ball`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "window,attempt,t_start,tau,k,d_k,r_k,ball")?;
        for r in &self.iterations {
            let ratio = r.ratio.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.window, r.attempt, r.t_start, r.tau, r.k, r.distance, ratio, r.ball_distance
            )?;
        }
        Ok(())
    }
}

fn shift_field(base: &SpaceTimeField, offset: &SpaceTimeField) -> Result<SpaceTimeField> {
    let steps = base.time().n_steps;
    if offset.time().n_steps < steps || offset.grid() != base.grid() {
        return Err(Error::GridMismatch);
    }
    let vals: Vec<f64> = base.values().iter().zip(offset.values()).map(|(a, b)| a + b).collect();
    SpaceTimeField::new(*base.grid(), *base.time(), vals)
}

struct WindowRun<'a> {
    spec: &'a ProblemSpec,
    config: &'a PicardConfig,
    radius: f64,
    window: usize,
}

impl WindowRun<'_> {
    /// Picard iteration on `[start_step, start_step + n_steps] * dt`,
    /// shrinking the window until it contracts. Returns the converged iterate.
    fn run(
        &self,
        u_init: &[f64],
        start_step: usize,
        mut n_steps: usize,
        seed: Option<&SpaceTimeField>,
        trace: &mut IterationTrace,
    ) -> Result<DiscreteSolution> {
        let (spec, cfg) = (self.spec, self.config);
        let beta = spec.beta;
        let t_start = start_step as f64 * cfg.dt;
        if let Some(s) = seed {
            if s.level(0).iter().any(|v| *v != 0.0) {
                return Err(Error::Precondition("a seed offset must vanish at t = 0".into()));
            }
        }
        for attempt in 0.. {
            let time = TimeGrid::with_step(t_start, cfg.dt, n_steps)?;
            let tau = time.tau;
            let frozen = SpaceTimeField::frozen(spec.grid, time, u_init)?;
            let u_first = solve_linear(&freeze_with_initial(spec, &frozen, u_init)?, cfg.scheme)?;
            trace.linear_solves += 1;
            let mut current = match seed {
                Some(s) => {
                    let off = s.prefix(n_steps)?;
                    let off = SpaceTimeField::new(spec.grid, time, off.values().to_vec())?;
                    let d_seed = holder::picard_metric(&off, &SpaceTimeField::constant(spec.grid, time, 0.0), beta)?;
                    if d_seed > self.radius {
                        return Err(Error::Precondition(format!(
                            "seed offset has distance {d_seed:.4e} > R = {:.4e}",
                            self.radius
                        )));
                    }
                    DiscreteSolution::from_field(shift_field(&u_first.u, &off)?)
                }
                None => u_first.clone(),
            };
            let mut prev_d: Option<f64> = None;
            let mut restart: Option<String> = None;
            let mut k = 0;
            loop {
                if k == cfg.max_iterations {
                    trace.windows.push(WindowRecord {
                        window: self.window,
                        attempt,
                        t_start,
                        tau,
                        iterations: k,
                        converged: false,
                        restart_reason: Some("iteration budget exhausted".into()),
                    });
                    return Err(Error::NotConverged {
                        iterations: k,
                        distance: prev_d.unwrap_or(f64::NAN),
                    });
                }
                let next = solve_linear(&freeze_with_initial(spec, &current.u, u_init)?, cfg.scheme)?;
                trace.linear_solves += 1;
                k += 1;
                let d = holder::picard_metric(&next.u, &current.u, beta)?;
                let ball = holder::picard_metric(&next.u, &u_first.u, beta)?;
                let ratio = prev_d.filter(|p| *p > 0.0).map(|p| d / p);
                trace.iterations.push(IterationRecord {
                    window: self.window,
                    attempt,
                    t_start,
                    tau,
                    k,
                    distance: d,
                    ratio,
                    ball_distance: ball,
                });
                if ball > self.radius {
                    restart = Some(format!("left the ball: d(u_k, U_0) = {ball:.4e}"));
                } else if let Some(r) = ratio.filter(|r| *r >= cfg.rho_max) {
                    restart = Some(format!("ratio {r:.4} >= {}", cfg.rho_max));
                } else if d <= cfg.tol_fp {
                    trace.windows.push(WindowRecord {
                        window: self.window,
                        attempt,
                        t_start,
                        tau,
                        iterations: k,
                        converged: true,
                        restart_reason: None,
                    });
                    return Ok(next);
                }
                if restart.is_some() {
                    break;
                }
                prev_d = Some(d);
                current = next;
            }
            trace.windows.push(WindowRecord {
                window: self.window,
                attempt,
                t_start,
                tau,
                iterations: k,
                converged: false,
                restart_reason: restart,
            });
            let shorter = (n_steps as f64 * cfg.shrink).floor() as usize;
            if shorter < 1 {
                return Err(Error::WindowTooSmall { t_start });
            }
            n_steps = shorter;
        }
        unreachable!("attempt loop is unbounded")
    }
}

fn total_steps(spec: &ProblemSpec, cfg: &PicardConfig) -> Result<usize> {
    let n = (spec.horizon / cfg.dt).round() as usize;
    if n == 0 || ((n as f64 * cfg.dt) - spec.horizon).abs() > 1e-9 * spec.horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon {} is not a whole number of steps dt = {}",
            spec.horizon, cfg.dt
        )));
    }
    Ok(n)
}

/// The state box reachable from the ball of radius `radius` around the initial
/// datum: ranges of `u0` and of its discrete gradient, each widened by `radius`.
pub fn precondition_box(spec: &ProblemSpec, radius: f64, points: usize, time_levels: usize) -> Result<SampleBox> {
    let u0 = spec.initial_field()?;
    let grad = spec.grid.gradient(&u0)?;
    let range = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (ulo, uhi) = range(&mut u0.iter().copied());
    let (p1lo, p1hi) = range(&mut grad.iter().map(|g| g[0]));
    let (p2lo, p2hi) = range(&mut grad.iter().map(|g| g[1]));
    Ok(SampleBox {
        u: (ulo - radius, uhi + radius),
        p1: (p1lo - radius, p1hi + radius),
        p2: (p2lo - radius, p2hi + radius),
        points,
        time_levels,
    })
}

fn initial_checks(spec: &ProblemSpec, cfg: &PicardConfig) -> Result<(Vec<f64>, f64)> {
    spec.validate()?;
    cfg.validate()?;
    let u0 = spec.initial_field()?;
    let r = compatibility_residual(spec, 0.0, &u0)?;
    let tol = cfg.tolerance_for(&spec.grid, &r);
    if r.max_abs > tol {
        return Err(Error::Compatibility {
            time: 0.0,
            max_abs: r.max_abs,
            tol,
        });
    }
    let radius = cfg.resolved_radius(spec)?;
    let sample = precondition_box(spec, radius, 5, 5)?;
    let (nu, nu_b) = check_ag4(spec, &sample)?;
    if !(nu > 0.0 && nu_b > 0.0) {
        return Err(Error::Precondition(format!(
            "ellipticity/transversality fail on the sampled box (nu = {nu}, nu_b = {nu_b})"
        )));
    }
    Ok((u0, radius))
}

/// `U_0`: the linear solve with coefficients frozen at the initial datum.
pub fn build_u0(spec: &ProblemSpec, time: TimeGrid, scheme: Scheme, tol: f64) -> Result<DiscreteSolution> {
    spec.validate()?;
    let u0 = spec.initial_field()?;
    let r = compatibility_residual(spec, time.t0, &u0)?;
    if r.max_abs > tol {
        return Err(Error::Compatibility {
            time: time.t0,
            max_abs: r.max_abs,
            tol,
        });
    }
    let frozen = SpaceTimeField::frozen(spec.grid, time, &u0)?;
    solve_linear(&freeze_with_initial(spec, &frozen, &u0)?, scheme)
}

/// Picard iteration on the first window `(0, tau]`.
pub fn picard_solve(spec: &ProblemSpec, config: &PicardConfig) -> Result<(DiscreteSolution, IterationTrace)> {
    let (u0, radius) = initial_checks(spec, config)?;
    let steps = config.steps(config.window).min(total_steps(spec, config)?);
    let run = WindowRun {
        spec,
        config,
        radius,
        window: 0,
    };
    let mut trace = IterationTrace::default();
    let sol = run.run(&u0, 0, steps, None, &mut trace)?;
    Ok((sol, trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Continuation {
    pub solution: DiscreteSolution,
    pub trace: IterationTrace,
    pub window_starts: Vec<f64>,
    /// Compatibility residual max-abs at each seam after the first window.
    pub seam_residuals: Vec<f64>,
}

/// Covers `(0, T]` by consecutive Picard windows, re-checking compatibility
/// at every seam. A window that had to shrink keeps its length afterwards.
pub fn continue_in_time(spec: &ProblemSpec, config: &PicardConfig) -> Result<Continuation> {
    let (u0, radius) = initial_checks(spec, config)?;
    let total = total_steps(spec, config)?;
    let mut window_steps = config.steps(config.window);
    let mut trace = IterationTrace::default();
    let mut done = 0usize;
    let mut state = u0;
    let mut field: Option<SpaceTimeField> = None;
    let mut boundary_dt = Vec::new();
    let mut window_starts = Vec::new();
    let mut seam_residuals = Vec::new();
    let mut index = 0;
    while done < total {
        let t_seam = done as f64 * config.dt;
        if done > 0 {
            let r = compatibility_residual(spec, t_seam, &state)?;
            let tol = config.tolerance_for(&spec.grid, &r);
            seam_residuals.push(r.max_abs);
            if r.max_abs > tol {
                return Err(Error::Compatibility {
                    time: t_seam,
                    max_abs: r.max_abs,
                    tol,
                });
            }
        }
        let run = WindowRun {
            spec,
            config,
            radius,
            window: index,
        };
        let steps = window_steps.min(total - done);
        let sol = run.run(&state, done, steps, None, &mut trace)?;
        let used = sol.u.time().n_steps;
        if used < steps {
            window_steps = used;
        }
        window_starts.push(t_seam);
        state = sol.final_level().to_vec();
        boundary_dt.extend(sol.boundary_dt.iter().cloned());
        match &mut field {
            None => field = Some(sol.u),
            Some(f) => f.append(&sol.u)?,
        }
        done += used;
        index += 1;
    }
    let u = field.expect("at least one window");
    let u = SpaceTimeField::new(
        *u.grid(),
        TimeGrid::with_step(0.0, config.dt, total)?,
        u.values().to_vec(),
    )?;
    Ok(Continuation {
        solution: DiscreteSolution { u, boundary_dt },
        trace,
        window_starts,
        seam_residuals,
    })
}

/// A seed offset `c * shape(t, x)` with `shape(0, .)` removed, scaled so its
/// Picard distance from zero equals `target`.
pub fn scaled_offset<F: Fn(f64, [f64; 2]) -> f64>(
    grid: Grid,
    time: TimeGrid,
    shape: F,
    target: f64,
    beta: f64,
) -> Result<SpaceTimeField> {
    let raw = SpaceTimeField::from_fn(grid, time, |t, x| shape(t, x) - shape(time.t0, x));
    let zero = SpaceTimeField::constant(grid, time, 0.0);
    let d = holder::picard_metric(&raw, &zero, beta)?;
    if d == 0.0 {
        return Err(Error::Degenerate("offset shape is constant in time".into()));
    }
    Ok(raw.scale(target / d))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessReport {
    pub max_deviation: f64,
    pub solutions: Vec<DiscreteSolution>,
    pub traces: Vec<IterationTrace>,
}

/// Runs the first-window iteration from `U_0 + offset` for every offset and
/// reports the largest Picard distance between converged solutions (on their
/// common time prefix).
pub fn uniqueness_probe(
    spec: &ProblemSpec,
    config: &PicardConfig,
    offsets: &[SpaceTimeField],
) -> Result<UniquenessReport> {
    let (u0, radius) = initial_checks(spec, config)?;
    let steps = config.steps(config.window).min(total_steps(spec, config)?);
    for o in offsets {
        if o.grid() != &spec.grid || o.time().n_steps < steps || o.time().dt != config.dt {
            return Err(Error::InvalidArgument(
                "offsets must live on the spec grid with the configured dt and window".into(),
            ));
        }
    }
    let runs: Result<Vec<(DiscreteSolution, IterationTrace)>> = offsets
        .par_iter()
        .map(|o| {
            let run = WindowRun {
                spec,
                config,
                radius,
                window: 0,
            };
            let mut trace = IterationTrace::default();
            let sol = run.run(&u0, 0, steps, Some(o), &mut trace)?;
            Ok((sol, trace))
        })
        .collect();
    let (solutions, traces): (Vec<_>, Vec<_>) = runs?.into_iter().unzip();
    let common = solutions.iter().map(|s| s.u.time().n_steps).min().unwrap_or(0);
    let mut max_deviation = 0.0f64;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            let a = solutions[i].u.prefix(common)?;
            let b = solutions[j].u.prefix(common)?;
            max_deviation = max_deviation.max(holder::picard_metric(&a, &b, spec.beta)?);
        }
    }
    Ok(UniquenessReport {
        max_deviation,
        solutions,
        traces,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NemytskiiReport {
    /// Max over pairs of `||A(U) - A(V)||_{C^{beta/2,beta}} / d(U, V)`.
    pub interior: Option<f64>,
    /// Max over pairs of the boundary-coefficient ratio.
    pub boundary: Option<f64>,
    pub ratios: Vec<(f64, f64)>,
    /// Indices of coincident pairs.
    pub skipped: Vec<usize>,
}

/// `max(||W||_{C^{beta/2}(I; C)}, ||W||_{B(I; C^{1+beta})})`.
pub fn parabolic_c1_norm(w: &SpaceTimeField, beta: f64) -> Result<f64> {
    Ok(holder::time_holder_norm(w, beta / 2.0, ValueNorm::Sup)?.max(holder::bounded_in_time_norm(w, 1, beta)?))
}

fn nemytskii_field(e: &Expr, name: &str, u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grads = level_gradients(u)?;
    let v = nemytskii_table(e, name, u, &grads, false)?;
    SpaceTimeField::new(*u.grid(), *u.time(), v)
}

/// Measured Lipschitz ratios of the substitution operators over field pairs.
/// Interior expressions are compared in the parabolic `C^{beta/2,beta}` norm
/// against the Picard distance; boundary expressions, evaluated on all nodes,
/// in the `C^{beta/2,1+beta}` norm against the same norm of `U - V`.
pub fn nemytskii_lipschitz_probe(
    spec: &ProblemSpec,
    pairs: &[(SpaceTimeField, SpaceTimeField)],
    beta: f64,
) -> Result<NemytskiiReport> {
    spec.validate()?;
    holder::HolderExponent::new(beta)?;
    let results: Result<Vec<Option<(f64, f64)>>> = pairs
        .par_iter()
        .map(|(u, v)| {
            let d = holder::picard_metric(u, v, beta)?;
            if d == 0.0 {
                return Ok(None);
            }
            let mut interior = 0.0f64;
            for (name, e) in spec.interior_exprs() {
                let w = nemytskii_field(e, name, u)?.sub(&nemytskii_field(e, name, v)?)?;
                interior = interior.max(holder::parabolic_norm(&w, beta / 2.0, beta)?);
            }
            let dc1 = parabolic_c1_norm(&u.sub(v)?, beta)?;
            let mut boundary = 0.0f64;
            for (name, e) in spec.boundary_exprs() {
                let w = nemytskii_field(e, name, u)?.sub(&nemytskii_field(e, name, v)?)?;
                boundary = boundary.max(parabolic_c1_norm(&w, beta)?);
            }
            Ok(Some((interior / d, boundary / dc1)))
        })
        .collect();
    let mut report = NemytskiiReport::default();
    for (i, r) in results?.into_iter().enumerate() {
        match r {
            None => report.skipped.push(i),
            Some((a, b)) => {
                report.interior = Some(report.interior.map_or(a, |m| m.max(a)));
                report.boundary = Some(report.boundary.map_or(b, |m| m.max(b)));
                report.ratios.push((a, b));
            }
        }
    }
    Ok(report)
}

/// Linear coefficients of a `u`-independent spec, for direct comparison.
pub fn as_linear(spec: &ProblemSpec, time: TimeGrid) -> Result<LinearProblem> {
    if !spec.is_u_independent() {
        return Err(Error::InvalidArgument("the spec depends on the solution".into()));
    }
    let u0 = spec.initial_field()?;
    let frozen = SpaceTimeField::frozen(spec.grid, time, &u0)?;
    let p = freeze_with_initial(spec, &frozen, &u0)?;
    linear::LinearProblem::validate(&p)?;
    Ok(p)
}
