//! The linear nonautonomous problem with a dynamic boundary condition:
//!
//! ```text
//! D_t u = A(t) u + f(t, x)                  in the interior,
//! D_t u + B(t) u = h(t, x')                 on the boundary,
//! A(t) = a_xx D_xx + 2 a_xy D_xy + a_yy D_yy + a_x D_x + a_y D_y + a_0,
//! B(t) = b_x D_x + b_y D_y + b_0.
//! ```
//!
//! Each time step assembles one system over all nodes. Interior rows carry
//! the parabolic equation, boundary rows carry the boundary evolution law
//! with one-sided gradient stencils; the interior equation is never imposed
//! on the boundary.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Var};
use crate::field::SpaceTimeField;
use crate::fit::fit_slope;
use crate::geometry::{Axis, DirectionPair, Grid, TimeGrid};
use crate::holder::{self, NormReport, ValueNorm};

/// A coefficient or data function of `(t, x, y)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Coef {
    #[default]
    Zero,
    Const(f64),
    Expr(Arc<Expr>),
    /// Values per time level and node, `table[level * n_nodes + node]`.
    Table(Arc<Vec<f64>>),
}

impl Coef {
    pub fn expr(e: Expr) -> Coef {
        match e.as_const() {
            Some(0.0) => Coef::Zero,
            Some(c) => Coef::Const(c),
            None => Coef::Expr(Arc::new(e)),
        }
    }

    pub fn parse(src: &str) -> Result<Coef> {
        crate::expr::parse(src)
            .map(Coef::expr)
            .map_err(|e| Error::eval(format!("parsing `{src}`"), e))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coef::Zero)
    }

    #[inline]
    pub fn value(&self, level: usize, t: f64, node: usize, pos: [f64; 2], n_nodes: usize) -> Result<f64> {
        match self {
            Coef::Zero => Ok(0.0),
            Coef::Const(c) => Ok(*c),
            Coef::Table(v) => Ok(v[level * n_nodes + node]),
            Coef::Expr(e) => e
                .eval(&EvalContext::at(t, pos))
                .map_err(|err| Error::eval(format!("evaluating `{e}` at t={t}, x={pos:?}"), err)),
        }
    }

    fn validate(&self, name: &str, grid: &Grid, time: &TimeGrid) -> Result<()> {
        match self {
            Coef::Table(v) if v.len() != grid.n_nodes() * time.n_levels() => Err(Error::FieldLength {
                expected: grid.n_nodes() * time.n_levels(),
                found: v.len(),
            }),
            Coef::Expr(e) => {
                for v in [Var::U, Var::P1, Var::P2] {
                    if e.uses(v) {
                        return Err(Error::InvalidArgument(format!(
                            "linear coefficient {name} = `{e}` may not depend on {v}"
                        )));
                    }
                }
                if grid.dim() == 1 && e.uses(Var::Y) {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient {name} = `{e}` uses y on a 1-D grid"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl From<f64> for Coef {
    fn from(c: f64) -> Coef {
        if c == 0.0 {
            Coef::Zero
        } else {
            Coef::Const(c)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearCoefficients {
    pub a_xx: Coef,
    /// Off-diagonal entry of the symmetric top-order matrix; the operator
    /// carries `2 a_xy D_xy`.
    pub a_xy: Coef,
    pub a_yy: Coef,
    pub a_x: Coef,
    pub a_y: Coef,
    pub a_0: Coef,
    pub b_x: Coef,
    pub b_y: Coef,
    pub b_0: Coef,
}

impl LinearCoefficients {
    /// `a_xx D_xx` in the interior, `b_x D_x` on the boundary (1-D form).
    pub fn one_dimensional(a_2: Coef, b_1: Coef) -> Self {
        LinearCoefficients {
            a_xx: a_2,
            b_x: b_1,
            ..Default::default()
        }
    }

    fn named(&self) -> [(&'static str, &Coef); 9] {
        [
            ("a_xx", &self.a_xx),
            ("a_xy", &self.a_xy),
            ("a_yy", &self.a_yy),
            ("a_x", &self.a_x),
            ("a_y", &self.a_y),
            ("a_0", &self.a_0),
            ("b_x", &self.b_x),
            ("b_y", &self.b_y),
            ("b_0", &self.b_0),
        ]
    }

    fn validate(&self, grid: &Grid, time: &TimeGrid) -> Result<()> {
        for (name, c) in self.named() {
            c.validate(name, grid, time)?;
        }
        if grid.dim() == 1 {
            for (name, c) in [
                ("a_xy", &self.a_xy),
                ("a_yy", &self.a_yy),
                ("a_y", &self.a_y),
                ("b_y", &self.b_y),
            ] {
                if !c.is_zero() {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient {name} must vanish on a 1-D grid"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit-euler",
            Scheme::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn from_name(s: &str) -> Option<Scheme> {
        match s {
            "implicit-euler" => Some(Scheme::ImplicitEuler),
            "crank-nicolson" => Some(Scheme::CrankNicolson),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProblem {
    pub grid: Grid,
    pub time: TimeGrid,
    pub coeffs: LinearCoefficients,
    pub f: Coef,
    pub h: Coef,
    pub u0: Vec<f64>,
}

impl LinearProblem {
    pub fn validate(&self) -> Result<()> {
        self.grid.check_len(&self.u0)?;
        self.coeffs.validate(&self.grid, &self.time)?;
        self.f.validate("f", &self.grid, &self.time)?;
        self.h.validate("h", &self.grid, &self.time)?;
        if self.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial datum is not finite".into()));
        }
        Ok(())
    }
}

fn eval_at(c: &Coef, level: usize, time: &TimeGrid, grid: &Grid, k: usize) -> Result<f64> {
    let v = c.value(level, time.time(level), k, grid.position(k), grid.n_nodes())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!(
            "non-finite coefficient value at level {level}, node {k}"
        )))
    }
}

fn min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let half_gap = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    mean - half_gap
}

/// Smallest eigenvalue of the top-order coefficient matrix over all levels
/// and nodes (1-D: the minimum of `a_xx`). Returned even when non-positive.
pub fn check_ellipticity(coeffs: &LinearCoefficients, grid: &Grid, time: &TimeGrid) -> Result<f64> {
    let mut out = f64::INFINITY;
    for level in 0..time.n_levels() {
        for k in 0..grid.n_nodes() {
            let a = eval_at(&coeffs.a_xx, level, time, grid, k)?;
            let nu = if grid.dim() == 1 {
                a
            } else {
                let b = eval_at(&coeffs.a_xy, level, time, grid, k)?;
                let c = eval_at(&coeffs.a_yy, level, time, grid, k)?;
                min_eigenvalue(a, b, c)
            };
            out = out.min(nu);
        }
    }
    Ok(out)
}

/// Minimum over boundary nodes and levels of `b . nu`. Tangential components
/// of `b` do not enter.
pub fn check_transversality(coeffs: &LinearCoefficients, grid: &Grid, time: &TimeGrid) -> Result<f64> {
    let mut out = f64::INFINITY;
    let bnodes = grid.boundary_nodes();
    for level in 0..time.n_levels() {
        for b in &bnodes {
            let mut s = 0.0;
            if b.normal[0] != 0.0 {
                s += eval_at(&coeffs.b_x, level, time, grid, b.index)? * b.normal[0];
            }
            if b.normal[1] != 0.0 {
                s += eval_at(&coeffs.b_y, level, time, grid, b.index)? * b.normal[1];
            }
            out = out.min(s);
        }
    }
    Ok(out)
}

/// Residual of the compatibility condition on the boundary, with the terms
/// whose size sets the tolerance scale.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryResidual {
    pub nodes: Vec<usize>,
    pub positions: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub max_abs: f64,
    /// `max(1, |A u0|, |f|, |B u0|, |h|)` over the boundary.
    pub scale: f64,
}

impl BoundaryResidual {
    pub(crate) fn from_terms(grid: &Grid, terms: Vec<[f64; 4]>) -> Self {
        let bnodes = grid.boundary_nodes();
        let values: Vec<f64> = terms.iter().map(|t| t[0] + t[1] + t[2] - t[3]).collect();
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = terms.iter().flat_map(|t| t.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
        BoundaryResidual {
            nodes: bnodes.iter().map(|b| b.index).collect(),
            positions: bnodes.iter().map(|b| b.position).collect(),
            values,
            max_abs,
            scale,
        }
    }
}

/// Default compatibility tolerance `10 (h^2 + dt) * scale`.
pub fn compat_tol(grid: &Grid, dt: f64, scale: f64) -> f64 {
    let h = grid.spacing();
    10.0 * (h * h + dt) * scale
}

fn interior_action(
    coeffs: &LinearCoefficients,
    grid: &Grid,
    time: &TimeGrid,
    level: usize,
    k: usize,
    u: &[f64],
) -> Result<f64> {
    let mut s = 0.0;
    for (c, pair, factor) in [
        (&coeffs.a_xx, DirectionPair::XX, 1.0),
        (&coeffs.a_xy, DirectionPair::XY, 2.0),
        (&coeffs.a_yy, DirectionPair::YY, 1.0),
    ] {
        if !c.is_zero() {
            let st = grid.closure_second_derivative_stencil(k, pair);
            s += factor * eval_at(c, level, time, grid, k)? * st.apply(u);
        }
    }
    for (c, axis) in [(&coeffs.a_x, Axis::X), (&coeffs.a_y, Axis::Y)] {
        if !c.is_zero() {
            s += eval_at(c, level, time, grid, k)? * grid.gradient_stencil(k, axis).apply(u);
        }
    }
    if !coeffs.a_0.is_zero() {
        s += eval_at(&coeffs.a_0, level, time, grid, k)? * u[k];
    }
    Ok(s)
}

fn boundary_action(
    coeffs: &LinearCoefficients,
    grid: &Grid,
    time: &TimeGrid,
    level: usize,
    k: usize,
    u: &[f64],
) -> Result<f64> {
    let mut s = 0.0;
    for (c, axis) in [(&coeffs.b_x, Axis::X), (&coeffs.b_y, Axis::Y)] {
        if !c.is_zero() {
            s += eval_at(c, level, time, grid, k)? * grid.gradient_stencil(k, axis).apply(u);
        }
    }
    if !coeffs.b_0.is_zero() {
        s += eval_at(&coeffs.b_0, level, time, grid, k)? * u[k];
    }
    Ok(s)
}

/// `r = A(t0) u0 + f(t0) + B(t0) u0 - h(t0)` at every boundary node, with
/// one-sided second derivatives of `u0` on the boundary.
pub fn check_compatibility_linear(problem: &LinearProblem) -> Result<BoundaryResidual> {
    problem.validate()?;
    let (g, t) = (&problem.grid, &problem.time);
    let u0 = &problem.u0;
    let mut terms = Vec::new();
    for b in g.boundary_nodes() {
        let k = b.index;
        terms.push([
            interior_action(&problem.coeffs, g, t, 0, k, u0)?,
            eval_at(&problem.f, 0, t, g, k)?,
            boundary_action(&problem.coeffs, g, t, 0, k, u0)?,
            eval_at(&problem.h, 0, t, g, k)?,
        ]);
    }
    Ok(BoundaryResidual::from_terms(g, terms))
}

/// Discrete solution with the boundary trace of `(u^{n+1} - u^n) / dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution {
    pub u: SpaceTimeField,
    /// One vector per step, ordered as `grid.boundary_nodes()`.
    pub boundary_dt: Vec<Vec<f64>>,
}

impl DiscreteSolution {
    pub fn norm_report(&self, beta: f64) -> Result<NormReport> {
        norm_report(self, beta)
    }

    pub fn final_level(&self) -> &[f64] {
        self.u.level(self.u.time().n_steps)
    }

    /// CSV rows `t,x,u` (1-D) or `t,x,y,u` (strip).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let grid = self.u.grid();
        let two_d = grid.dim() == 2;
        writeln!(w, "{}", if two_d { "t,x,y,u" } else { "t,x,u" })?;
        for n in 0..self.u.n_levels() {
            let t = self.u.time().time(n);
            for (k, v) in self.u.level(n).iter().enumerate() {
                let p = grid.position(k);
                if two_d {
                    writeln!(w, "{t},{},{},{v}", p[0], p[1])?;
                } else {
                    writeln!(w, "{t},{},{v}", p[0])?;
                }
            }
        }
        Ok(())
    }

    /// Re-bases the boundary trace from a full field (used after
    /// concatenating windows).
    pub fn from_field(u: SpaceTimeField) -> Self {
        let bnodes = u.grid().boundary_nodes();
        let dt = u.time().dt;
        let boundary_dt = (1..u.n_levels())
            .map(|n| {
                let (a, b) = (u.level(n - 1), u.level(n));
                bnodes.iter().map(|bn| (b[bn.index] - a[bn.index]) / dt).collect()
            })
            .collect();
        DiscreteSolution { u, boundary_dt }
    }
}

/// Spatial operator at one level: `L` with interior rows `A(t)` and boundary
/// rows `-B(t)`, plus the data vector (`f` inside, `h` on the boundary).
struct LevelOperator {
    l: BandedMatrix,
    g: Vec<f64>,
}

fn assemble(problem: &LinearProblem, level: usize) -> Result<LevelOperator> {
    let grid = &problem.grid;
    let time = &problem.time;
    let c = &problem.coeffs;
    let n = grid.n_nodes();
    let bw = grid.bandwidth();
    let mut l = BandedMatrix::zeros(n, bw, bw);
    let mut g = vec![0.0; n];
    for k in 0..n {
        if grid.is_boundary(k) {
            for (coef, axis) in [(&c.b_x, Axis::X), (&c.b_y, Axis::Y)] {
                if coef.is_zero() {
                    continue;
                }
                let v = eval_at(coef, level, time, grid, k)?;
                for (j, w) in grid.gradient_stencil(k, axis).iter() {
                    l.add(k, j, -v * w);
                }
            }
            if !c.b_0.is_zero() {
                l.add(k, k, -eval_at(&c.b_0, level, time, grid, k)?);
            }
            g[k] = eval_at(&problem.h, level, time, grid, k)?;
        } else {
            for (coef, pair, factor) in [
                (&c.a_xx, DirectionPair::XX, 1.0),
                (&c.a_xy, DirectionPair::XY, 2.0),
                (&c.a_yy, DirectionPair::YY, 1.0),
            ] {
                if coef.is_zero() {
                    continue;
                }
                let v = factor * eval_at(coef, level, time, grid, k)?;
                for (j, w) in grid.second_derivative_stencil(k, pair)?.iter() {
                    l.add(k, j, v * w);
                }
            }
            for (coef, axis) in [(&c.a_x, Axis::X), (&c.a_y, Axis::Y)] {
                if coef.is_zero() {
                    continue;
                }
                let v = eval_at(coef, level, time, grid, k)?;
                for (j, w) in grid.gradient_stencil(k, axis).iter() {
                    l.add(k, j, v * w);
                }
            }
            if !c.a_0.is_zero() {
                l.add(k, k, eval_at(&c.a_0, level, time, grid, k)?);
            }
            g[k] = eval_at(&problem.f, level, time, grid, k)?;
        }
    }
    Ok(LevelOperator { l, g })
}

/// Time-steps the problem. Ellipticity and transversality must be positive
/// on every level.
pub fn solve_linear(problem: &LinearProblem, scheme: Scheme) -> Result<DiscreteSolution> {
    problem.validate()?;
    let grid = problem.grid;
    let time = problem.time;
    let nu = check_ellipticity(&problem.coeffs, &grid, &time)?;
    if !(nu > 0.0) {
        return Err(Error::Precondition(format!(
            "top-order coefficients are not elliptic (min eigenvalue {nu})"
        )));
    }
    let nu_b = check_transversality(&problem.coeffs, &grid, &time)?;
    if !(nu_b > 0.0) {
        return Err(Error::Precondition(format!(
            "boundary coefficients are not transversal (min b.nu = {nu_b})"
        )));
    }

    let n = grid.n_nodes();
    let bw = grid.bandwidth();
    let dt = time.dt;
    let inv_dt = 1.0 / dt;
    let bnodes = grid.boundary_nodes();
    let mut values = Vec::with_capacity(n * time.n_levels());
    values.extend_from_slice(&problem.u0);
    let mut boundary_dt = Vec::with_capacity(time.n_steps);

    let mut prev_op = match scheme {
        Scheme::CrankNicolson => Some(assemble(problem, 0)?),
        Scheme::ImplicitEuler => None,
    };
    let mut cached: Option<(Vec<f64>, BandedLu)> = None;
    let mut u_old = problem.u0.clone();

    for step in 0..time.n_steps {
        let op = assemble(problem, step + 1)?;
        let weight = match scheme {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        };
        let reuse = matches!(&cached, Some((key, _)) if key.as_slice() == op.l.storage());
        if !reuse {
            let mut m = BandedMatrix::zeros(n, bw, bw);
            for k in 0..n {
                m.add(k, k, inv_dt);
                let lo = k.saturating_sub(bw);
                let hi = (k + bw).min(n - 1);
                for j in lo..=hi {
                    let v = op.l.get(k, j);
                    if v != 0.0 {
                        m.add(k, j, -weight * v);
                    }
                }
            }
            let lu = m.factorize().map_err(|p| Error::Singular {
                level: step + 1,
                row: p.row,
            })?;
            cached = Some((op.l.storage().to_vec(), lu));
        }
        let mut rhs: Vec<f64> = match scheme {
            Scheme::ImplicitEuler => u_old.iter().zip(&op.g).map(|(u, g)| u * inv_dt + g).collect(),
            Scheme::CrankNicolson => {
                let prev = prev_op.as_ref().expect("previous operator");
                let lu_old = prev.l.mul_vec(&u_old);
                (0..n)
                    .map(|k| u_old[k] * inv_dt + 0.5 * lu_old[k] + 0.5 * (prev.g[k] + op.g[k]))
                    .collect()
            }
        };
        cached.as_ref().expect("factorization").1.solve_in_place(&mut rhs);
        if let Some(k) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular {
                level: step + 1,
                row: k,
            });
        }
        boundary_dt.push(
            bnodes
                .iter()
                .map(|b| (rhs[b.index] - u_old[b.index]) * inv_dt)
                .collect(),
        );
        values.extend_from_slice(&rhs);
        u_old = rhs;
        if scheme == Scheme::CrankNicolson {
            prev_op = Some(op);
        }
    }
    Ok(DiscreteSolution {
        u: SpaceTimeField::new(grid, time, values)?,
        boundary_dt,
    })
}

/// The four-component norm bundle of a discrete solution.
pub fn norm_report(solution: &DiscreteSolution, beta: f64) -> Result<NormReport> {
    NormReport::compute(&solution.u, &solution.boundary_dt, beta)
}

/// Which norm of the solution is measured against the horizon `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalingNorm {
    /// `||u||_{C^theta((0,T); C)}`, predicted exponent `1 - theta`.
    TimeHolderSup { theta: f64 },
    /// `||u||_{B((0,T); C^theta)}`, predicted exponent `(2+beta-theta)/(2+beta)`.
    SpaceHolder { theta: f64 },
    /// `||u||_{C^{beta/2}((0,T); C^1)}`, predicted exponent `1/2`.
    TimeHolderC1,
}

impl ScalingNorm {
    pub fn predicted_exponent(&self, beta: f64) -> f64 {
        match *self {
            ScalingNorm::TimeHolderSup { theta } => 1.0 - theta,
            ScalingNorm::SpaceHolder { theta } => (2.0 + beta - theta) / (2.0 + beta),
            ScalingNorm::TimeHolderC1 => 0.5,
        }
    }

    fn validate(&self, beta: f64) -> Result<()> {
        let ok = match *self {
            ScalingNorm::TimeHolderSup { theta } => (0.0..=1.0).contains(&theta),
            ScalingNorm::SpaceHolder { theta } => (0.0..=2.0 + beta).contains(&theta),
            ScalingNorm::TimeHolderC1 => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("theta out of range in {self:?}")))
        }
    }

    pub fn measure(&self, u: &SpaceTimeField, beta: f64) -> Result<f64> {
        match *self {
            ScalingNorm::TimeHolderSup { theta } => {
                if theta == 0.0 {
                    Ok(u.max_abs())
                } else {
                    holder::time_holder_norm(u, theta, ValueNorm::Sup)
                }
            }
            ScalingNorm::SpaceHolder { theta } => {
                let m = theta.floor().min(2.0) as usize;
                let frac = theta - m as f64;
                if frac == 0.0 {
                    let grid = *u.grid();
                    let mut out = 0.0f64;
                    for l in u.levels() {
                        out = out.max(holder::cm_norm(l, &grid, m)?);
                    }
                    Ok(out)
                } else {
                    holder::bounded_in_time_norm(u, m, frac)
                }
            }
            ScalingNorm::TimeHolderC1 => holder::time_holder_norm(u, beta / 2.0, ValueNorm::C1),
        }
    }
}

/// Zero-initial-datum problem family indexed by the horizon `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingTemplate {
    pub grid: Grid,
    pub coeffs: LinearCoefficients,
    pub f: Coef,
    pub h: Coef,
    /// Steps per horizon (the same for every `T`).
    pub n_steps: usize,
    pub scheme: Scheme,
}

impl ScalingTemplate {
    pub fn problem(&self, horizon: f64) -> Result<LinearProblem> {
        Ok(LinearProblem {
            grid: self.grid,
            time: TimeGrid::new(0.0, horizon, self.n_steps)?,
            coeffs: self.coeffs.clone(),
            f: self.f.clone(),
            h: self.h.clone(),
            u0: vec![0.0; self.grid.n_nodes()],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub horizons: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub predicted: f64,
}

/// Solves the template on each horizon and fits `log norm` against `log T`.
pub fn measure_small_time_scaling(
    template: &ScalingTemplate,
    norm: ScalingNorm,
    horizons: &[f64],
    beta: f64,
) -> Result<ScalingResult> {
    holder::HolderExponent::new(beta)?;
    norm.validate(beta)?;
    if horizons.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "a scaling ladder needs at least 4 horizons, got {}",
            horizons.len()
        )));
    }
    let q = horizons[1] / horizons[0];
    let geometric = q > 1.0
        && horizons
            .windows(2)
            .all(|w| w[0] > 0.0 && ((w[1] / w[0]) / q - 1.0).abs() < 1e-9);
    if !geometric {
        return Err(Error::InvalidArgument(
            "horizons must be increasing and geometrically spaced".into(),
        ));
    }
    let probe = template.problem(horizons[0])?;
    let r = check_compatibility_linear(&probe)?;
    if r.max_abs > 1e-12 * r.scale {
        return Err(Error::Precondition(format!(
            "scaling data must satisfy f(0) = h(0) on the boundary (residual {:.3e})",
            r.max_abs
        )));
    }
    let norms: Result<Vec<f64>> = horizons
        .par_iter()
        .map(|&t| {
            let sol = solve_linear(&template.problem(t)?, template.scheme)?;
            norm.measure(&sol.u, beta)
        })
        .collect();
    let norms = norms?;
    if norms.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate("the measured norm vanishes on the ladder".into()));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    Ok(ScalingResult {
        horizons: horizons.to_vec(),
        norms,
        slope: fit_slope(&xs, &ys),
        predicted: norm.predicted_exponent(beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat(n: usize, steps: usize) -> LinearProblem {
        let grid = Grid::interval(0.0, 1.0, n).unwrap();
        LinearProblem {
            grid,
            time: TimeGrid::new(0.0, 0.5, steps).unwrap(),
            coeffs: LinearCoefficients::one_dimensional(Coef::Const(1.0), Coef::parse("2*x - 1").unwrap()),
            f: Coef::Zero,
            h: Coef::Zero,
            u0: vec![0.0; n],
        }
    }

    #[test]
    fn ellipticity_examples() {
        let g = Grid::interval(0.0, 1.0, 5).unwrap();
        let t = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let c = LinearCoefficients::one_dimensional(1.0.into(), 1.0.into());
        assert_eq!(check_ellipticity(&c, &g, &t).unwrap(), 1.0);

        let s = Grid::strip(1.0, 1.0, 4, 4).unwrap();
        let c = LinearCoefficients {
            a_xx: 2.0.into(),
            a_yy: 1.0.into(),
            ..Default::default()
        };
        assert_eq!(check_ellipticity(&c, &s, &t).unwrap(), 1.0);
        let c = LinearCoefficients {
            a_xx: 1.0.into(),
            a_xy: 0.9.into(),
            a_yy: 1.0.into(),
            ..Default::default()
        };
        assert!((check_ellipticity(&c, &s, &t).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn transversality_examples() {
        let g = Grid::interval(0.0, 1.0, 5).unwrap();
        let t = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let c = LinearCoefficients::one_dimensional(1.0.into(), 1.0.into());
        assert_eq!(check_transversality(&c, &g, &t).unwrap(), -1.0);
        let c = LinearCoefficients::one_dimensional(1.0.into(), Coef::parse("2*x-1").unwrap());
        assert_eq!(check_transversality(&c, &g, &t).unwrap(), 1.0);

        let s = Grid::strip(1.0, 1.0, 4, 4).unwrap();
        let c = LinearCoefficients {
            a_xx: 1.0.into(),
            a_yy: 1.0.into(),
            b_x: 3.0.into(),
            b_y: Coef::parse("2*y - 1").unwrap(),
            ..Default::default()
        };
        assert_eq!(check_transversality(&c, &s, &t).unwrap(), 1.0);
    }

    #[test]
    fn compatibility_examples() {
        let mut p = heat(11, 4);
        assert_eq!(check_compatibility_linear(&p).unwrap().max_abs, 0.0);
        p.f = Coef::Const(1.0);
        let r = check_compatibility_linear(&p).unwrap();
        assert_eq!(r.values, vec![1.0, 1.0]);
        p.f = Coef::Zero;
        p.u0 = p.grid.sample(|x| x[0] * (1.0 - x[0]));
        let r = check_compatibility_linear(&p).unwrap();
        for v in r.values {
            assert!((v + 3.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn constants_are_preserved() {
        for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
            let mut p = heat(17, 10);
            p.u0 = vec![2.5; 17];
            let s = solve_linear(&p, scheme).unwrap();
            for v in s.u.values() {
                assert!((v - 2.5).abs() < 1e-12);
            }
            assert_eq!(s.u.level(0), p.u0.as_slice());
        }
    }

    #[test]
    fn non_transversal_is_rejected() {
        let mut p = heat(9, 2);
        p.coeffs.b_x = Coef::Const(1.0);
        assert!(matches!(
            solve_linear(&p, Scheme::ImplicitEuler),
            Err(Error::Precondition(_))
        ));
        let mut p = heat(9, 2);
        p.coeffs.a_xx = Coef::Const(-1.0);
        assert!(matches!(
            solve_linear(&p, Scheme::ImplicitEuler),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn u_dependent_expression_rejected() {
        let mut p = heat(9, 2);
        p.f = Coef::parse("u").unwrap();
        assert!(p.validate().is_err());
    }

    #[test]
    fn scaling_ladder_validation() {
        let p = heat(9, 4);
        let tpl = ScalingTemplate {
            grid: p.grid,
            coeffs: p.coeffs.clone(),
            f: Coef::Const(1.0),
            h: Coef::Const(1.0),
            n_steps: 4,
            scheme: Scheme::ImplicitEuler,
        };
        let n = ScalingNorm::TimeHolderSup { theta: 0.0 };
        assert!(measure_small_time_scaling(&tpl, n, &[0.1, 0.2, 0.4], 0.5).is_err());
        assert!(measure_small_time_scaling(&tpl, n, &[0.1, 0.2, 0.3, 0.4], 0.5).is_err());
        let zero = ScalingTemplate {
            f: Coef::Zero,
            h: Coef::Zero,
            ..tpl.clone()
        };
        assert!(matches!(
            measure_small_time_scaling(&zero, n, &[0.1, 0.2, 0.4, 0.8], 0.5),
            Err(Error::Degenerate(_))
        ));
        let bad = ScalingTemplate {
            h: Coef::Zero,
            ..tpl.clone()
        };
        assert!(matches!(
            measure_small_time_scaling(&bad, n, &[0.1, 0.2, 0.4, 0.8], 0.5),
            Err(Error::Precondition(_))
        ));
        // u = t solves f = h = 1 exactly
        let r = measure_small_time_scaling(&tpl, n, &[0.1, 0.2, 0.4, 0.8], 0.5).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-10);
        assert_eq!(r.predicted, 1.0);
    }
}
