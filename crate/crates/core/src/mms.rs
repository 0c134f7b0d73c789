//! Manufactured solutions: given `u*`, add source terms to a problem so that
//! `u*` solves it exactly, then measure convergence orders by refinement.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{add, mul, parse, sub, EvalContext, Expr, Var};
use crate::fit::fit_slope;
use crate::geometry::Grid;
use crate::quasilinear::{continue_in_time, InitialDatum, PicardConfig, ProblemSpec};

/// An exact solution with its symbolic derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub u: Expr,
    pub u_t: Expr,
    pub u_x: Expr,
    pub u_y: Expr,
    pub u_xx: Expr,
    pub u_xy: Expr,
    pub u_yy: Expr,
}

impl ExactSolution {
    pub fn new(u: Expr) -> Result<Self> {
        for v in [Var::U, Var::P1, Var::P2] {
            if u.uses(v) {
                return Err(Error::InvalidArgument(format!(
                    "exact solution `{u}` may only depend on t, x, y"
                )));
            }
        }
        let u_x = u.differentiate(Var::X);
        let u_y = u.differentiate(Var::Y);
        Ok(ExactSolution {
            u_t: u.differentiate(Var::T),
            u_xx: u_x.differentiate(Var::X),
            u_xy: u_x.differentiate(Var::Y),
            u_yy: u_y.differentiate(Var::Y),
            u_x,
            u_y,
            u,
        })
    }

    pub fn parse(src: &str) -> Result<Self> {
        let e = parse(src).map_err(|err| Error::eval(format!("parsing `{src}`"), err))?;
        ExactSolution::new(e)
    }

    pub fn value(&self, t: f64, pos: [f64; 2]) -> Result<f64> {
        self.u
            .eval(&EvalContext::at(t, pos))
            .map_err(|e| Error::eval(format!("exact solution at t={t}, x={pos:?}"), e))
    }

    /// Checks that every derivative evaluates finitely on the grid at `times`.
    pub fn check_on(&self, grid: &Grid, times: &[f64]) -> Result<()> {
        let all = [
            &self.u, &self.u_t, &self.u_x, &self.u_y, &self.u_xx, &self.u_xy, &self.u_yy,
        ];
        for &t in times {
            for k in 0..grid.n_nodes() {
                let ctx = EvalContext::at(t, grid.position(k));
                for e in all {
                    e.eval(&ctx)
                        .map_err(|err| Error::eval(format!("derivative `{e}` of the exact solution"), err))?;
                }
            }
        }
        Ok(())
    }

    fn substitute_state(&self, e: &Expr) -> Expr {
        e.substitute(Var::U, &self.u)
            .substitute(Var::P1, &self.u_x)
            .substitute(Var::P2, &self.u_y)
    }
}

/// Source terms `(g_f, g_h)` that make `exact` solve `spec`:
///
/// ```text
/// g_f = D_t u* - sum a_ij(t, x, u*, grad u*) D_ij u* - f(t, x, u*, grad u*)
/// g_h = D_t u* + sum b_j(t, x, u*) D_j u* - h(t, x, u*)
/// ```
pub fn derive_forcing(spec: &ProblemSpec, exact: &ExactSolution) -> Result<(Expr, Expr)> {
    let s = |e: &Expr| exact.substitute_state(e);
    let mut top = mul(s(&spec.a_xx), exact.u_xx.clone());
    if let Some(a) = &spec.a_xy {
        top = add(top, mul(mul(Expr::Const(2.0), s(a)), exact.u_xy.clone()));
    }
    if let Some(a) = &spec.a_yy {
        top = add(top, mul(s(a), exact.u_yy.clone()));
    }
    let g_f = sub(sub(exact.u_t.clone(), top), s(&spec.f));
    let mut drift = mul(s(&spec.b_x), exact.u_x.clone());
    if let Some(b) = &spec.b_y {
        drift = add(drift, mul(s(b), exact.u_y.clone()));
    }
    let g_h = sub(add(exact.u_t.clone(), drift), s(&spec.h));
    Ok((g_f, g_h))
}

/// `spec` with `f + g_f`, `h + g_h` and `u0 = u*(0, .)`.
pub fn augment(spec: &ProblemSpec, exact: &ExactSolution) -> Result<ProblemSpec> {
    let (g_f, g_h) = derive_forcing(spec, exact)?;
    let out = ProblemSpec {
        f: add(spec.f.clone(), g_f),
        h: add(spec.h.clone(), g_h),
        u0: InitialDatum::Expr(exact.u.substitute(Var::T, &Expr::Const(0.0))),
        ..spec.clone()
    };
    out.validate()?;
    Ok(out)
}

/// Residuals of both equations of the (augmented) spec evaluated at `u*`.
pub fn continuum_residual(spec: &ProblemSpec, exact: &ExactSolution, t: f64, pos: [f64; 2]) -> Result<(f64, f64)> {
    let c = EvalContext::at(t, pos);
    let ev = |e: &Expr| e.eval(&c).map_err(|err| Error::eval("exact solution derivative", err));
    let (u, ut, ux, uy) = (ev(&exact.u)?, ev(&exact.u_t)?, ev(&exact.u_x)?, ev(&exact.u_y)?);
    let mut sc = c;
    sc.set(Var::U, u);
    sc.set(Var::P1, ux);
    sc.set(Var::P2, uy);
    let es = |e: &Expr| e.eval(&sc).map_err(|err| Error::eval("spec expression", err));
    let mut top = es(&spec.a_xx)? * ev(&exact.u_xx)?;
    if let Some(a) = &spec.a_xy {
        top += 2.0 * es(a)? * ev(&exact.u_xy)?;
    }
    if let Some(a) = &spec.a_yy {
        top += es(a)? * ev(&exact.u_yy)?;
    }
    let interior = ut - top - es(&spec.f)?;
    let mut drift = es(&spec.b_x)? * ux;
    if let Some(b) = &spec.b_y {
        drift += es(b)? * uy;
    }
    let boundary = ut + drift - es(&spec.h)?;
    Ok((interior, boundary))
}

/// The same domain with every spacing divided by `factor`.
pub fn refine(grid: &Grid, factor: usize) -> Result<Grid> {
    match grid {
        Grid::Interval(g) => Grid::interval(g.x_lo, g.x_hi, (g.n_nodes - 1) * factor + 1),
        Grid::Strip(s) => Grid::strip(s.period, s.height, s.n_x * factor, (s.n_y - 1) * factor + 1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Order {
    Fitted(f64),
    /// Errors at roundoff on every level.
    Exact,
}

impl Order {
    pub fn value(self) -> Option<f64> {
        match self {
            Order::Fitted(v) => Some(v),
            Order::Exact => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyLevel {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub error: f64,
    /// Order between this level and the previous one.
    pub local_order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub levels: Vec<StudyLevel>,
    pub order: Order,
    /// Errors strictly decrease along the ladder.
    pub monotone: bool,
}

impl StudyResult {
    /// CSV rows `level,h,dt,error,local_order`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,h,dt,error,local_order")?;
        for l in &self.levels {
            let o = l.local_order.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", l.level, l.h, l.dt, l.error, o)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub spatial: StudyResult,
    pub temporal: StudyResult,
}

/// Roundoff floor below which a ladder is reported as exact.
const EXACT_FLOOR: f64 = 1e-10;

/// Max-node error at the final time of the continued solution of the
/// augmented problem on `grid` with step `dt`.
pub fn final_time_error(
    spec: &ProblemSpec,
    exact: &ExactSolution,
    grid: Grid,
    dt: f64,
    config: &PicardConfig,
) -> Result<f64> {
    let aug = augment(&ProblemSpec { grid, ..spec.clone() }, exact)?;
    let cfg = PicardConfig { dt, ..*config };
    let run = continue_in_time(&aug, &cfg)?;
    let u = &run.solution.u;
    let last = u.time().n_steps;
    let t = u.time().time(last);
    let mut err = 0.0f64;
    for (k, v) in u.level(last).iter().enumerate() {
        err = err.max((v - exact.value(t, grid.position(k))?).abs());
    }
    Ok(err)
}

fn summarize(samples: Vec<(f64, f64, f64)>, by_h: bool, scale: f64) -> StudyResult {
    let x = |s: &(f64, f64, f64)| if by_h { s.0 } else { s.1 };
    let mut levels = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let local_order = (i > 0 && s.2 > 0.0 && samples[i - 1].2 > 0.0)
            .then(|| (samples[i - 1].2 / s.2).ln() / (x(&samples[i - 1]) / x(s)).ln());
        levels.push(StudyLevel {
            level: i,
            h: s.0,
            dt: s.1,
            error: s.2,
            local_order,
        });
    }
    let monotone = samples.windows(2).all(|w| w[1].2 < w[0].2);
    let order = if samples.iter().all(|s| s.2 <= EXACT_FLOOR * scale) {
        Order::Exact
    } else {
        let xs: Vec<f64> = samples.iter().map(|s| x(s).ln()).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.2.max(f64::MIN_POSITIVE).ln()).collect();
        Order::Fitted(fit_slope(&xs, &ys))
    };
    StudyResult {
        levels,
        order,
        monotone,
    }
}

fn solution_scale(exact: &ExactSolution, grid: &Grid, t: f64) -> Result<f64> {
    let mut m = 1.0f64;
    for k in 0..grid.n_nodes() {
        m = m.max(exact.value(t, grid.position(k))?.abs());
    }
    Ok(m)
}

/// Refines space along `grids` with the time step held at `dt`.
pub fn spatial_study(
    spec: &ProblemSpec,
    exact: &ExactSolution,
    grids: &[Grid],
    dt: f64,
    config: &PicardConfig,
) -> Result<StudyResult> {
    if grids.len() < 3 {
        return Err(Error::InvalidArgument(
            "a refinement ladder needs at least 3 levels".into(),
        ));
    }
    let samples: Result<Vec<(f64, f64, f64)>> = grids
        .par_iter()
        .map(|g| Ok((g.spacing(), dt, final_time_error(spec, exact, *g, dt, config)?)))
        .collect();
    let scale = solution_scale(exact, &grids[0], spec.horizon)?;
    Ok(summarize(samples?, true, scale))
}

/// Refines time along `dts` on the fixed `grid`.
pub fn temporal_study(
    spec: &ProblemSpec,
    exact: &ExactSolution,
    grid: Grid,
    dts: &[f64],
    config: &PicardConfig,
) -> Result<StudyResult> {
    if dts.len() < 3 {
        return Err(Error::InvalidArgument(
            "a refinement ladder needs at least 3 levels".into(),
        ));
    }
    let samples: Result<Vec<(f64, f64, f64)>> = dts
        .par_iter()
        .map(|&dt| Ok((grid.spacing(), dt, final_time_error(spec, exact, grid, dt, config)?)))
        .collect();
    let scale = solution_scale(exact, &grid, spec.horizon)?;
    Ok(summarize(samples?, false, scale))
}

/// Spatial study at the finest step, temporal study on the finest grid.
pub fn convergence_study(
    spec: &ProblemSpec,
    exact: &ExactSolution,
    grids: &[Grid],
    dts: &[f64],
    config: &PicardConfig,
) -> Result<ConvergenceReport> {
    let finest_dt = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let finest_grid = *grids
        .iter()
        .min_by(|a, b| a.spacing().total_cmp(&b.spacing()))
        .ok_or_else(|| Error::InvalidArgument("empty grid ladder".into()))?;
    let (spatial, temporal) = rayon::join(
        || spatial_study(spec, exact, grids, finest_dt, config),
        || temporal_study(spec, exact, finest_grid, dts, config),
    );
    Ok(ConvergenceReport {
        spatial: spatial?,
        temporal: temporal?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn heat(u0: &str) -> ProblemSpec {
        ProblemSpec {
            grid: Grid::interval(0.0, 1.0, 9).unwrap(),
            a_xx: e("1"),
            a_xy: None,
            a_yy: None,
            f: e("0"),
            b_x: e("2*x-1"),
            b_y: None,
            h: e("0"),
            u0: InitialDatum::Expr(e(u0)),
            horizon: 0.1,
            beta: 0.5,
        }
    }

    fn at(expr: &Expr, t: f64, x: f64) -> f64 {
        expr.eval(&EvalContext::at(t, [x, 0.0])).unwrap()
    }

    #[test]
    fn constant_exact_solution() {
        let mut spec = heat("0");
        spec.f = e("1+u+t");
        spec.h = e("u*x");
        let ex = ExactSolution::parse("2").unwrap();
        let (g_f, g_h) = derive_forcing(&spec, &ex).unwrap();
        for (t, x) in [(0.0, 0.0), (0.3, 0.7), (1.0, 1.0)] {
            assert_eq!(at(&g_f, t, x), -(1.0 + 2.0 + t));
            assert_eq!(at(&g_h, t, x), -(2.0 * x));
        }
    }

    #[test]
    fn exponential_times_x() {
        let spec = heat("0");
        let ex = ExactSolution::parse("exp(-t)*x").unwrap();
        let (g_f, g_h) = derive_forcing(&spec, &ex).unwrap();
        for t in [0.0f64, 0.5, 2.0] {
            let et = (-t).exp();
            for x in [0.0, 0.25, 1.0] {
                assert!((at(&g_f, t, x) + et * x).abs() < 1e-15);
            }
            assert!(at(&g_h, t, 1.0).abs() < 1e-15);
            assert!((at(&g_h, t, 0.0) + et).abs() < 1e-15);
        }
    }

    #[test]
    fn augmented_residual_vanishes() {
        let mut spec = heat("0");
        spec.a_xx = e("1+u^2");
        spec.f = e("-u*p1");
        spec.h = e("sin(u)");
        let ex = ExactSolution::parse("exp(-t)*sin(2*x+1)").unwrap();
        let aug = augment(&spec, &ex).unwrap();
        for i in 0..20 {
            let (t, x) = (0.05 * i as f64, 0.37 * i as f64 % 1.0);
            let (ri, rb) = continuum_residual(&aug, &ex, t, [x, 0.0]).unwrap();
            assert!(ri.abs() < 1e-10 && rb.abs() < 1e-10, "{ri} {rb}");
        }
    }

    #[test]
    fn refine_grids() {
        let g = refine(&Grid::interval(0.0, 1.0, 9).unwrap(), 2).unwrap();
        assert_eq!(g.n_nodes(), 17);
        let s = refine(&Grid::strip(1.0, 1.0, 8, 9).unwrap(), 2).unwrap();
        match s {
            Grid::Strip(s) => assert_eq!((s.n_x, s.n_y), (16, 17)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn representable_solution_is_exact() {
        // linear in x and constant in t: every stencil is exact
        let spec = heat("0");
        let ex = ExactSolution::parse("1 + 0.5*x").unwrap();
        let grids: Vec<Grid> = [5, 9, 17]
            .iter()
            .map(|&n| Grid::interval(0.0, 1.0, n).unwrap())
            .collect();
        let cfg = PicardConfig {
            window: 0.1,
            ..Default::default()
        };
        let r = spatial_study(&spec, &ex, &grids, 0.01, &cfg).unwrap();
        assert_eq!(r.order, Order::Exact);
    }
}
