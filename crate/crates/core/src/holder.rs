//! Discrete Hölder and parabolic Hölder norms of grid functions.
//!
//! Seminorms are maxima of difference quotients over node pairs (space) or
//! time-level pairs (time). Space scans are exact up to [`PAIR_BUDGET`]
//! nodes; larger grids use a deterministic stratified sample. Time scans are
//! always exact: pair separations are visited from the largest down, and the
//! scan stops once a Lipschitz bound shows no remaining pair can beat the
//! running maximum.
//!
//! Time distances are `(m - n) * dt`, not differences of stored times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::Grid;

/// Node count up to which space seminorms scan every pair.
pub const PAIR_BUDGET: usize = 4096;

const NEAR_OFFSETS: usize = 8;
const PAR_THRESHOLD: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct HolderExponent(f64);

impl HolderExponent {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta < 1.0 {
            Ok(HolderExponent(beta))
        } else {
            Err(Error::InvalidArgument(format!(
                "Hölder exponent must lie in (0,1), got {beta}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_beta(beta: f64) -> Result<()> {
    HolderExponent::new(beta).map(|_| ())
}

/// Sampled partner lists (j > i) for grids beyond the pair budget: all
/// pairs within `NEAR_OFFSETS` spacings plus all pairs of a coarse
/// fixed-stride node set (which always contains the last node).
fn sampled_rows(grid: &Grid) -> Vec<Vec<usize>> {
    let n = grid.n_nodes();
    let reach = NEAR_OFFSETS as f64 * grid.spacing() * (1.0 + 1e-12);
    let stride = n.div_ceil(1024);
    let coarse: Vec<usize> = (0..n).filter(|k| k % stride == 0 || *k == n - 1).collect();
    let mut rows: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            near_nodes(grid, i)
                .into_iter()
                .filter(|&j| j > i && grid.distance(i, j) <= reach)
                .collect()
        })
        .collect();
    for (a, &i) in coarse.iter().enumerate() {
        rows[i].extend_from_slice(&coarse[a + 1..]);
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
    }
    rows
}

fn near_nodes(grid: &Grid, k: usize) -> Vec<usize> {
    let r = NEAR_OFFSETS as isize;
    match grid {
        Grid::Interval(g) => {
            let lo = k.saturating_sub(NEAR_OFFSETS);
            let hi = (k + NEAR_OFFSETS).min(g.n_nodes - 1);
            (lo..=hi).collect()
        }
        Grid::Strip(g) => {
            let (i, j) = ((k % g.n_x) as isize, (k / g.n_x) as isize);
            let mut out = Vec::new();
            for dj in -r..=r {
                let jj = j + dj;
                if jj < 0 || jj >= g.n_y as isize {
                    continue;
                }
                for di in -r..=r {
                    let ii = (i + di).rem_euclid(g.n_x as isize);
                    out.push(jj as usize * g.n_x + ii as usize);
                }
            }
            out
        }
    }
}

/// Max over the scanned pairs of `|f_i - f_j| / d^e` for each exponent `e`
/// (exponent 0 gives the oscillation). The numerator is the max over the
/// given fields. One entry per exponent.
fn pair_maxima(fields: &[&[f64]], grid: &Grid, exps: &[f64]) -> Vec<f64> {
    let n = grid.n_nodes();
    let sampled = if n > PAIR_BUDGET {
        Some(sampled_rows(grid))
    } else {
        None
    };
    let row_max = |i: usize| -> Vec<f64> {
        let mut best = vec![0.0f64; exps.len()];
        let mut visit = |j: usize| {
            let mut num = 0.0f64;
            for f in fields {
                num = num.max((f[i] - f[j]).abs());
            }
            if num == 0.0 {
                return;
            }
            let d = grid.distance(i, j);
            for (b, &e) in best.iter_mut().zip(exps) {
                let r = if e == 0.0 { num } else { num / d.powf(e) };
                *b = b.max(r);
            }
        };
        match &sampled {
            Some(rows) => rows[i].iter().for_each(|&j| visit(j)),
            None => (i + 1..n).for_each(visit),
        }
        best
    };
    let merge = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    if n >= PAR_THRESHOLD {
        (0..n)
            .into_par_iter()
            .map(row_max)
            .reduce(|| vec![0.0; exps.len()], merge)
    } else {
        (0..n).map(row_max).fold(vec![0.0; exps.len()], merge)
    }
}

/// `[f]_beta = max |f(x) - f(y)| / |x - y|^beta` over node pairs.
pub fn space_seminorm(field: &[f64], grid: &Grid, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    grid.check_len(field)?;
    Ok(seminorm_raw(field, grid, beta))
}

pub(crate) fn seminorm_raw(field: &[f64], grid: &Grid, beta: f64) -> f64 {
    pair_maxima(&[field], grid, &[beta])[0]
}

/// Derivative fields of order exactly `m`.
fn derivative_fields(field: &[f64], grid: &Grid, m: usize) -> Result<Vec<Vec<f64>>> {
    Ok(match m {
        0 => vec![field.to_vec()],
        1 => {
            let g = grid.gradient(field)?;
            (0..grid.dim()).map(|a| g.iter().map(|d| d[a]).collect()).collect()
        }
        2 => {
            let s = grid.second_derivatives(field)?;
            let comps: &[usize] = if grid.dim() == 1 { &[0] } else { &[0, 1, 2] };
            comps.iter().map(|&a| s.iter().map(|d| d[a]).collect()).collect()
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "derivative order {m} is not supported (m <= 2)"
            )))
        }
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||f||_{C^m} = max_{|a| <= m} sup |D^a f|`.
pub fn cm_norm(field: &[f64], grid: &Grid, m: usize) -> Result<f64> {
    grid.check_len(field)?;
    let mut out = 0.0f64;
    for order in 0..=m {
        for d in derivative_fields(field, grid, order)? {
            out = out.max(max_abs(&d));
        }
    }
    Ok(out)
}

/// `||f||_{C^{m+beta}} = max(||f||_{C^m}, max_{|a| = m} [D^a f]_beta)`.
pub fn space_norm(field: &[f64], grid: &Grid, m: usize, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if m > 2 {
        return Err(Error::InvalidArgument(format!(
            "space norms of order {m} are not supported (m <= 2)"
        )));
    }
    let mut out = cm_norm(field, grid, m)?;
    for d in derivative_fields(field, grid, m)? {
        out = out.max(seminorm_raw(&d, grid, beta));
    }
    Ok(out)
}

/// The norm applied to the values of a space-time field at one time level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueNorm {
    Sup,
    C1,
    C2,
    BoundarySup,
}

/// Per-level feature vector whose max-abs is the selected norm. Every
/// selector is a max of sup norms of linear maps, so the norm of a difference
/// is the max-abs of the difference of features.
fn features(level: &[f64], grid: &Grid, sel: ValueNorm) -> Result<Vec<f64>> {
    Ok(match sel {
        ValueNorm::Sup => level.to_vec(),
        ValueNorm::BoundarySup => grid.boundary_nodes().iter().map(|b| level[b.index]).collect(),
        ValueNorm::C1 | ValueNorm::C2 => {
            let m = if sel == ValueNorm::C1 { 1 } else { 2 };
            let mut out = level.to_vec();
            for order in 1..=m {
                for d in derivative_fields(level, grid, order)? {
                    out.extend(d);
                }
            }
            out
        }
    })
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Exact max over level pairs of `|F_m - F_n|_inf / ((m - n) dt)^alpha`.
pub(crate) fn time_pair_max(feats: &[Vec<f64>], dt: f64, alpha: f64) -> f64 {
    let n = feats.len();
    if n < 2 {
        return 0.0;
    }
    let lip = (0..n - 1)
        .map(|k| diff_norm(&feats[k + 1], &feats[k]) / dt)
        .fold(0.0, f64::max);
    if lip == 0.0 {
        return 0.0;
    }
    let work = n * feats[0].len();
    let mut best = 0.0f64;
    for s in (1..n).rev() {
        let span = s as f64 * dt;
        if alpha <= 1.0 && best > 0.0 && lip * span.powf(1.0 - alpha) * (1.0 + 1e-12) < best {
            break;
        }
        let denom = span.powf(alpha);
        let scan = |k: usize| diff_norm(&feats[k + s], &feats[k]) / denom;
        let m = if work >= 1 << 16 {
            (0..n - s).into_par_iter().map(scan).reduce(|| 0.0, f64::max)
        } else {
            (0..n - s).map(scan).fold(0.0, f64::max)
        };
        best = best.max(m);
    }
    best
}

fn level_features(field: &SpaceTimeField, sel: ValueNorm) -> Result<Vec<Vec<f64>>> {
    let grid = *field.grid();
    let levels: Vec<&[f64]> = field.levels().collect();
    levels.par_iter().map(|l| features(l, &grid, sel)).collect()
}

/// `[u]_{C^alpha(I; X)}` with `X` the selected value norm.
pub fn time_holder_seminorm(field: &SpaceTimeField, alpha: f64, sel: ValueNorm) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time Hölder exponent must be non-negative, got {alpha}"
        )));
    }
    if field.n_levels() < 2 {
        return Err(Error::InvalidArgument("need at least two time levels".into()));
    }
    let feats = level_features(field, sel)?;
    Ok(time_pair_max(&feats, field.time().dt, alpha))
}

/// `sup_t ||u(t)||_X`.
pub fn sup_in_time(field: &SpaceTimeField, sel: ValueNorm) -> Result<f64> {
    Ok(level_features(field, sel)?
        .iter()
        .map(|f| max_abs(f))
        .fold(0.0, f64::max))
}

/// `||u||_{C^alpha(I; X)} = max(sup_t ||u(t)||_X, [u]_{C^alpha(I; X)})`.
pub fn time_holder_norm(field: &SpaceTimeField, alpha: f64, sel: ValueNorm) -> Result<f64> {
    let feats_sup = sup_in_time(field, sel)?;
    Ok(feats_sup.max(time_holder_seminorm(field, alpha, sel)?))
}

/// `sup_t ||u(t)||_{C^{m+beta}}`, the norm of `B(I; C^{m+beta})`.
pub fn bounded_in_time_norm(field: &SpaceTimeField, m: usize, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let grid = *field.grid();
    let levels: Vec<&[f64]> = field.levels().collect();
    let norms: Result<Vec<f64>> = levels.par_iter().map(|l| space_norm(l, &grid, m, beta)).collect();
    Ok(norms?.into_iter().fold(0.0, f64::max))
}

/// Discrete `C^{alpha,beta}(I x Omega)` norm: the larger of the time-Hölder
/// norm with sup values and `sup_t ||u(t)||_{C^beta}`.
pub fn parabolic_norm(field: &SpaceTimeField, alpha: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let time_part = time_holder_norm(field, alpha, ValueNorm::Sup)?;
    Ok(time_part.max(bounded_in_time_norm(field, 0, beta)?))
}

/// The Picard distance
/// `||U - V||_{C^{beta/2}(I; C^1)} + ||U - V||_{B(I; C^{1+beta})}`.
pub fn picard_metric(u: &SpaceTimeField, v: &SpaceTimeField, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let w = u.sub(v)?;
    if w.n_levels() < 2 {
        return Err(Error::InvalidArgument("need at least two time levels".into()));
    }
    Ok(time_holder_norm(&w, beta / 2.0, ValueNorm::C1)? + bounded_in_time_norm(&w, 1, beta)?)
}

/// Returns `([f]_beta, [f]_beta0^(1-theta) [f]_beta1^theta, theta)` over one
/// pair set. `beta0` may be 0 (oscillation).
pub fn interpolation_check(field: &[f64], grid: &Grid, beta0: f64, beta: f64, beta1: f64) -> Result<(f64, f64, f64)> {
    if !(0.0 <= beta0 && beta0 < beta && beta < beta1 && beta1 < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= beta0 < beta < beta1 < 1, got ({beta0}, {beta}, {beta1})"
        )));
    }
    grid.check_len(field)?;
    let theta = (beta - beta0) / (beta1 - beta0);
    let m = pair_maxima(&[field], grid, &[beta0, beta, beta1]);
    Ok((m[1], m[0].powf(1.0 - theta) * m[2].powf(theta), theta))
}

/// Norms of a discrete solution mirroring the left side of the linear a
/// priori estimate, plus the elementary components they are built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub beta: f64,
    pub sup_norm: f64,
    pub c1_norm: f64,
    pub c2_norm: f64,
    /// `sup_t [u(t)]_beta`
    pub holder_seminorm: f64,
    /// `sup_t ||u(t)||_{C^{2+beta}}`
    pub c2_beta_norm: f64,
    /// `||D_t u||_{C^{beta/2}(I; C)}` with `D_t u` as forward differences
    pub dt_time_holder: f64,
    /// `||u||_{C^{1+beta/2, 2+beta}}`
    pub parabolic_norm: f64,
    /// `||u||_{C^{beta/2}(I; C^2)}`
    pub time_holder_c2: f64,
    /// `||u||_{C^{(1+beta)/2}(I; C^1)}`
    pub time_holder_c1: f64,
    /// `||D_t u|_{boundary}||_{B(I; C^{1+beta}(boundary))}`
    pub boundary_dt_norm: f64,
}

impl NormReport {
    pub const FIELDS: [&'static str; 11] = [
        "beta",
        "sup_norm",
        "c1_norm",
        "c2_norm",
        "holder_seminorm",
        "c2_beta_norm",
        "dt_time_holder",
        "parabolic_norm",
        "time_holder_c2",
        "time_holder_c1",
        "boundary_dt_norm",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.beta,
            self.sup_norm,
            self.c1_norm,
            self.c2_norm,
            self.holder_seminorm,
            self.c2_beta_norm,
            self.dt_time_holder,
            self.parabolic_norm,
            self.time_holder_c2,
            self.time_holder_c1,
            self.boundary_dt_norm,
        ]
    }

    pub fn record(&self) -> Vec<(&'static str, f64)> {
        Self::FIELDS.iter().copied().zip(self.values()).collect()
    }

    /// Builds the report from `u` and the boundary trace of its discrete time
    /// derivative (one vector per step, ordered as `grid.boundary_nodes()`).
    pub fn compute(u: &SpaceTimeField, boundary_dt: &[Vec<f64>], beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if u.n_levels() < 2 {
            return Err(Error::InvalidArgument("need at least two time levels".into()));
        }
        let grid = *u.grid();
        let dt_field = forward_difference(u)?;
        let dt_sup = dt_field.max_abs();
        let dt_semi = if dt_field.n_levels() >= 2 {
            time_holder_seminorm(&dt_field, beta / 2.0, ValueNorm::Sup)?
        } else {
            0.0
        };
        let dt_time_holder = dt_sup.max(dt_semi);
        let c2_beta_norm = bounded_in_time_norm(u, 2, beta)?;
        let holder_seminorm = u.levels().map(|l| seminorm_raw(l, &grid, beta)).fold(0.0, f64::max);
        Ok(NormReport {
            beta,
            sup_norm: u.max_abs(),
            c1_norm: sup_in_time(u, ValueNorm::C1)?,
            c2_norm: sup_in_time(u, ValueNorm::C2)?,
            holder_seminorm,
            c2_beta_norm,
            dt_time_holder,
            parabolic_norm: dt_time_holder.max(u.max_abs()).max(c2_beta_norm),
            time_holder_c2: time_holder_norm(u, beta / 2.0, ValueNorm::C2)?,
            time_holder_c1: time_holder_norm(u, (1.0 + beta) / 2.0, ValueNorm::C1)?,
            boundary_dt_norm: boundary_b_norm(&grid, boundary_dt, beta)?,
        })
    }
}

/// `(u^{n+1} - u^n) / dt` on levels `1..=N`, as a field starting at `t_1`.
pub fn forward_difference(u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let time = *u.time();
    let grid = *u.grid();
    let out_time = crate::geometry::TimeGrid::with_step(time.time(1), time.dt, (time.n_steps - 1).max(1))?;
    let mut values = Vec::with_capacity(u.n_nodes() * time.n_steps);
    for n in 1..=time.n_steps {
        let (a, b) = (u.level(n - 1), u.level(n));
        values.extend(a.iter().zip(b).map(|(x, y)| (y - x) / time.dt));
    }
    if time.n_steps == 1 {
        // a single difference: present it as a constant two-level field
        values.extend_from_within(..);
    }
    SpaceTimeField::new(grid, out_time, values)
}

/// `sup_n ||v_n||_{C^{1+beta}(boundary)}`. The interval's boundary is two
/// points, where only the sup part is present; on the strip the tangential
/// derivative along the boundary rows enters as well.
pub fn boundary_b_norm(grid: &Grid, trace: &[Vec<f64>], beta: f64) -> Result<f64> {
    let bnodes = grid.boundary_nodes();
    let mut out = 0.0f64;
    for v in trace {
        if v.len() != bnodes.len() {
            return Err(Error::FieldLength {
                expected: bnodes.len(),
                found: v.len(),
            });
        }
        out = out.max(max_abs(v));
        if let Grid::Strip(_) = grid {
            let mut full = vec![0.0; grid.n_nodes()];
            for (b, x) in bnodes.iter().zip(v) {
                full[b.index] = *x;
            }
            let dtan: Vec<f64> = grid.boundary_tangential_derivative(&full)?.unwrap_or_default();
            out = out.max(max_abs(&dtan));
            let mut semi = 0.0f64;
            for a in 0..bnodes.len() {
                for b in a + 1..bnodes.len() {
                    let d = grid.distance(bnodes[a].index, bnodes[b].index);
                    semi = semi.max((dtan[a] - dtan[b]).abs() / d.powf(beta));
                }
            }
            out = out.max(semi);
        }
    }
    Ok(out)
}
