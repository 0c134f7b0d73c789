//! Named problems used by the command line and the test suites.
//!
//! A preset is a bundle of expression strings; any of them can be replaced
//! before the spec is built.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::geometry::Grid;
use crate::quasilinear::{InitialDatum, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    Interval {
        x_lo: f64,
        x_hi: f64,
        n: usize,
    },
    Strip {
        period: f64,
        height: f64,
        n_x: usize,
        n_y: usize,
    },
}

impl Geometry {
    pub fn grid(&self) -> Result<Grid> {
        match *self {
            Geometry::Interval { x_lo, x_hi, n } => Grid::interval(x_lo, x_hi, n),
            Geometry::Strip {
                period,
                height,
                n_x,
                n_y,
            } => Grid::strip(period, height, n_x, n_y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
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
    /// Manufactured solution linear in `t` (isolates the spatial error under
    /// implicit Euler).
    pub exact_spatial: Option<String>,
    /// Manufactured solution quadratic in the normal variable (isolates the
    /// temporal error).
    pub exact_temporal: Option<String>,
}

fn expr(name: &str, src: &str) -> Result<Expr> {
    parse(src).map_err(|e| Error::eval(format!("preset field {name} = `{src}`"), e))
}

fn opt(name: &str, src: &Option<String>) -> Result<Option<Expr>> {
    src.as_deref().map(|s| expr(name, s)).transpose()
}

impl Preset {
    pub fn spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec {
            grid: self.geometry.grid()?,
            a_xx: expr("a_xx", &self.a_xx)?,
            a_xy: opt("a_xy", &self.a_xy)?,
            a_yy: opt("a_yy", &self.a_yy)?,
            f: expr("f", &self.f)?,
            b_x: expr("b_x", &self.b_x)?,
            b_y: opt("b_y", &self.b_y)?,
            h: expr("h", &self.h)?,
            u0: InitialDatum::Expr(expr("u0", &self.u0)?),
            horizon: self.horizon,
            beta: self.beta,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Compatible data for the small-time scaling study: `f = h` so the
/// compatibility residual vanishes with `u0 = 0`, and the `|x - 1/2|^{1/2}`
/// profile keeps the data merely Hölder in space.
pub const SCALING_DATA: &str = "((x-0.5)^2)^0.25 + t";

pub const NAMES: [&str; 3] = ["heat-dynbc", "quasilinear-1+u2", "strip-tangential"];

/// `u_t = u_xx` on (0,1) with `u_t + (2x-1) u_x = 0` on the boundary.
pub fn heat_dynbc() -> Preset {
    Preset {
        name: "heat-dynbc".into(),
        geometry: Geometry::Interval {
            x_lo: 0.0,
            x_hi: 1.0,
            n: 65,
        },
        a_xx: "1".into(),
        a_xy: None,
        a_yy: None,
        f: "0".into(),
        b_x: "2*x - 1".into(),
        b_y: None,
        h: "0".into(),
        u0: "0".into(),
        horizon: 0.2,
        beta: 0.5,
        exact_spatial: Some("(1 + t)*sin(2*x + 1)".into()),
        exact_temporal: Some("exp(-t)*(1 + x^2/2)".into()),
    }
}

/// `u_t = (1 + u^2) u_xx - u u_x` with `u_t + (2x-1) u_x = h` on the boundary,
/// where `h` is the value of `(1 + u0^2) u0'' - u0 u0' + (2x-1) u0'` for
/// `u0 = sin(2x+1)`, so the data are compatible.
pub fn quasilinear_1_u2() -> Preset {
    Preset {
        name: "quasilinear-1+u2".into(),
        geometry: Geometry::Interval {
            x_lo: 0.0,
            x_hi: 1.0,
            n: 65,
        },
        a_xx: "1 + u^2".into(),
        a_xy: None,
        a_yy: None,
        f: "-u*p1".into(),
        b_x: "2*x - 1".into(),
        b_y: None,
        h: "-4*sin(2*x + 1)*(1 + sin(2*x + 1)^2) - sin(4*x + 2) + 2*(2*x - 1)*cos(2*x + 1)".into(),
        u0: "sin(2*x + 1)".into(),
        horizon: 0.04,
        beta: 0.5,
        exact_spatial: Some("(1 + t)*sin(2*x + 1)".into()),
        exact_temporal: Some("exp(-t)*(1 + x^2/2)".into()),
    }
}

/// Anisotropic operator on the periodic strip with a boundary drift that has
/// a tangential component.
pub fn strip_tangential() -> Preset {
    Preset {
        name: "strip-tangential".into(),
        geometry: Geometry::Strip {
            period: 1.0,
            height: 1.0,
            n_x: 16,
            n_y: 17,
        },
        a_xx: "1".into(),
        a_xy: Some("0.2".into()),
        a_yy: Some("0.8".into()),
        f: "0".into(),
        b_x: "1".into(),
        b_y: Some("2*y - 1".into()),
        h: "0".into(),
        u0: "0".into(),
        horizon: 0.1,
        beta: 0.5,
        exact_spatial: Some("(1 + t)*(sin(2*pi*x)*cos(y) + y^2/2)".into()),
        exact_temporal: Some("exp(-t)*(1 + y^2/2 + 0.1*sin(2*pi*x))".into()),
    }
}

pub fn by_name(name: &str) -> Option<Preset> {
    match name {
        "heat-dynbc" => Some(heat_dynbc()),
        "quasilinear-1+u2" => Some(quasilinear_1_u2()),
        "strip-tangential" => Some(strip_tangential()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for name in NAMES {
            let p = by_name(name).unwrap();
            assert_eq!(p.name, name);
            let spec = p.spec().unwrap();
            let r = crate::quasilinear::check_compatibility(&spec).unwrap();
            assert!(
                r.max_abs <= crate::linear::compat_tol(&spec.grid, 1e-3, r.scale),
                "{name}: {}",
                r.max_abs
            );
            for e in [&p.exact_spatial, &p.exact_temporal].into_iter().flatten() {
                crate::mms::ExactSolution::parse(e).unwrap();
            }
        }
        assert!(by_name("nope").is_none());
        parse(SCALING_DATA).unwrap();
    }
}
