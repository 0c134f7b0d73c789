//! Finite-difference solvers for second-order parabolic problems whose
//! boundary values evolve by their own (dynamic) equation, together with the
//! discrete Hölder-norm calculus used to monitor them.
//!
//! * [`geometry`]: uniform interval and periodic-strip grids, stencils.
//! * [`holder`]: discrete Hölder and parabolic norms, the Picard distance.
//! * [`expr`]: coefficient expressions with symbolic differentiation.
//! * [`linear`]: the linear nonautonomous solver and its structural checks.
//! * [`quasilinear`]: frozen-coefficient Picard iteration and continuation.
//! * [`mms`]: manufactured solutions and convergence studies.
//! * [`presets`]: ready-made problems used by the CLI and the tests.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod error;
pub mod expr;
pub mod field;
pub mod fit;
pub mod geometry;
pub mod holder;
pub mod linear;
pub mod mms;
pub mod presets;
pub mod quasilinear;

pub use error::{Error, Result};
pub use expr::{parse, EvalContext, Expr, ExprError, Var};
pub use field::SpaceTimeField;
pub use geometry::{BoundaryNode, Grid, IntervalGrid, StripGrid, TimeGrid};
pub use holder::{HolderExponent, NormReport, ValueNorm};
