//! Arithmetic expressions over the fixed variables `t, x, y, u, p1, p2`.
//!
//! Coefficient functions, data and manufactured solutions are written as
//! strings such as `"1 + u^2"` and parsed into an [`Expr`]. Expressions can be
//! evaluated, printed back to parseable text, and differentiated
//! symbolically.

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

pub use parse::parse;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    Y,
    U,
    P1,
    P2,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::T, Var::X, Var::Y, Var::U, Var::P1, Var::P2];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::U => "u",
            Var::P1 => "p1",
            Var::P2 => "p2",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Tanh, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("function `{name}` at byte {offset} takes exactly one argument")]
    Arity { offset: usize, name: String },
    #[error("variable `{0}` is not bound")]
    Unbound(Var),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result in {0}")]
    NonFinite(&'static str),
}

/// Variable bindings; unbound variables are an error on use.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalContext {
    slots: [Option<f64>; 6],
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.slots[var.slot()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.slots[var.slot()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.slots[var.slot()]
    }

    /// Binds `t`, `x`, `y`.
    pub fn at(t: f64, pos: [f64; 2]) -> Self {
        Self::new().with(Var::T, t).with(Var::X, pos[0]).with(Var::Y, pos[1])
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite(what))
    }
}

impl Expr {
    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => ctx.get(*v).ok_or(ExprError::Unbound(*v)),
            Expr::Neg(e) => Ok(-e.eval(ctx)?),
            Expr::Func(f, e) => {
                let a = e.eval(ctx)?;
                if *f == Func::Sqrt && a < 0.0 {
                    return Err(ExprError::NonFinite("sqrt of a negative number"));
                }
                finite(f.apply(a), f.name())
            }
            Expr::Bin(op, a, b) => {
                let a = a.eval(ctx)?;
                let b = b.eval(ctx)?;
                match op {
                    BinOp::Add => finite(a + b, "+"),
                    BinOp::Sub => finite(a - b, "-"),
                    BinOp::Mul => finite(a * b, "*"),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(ExprError::DivisionByZero)
                        } else {
                            finite(a / b, "/")
                        }
                    }
                }
            }
            Expr::Pow(base, p) => {
                let b = base.eval(ctx)?;
                if b == 0.0 && *p < 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                finite(powf(b, *p), "^")
            }
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Func(_, e) | Expr::Pow(e, _) => e.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        Var::ALL.iter().copied().filter(|v| self.uses(*v)).collect()
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => neg(e.substitute(var, with)),
            Expr::Func(f, e) => func(*f, e.substitute(var, with)),
            Expr::Pow(e, p) => pow(e.substitute(var, with), *p),
            Expr::Bin(op, a, b) => bin(*op, a.substitute(var, with), b.substitute(var, with)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(e) | Expr::Func(_, e) | Expr::Pow(e, _) => 1 + e.node_count(),
            Expr::Bin(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn differentiate(&self, var: Var) -> Expr {
        diff::differentiate(self, var)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

/// `b^p`, using repeated multiplication for integer exponents so negative
/// bases are allowed there.
fn powf(b: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        b.powi(p as i32)
    } else {
        b.powf(p)
    }
}

/// Folds an operator node whose operands are all literals.
fn fold(e: Expr) -> Expr {
    let literal = match &e {
        Expr::Func(_, a) | Expr::Pow(a, _) => a.as_const().is_some(),
        Expr::Bin(_, a, b) => a.as_const().is_some() && b.as_const().is_some(),
        _ => false,
    };
    if literal {
        if let Ok(v) = e.eval(&EvalContext::new()) {
            return Expr::Const(v);
        }
    }
    e
}

pub(crate) fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        e => Expr::Neg(Box::new(e)),
    }
}

pub(crate) fn func(f: Func, e: Expr) -> Expr {
    fold(Expr::Func(f, Box::new(e)))
}

pub(crate) fn pow(e: Expr, p: f64) -> Expr {
    if p == 1.0 {
        return e;
    }
    if p == 0.0 {
        return Expr::Const(1.0);
    }
    fold(Expr::Pow(Box::new(e), p))
}

pub(crate) fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    match op {
        BinOp::Add => add(a, b),
        BinOp::Sub => sub(a, b),
        BinOp::Mul => mul(a, b),
        BinOp::Div => div(a, b),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => fold(Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => fold(Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => fold(Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (_, Some(1.0)) => a,
        (Some(0.0), _) => Expr::Const(0.0),
        _ => fold(Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))),
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest representation that round-trips exactly.
    write!(f, "{c:?}")
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => {
                f.write_str("-")?;
                match e.as_const() {
                    // "-2.0" would read back as a negative literal
                    Some(c) if !c.is_sign_negative() => write!(f, "({e})"),
                    _ => write_operand(f, e, 3),
                }
            }
            Expr::Func(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, a, b) => {
                let p = self.precedence();
                write_operand(f, a, p)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b, p + 1)
            }
            Expr::Pow(base, p) => {
                write_operand(f, base, 5)?;
                f.write_str("^")?;
                write_number(f, *p)
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, ctx: EvalContext) -> Result<f64, ExprError> {
        parse(src).unwrap().eval(&ctx)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ev("1+u^2", EvalContext::new().with(Var::U, 2.0)), Ok(5.0));
        let ctx = EvalContext::new().with(Var::X, 1.0).with(Var::Y, 0.0);
        assert_eq!(ev("x/y", ctx), Err(ExprError::DivisionByZero));
        assert_eq!(ev("x", EvalContext::new()), Err(ExprError::Unbound(Var::X)));
        let ctx = EvalContext::new().with(Var::X, -1.0);
        assert!(matches!(ev("sqrt(x)", ctx), Err(ExprError::NonFinite(_))));
        assert!(matches!(ev("x^0.5", ctx), Err(ExprError::NonFinite(_))));
        assert_eq!(ev("x^3", ctx), Ok(-1.0));
        let ctx = EvalContext::new().with(Var::X, 1000.0);
        assert!(matches!(ev("exp(x)", ctx), Err(ExprError::NonFinite(_))));
    }

    #[test]
    fn printer_round_trips() {
        for src in [
            "1 + u^2",
            "sin(3.14*x)*exp(-t)",
            "-x^2",
            "(-x)^2",
            "2*-x",
            "a",
            "x - (y - t)",
            "x / (y * t)",
            "(x + y)^-1.5",
            "-(-x)",
            "--x",
            "((x-0.5)^2)^0.25 + t",
            "1e-7 * p1 + 2.5E3*p2",
            "pi * x",
        ] {
            let Ok(e) = parse(src) else { continue };
            let printed = e.to_string();
            let again = parse(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }

    #[test]
    fn substitution_and_uses() {
        let e = parse("1 + u^2").unwrap();
        assert!(e.uses(Var::U));
        assert!(!e.uses(Var::X));
        let s = e.substitute(Var::U, &parse("sin(x)").unwrap());
        assert_eq!(s.variables(), vec![Var::X]);
        let v = s.eval(&EvalContext::new().with(Var::X, 0.3)).unwrap();
        assert!((v - (1.0 + 0.3f64.sin().powi(2))).abs() < 1e-15);
    }
}
