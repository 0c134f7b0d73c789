use super::{add, div, func, mul, neg, pow, sub, BinOp, Expr, Func, Var};

pub(super) fn differentiate(e: &Expr, var: Var) -> Expr {
    if !e.uses(var) {
        return Expr::Const(0.0);
    }
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(differentiate(a, var)),
        Expr::Func(f, a) => {
            let da = differentiate(a, var);
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => func(Func::Cos, inner),
                Func::Cos => neg(func(Func::Sin, inner)),
                Func::Exp => func(Func::Exp, inner),
                Func::Tanh => sub(Expr::Const(1.0), pow(func(Func::Tanh, inner), 2.0)),
                Func::Sqrt => {
                    return div(da, mul(Expr::Const(2.0), func(Func::Sqrt, inner)));
                }
            };
            mul(outer, da)
        }
        Expr::Bin(op, a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2.0)),
            }
        }
        Expr::Pow(a, p) => {
            let da = differentiate(a, var);
            mul(mul(Expr::Const(*p), pow((**a).clone(), p - 1.0)), da)
        }
    }
}
