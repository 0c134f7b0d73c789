use dynbc::expr::{BinOp, Func};
use dynbc::geometry::TimeGrid;
use dynbc::holder::{self, ValueNorm};
use dynbc::linear::{solve_linear, Coef, LinearCoefficients, LinearProblem, Scheme};
use dynbc::{parse, EvalContext, Expr, Grid, SpaceTimeField, Var};
use proptest::prelude::*;

fn level(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn space_seminorm_is_a_seminorm(
        u in level(33), v in level(33), c in -5.0f64..5.0, shift in -5.0f64..5.0, beta in 0.05f64..0.95,
    ) {
        let g = Grid::interval(0.0, 1.0, 33).unwrap();
        let s = |f: &[f64]| holder::space_seminorm(f, &g, beta).unwrap();
        let su = s(&u);
        prop_assert!(su >= 0.0);
        let scaled: Vec<f64> = u.iter().map(|x| c * x).collect();
        prop_assert!(close(s(&scaled), c.abs() * su, 1e-12));
        let shifted: Vec<f64> = u.iter().map(|x| x + shift).collect();
        prop_assert!(close(s(&shifted), su, 1e-12));
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        prop_assert!(s(&sum) <= su + s(&v) + 1e-12 * (1.0 + su));
    }

    #[test]
    fn seminorm_grows_with_the_exponent_on_the_unit_interval(u in level(17), b1 in 0.05f64..0.9, db in 0.0f64..0.09) {
        // |x - y| <= 1, so |x - y|^{-beta} is nondecreasing in beta
        let g = Grid::interval(0.0, 1.0, 17).unwrap();
        let lo = holder::space_seminorm(&u, &g, b1).unwrap();
        let hi = holder::space_seminorm(&u, &g, b1 + db).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn strip_seminorm_is_translation_invariant_in_x(u in level(8 * 5), shift in 0usize..8) {
        let g = Grid::strip(1.0, 1.0, 8, 5).unwrap();
        let mut rolled = vec![0.0; u.len()];
        if let Grid::Strip(s) = g {
            for j in 0..5 {
                for i in 0..8 {
                    rolled[s.index((i + shift) % 8, j)] = u[s.index(i, j)];
                }
            }
        }
        let a = holder::space_seminorm(&u, &g, 0.5).unwrap();
        let b = holder::space_seminorm(&rolled, &g, 0.5).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn interpolation_inequality_holds(u in level(33), beta0 in 0.05f64..0.4, gap in 0.1f64..0.5) {
        let g = Grid::interval(0.0, 1.0, 33).unwrap();
        let beta1 = beta0 + gap;
        let beta = 0.5 * (beta0 + beta1);
        let (mid, bound, _) = holder::interpolation_check(&u, &g, beta0, beta, beta1).unwrap();
        prop_assert!(mid <= bound * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn time_holder_norm_is_homogeneous_and_dominates_sup(
        vals in prop::collection::vec(-3.0f64..3.0, 9 * 6), c in -4.0f64..4.0, alpha in 0.1f64..0.9,
    ) {
        let g = Grid::interval(0.0, 1.0, 9).unwrap();
        let t = TimeGrid::new(0.0, 0.5, 5).unwrap();
        let u = SpaceTimeField::new(g, t, vals).unwrap();
        for sel in [ValueNorm::Sup, ValueNorm::C1, ValueNorm::C2, ValueNorm::BoundarySup] {
            let n = holder::time_holder_norm(&u, alpha, sel).unwrap();
            prop_assert!(n >= holder::sup_in_time(&u, sel).unwrap());
            let ns = holder::time_holder_norm(&u.scale(c), alpha, sel).unwrap();
            prop_assert!(close(ns, c.abs() * n, 1e-12));
        }
    }

    #[test]
    fn picard_metric_is_a_metric(
        a in prop::collection::vec(-2.0f64..2.0, 9 * 4),
        b in prop::collection::vec(-2.0f64..2.0, 9 * 4),
        c in prop::collection::vec(-2.0f64..2.0, 9 * 4),
    ) {
        let g = Grid::interval(0.0, 1.0, 9).unwrap();
        let t = TimeGrid::new(0.0, 0.1, 3).unwrap();
        let f = |v: Vec<f64>| SpaceTimeField::new(g, t, v).unwrap();
        let (u, v, w) = (f(a), f(b), f(c));
        let d = |x: &SpaceTimeField, y: &SpaceTimeField| holder::picard_metric(x, y, 0.5).unwrap();
        prop_assert_eq!(d(&u, &u), 0.0);
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-12);
    }

    #[test]
    fn constants_are_preserved(c in -100.0f64..100.0, a in 0.2f64..3.0, b_scale in 0.2f64..3.0, cn in any::<bool>()) {
        let p = LinearProblem {
            grid: Grid::interval(0.0, 1.0, 17).unwrap(),
            time: TimeGrid::new(0.0, 0.1, 7).unwrap(),
            coeffs: LinearCoefficients::one_dimensional(
                Coef::parse(&format!("{a}*(1 + x*x)")).unwrap(),
                Coef::parse(&format!("{b_scale}*(2*x - 1)")).unwrap(),
            ),
            f: Coef::Zero,
            h: Coef::Zero,
            u0: vec![c; 17],
        };
        let scheme = if cn { Scheme::CrankNicolson } else { Scheme::ImplicitEuler };
        let s = solve_linear(&p, scheme).unwrap();
        for v in s.u.values() {
            prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn solutions_superpose(
        u1 in level(17), u2 in level(17), l1 in -3.0f64..3.0, l2 in -3.0f64..3.0, cn in any::<bool>(),
    ) {
        let grid = Grid::interval(0.0, 1.0, 17).unwrap();
        let time = TimeGrid::new(0.0, 0.05, 5).unwrap();
        let coeffs = LinearCoefficients {
            a_xx: Coef::parse("1 + x/2").unwrap(),
            a_x: Coef::parse("sin(x)").unwrap(),
            a_0: Coef::Const(-0.5),
            b_x: Coef::parse("2*x - 1").unwrap(),
            b_0: Coef::parse("0.3*t").unwrap(),
            ..Default::default()
        };
        let mk = |f: &str, h: &str, u0: Vec<f64>| LinearProblem {
            grid, time, coeffs: coeffs.clone(), f: Coef::parse(f).unwrap(), h: Coef::parse(h).unwrap(), u0,
        };
        let scheme = if cn { Scheme::CrankNicolson } else { Scheme::ImplicitEuler };
        let s1 = solve_linear(&mk("x*t", "cos(t)", u1.clone()), scheme).unwrap();
        let s2 = solve_linear(&mk("exp(x)", "x", u2.clone()), scheme).unwrap();
        let u12: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| l1 * a + l2 * b).collect();
        let f12 = format!("{l1}*(x*t) + {l2}*exp(x)");
        let h12 = format!("{l1}*cos(t) + {l2}*x");
        let s12 = solve_linear(&mk(&f12, &h12, u12), scheme).unwrap();
        let combo = s1.u.scale(l1).add(&s2.u.scale(l2)).unwrap();
        let scale = 1.0 + combo.max_abs();
        prop_assert!(s12.u.sub(&combo).unwrap().max_abs() <= 1e-10 * scale);
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-5.0f64..5.0).prop_map(|c| Expr::Const((c * 8.0).round() / 8.0)),
        prop_oneof![Just(Var::T), Just(Var::X), Just(Var::U), Just(Var::P1)].prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![Func::Sin, Func::Cos, Func::Tanh]),
                inner.clone()
            )
                .prop_map(|(f, e)| Expr::Func(f, Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (inner, 1u32..4).prop_map(|(e, k)| Expr::Pow(Box::new(e), k as f64)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn display_then_parse_preserves_values(e in arb_expr(), t in -1.0f64..1.0, x in -1.0f64..1.0, u in -1.0f64..1.0, p in -1.0f64..1.0) {
        let back = parse(&e.to_string()).unwrap();
        let ctx = EvalContext::new().with(Var::T, t).with(Var::X, x).with(Var::U, u).with(Var::P1, p);
        let a = e.eval(&ctx).unwrap();
        let b = back.eval(&ctx).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits(), "{} vs {}", e, back);
        prop_assert_eq!(parse(&back.to_string()).unwrap(), back);
    }

    #[test]
    fn differentiation_is_linear(a in arb_expr(), b in arb_expr(), c in -3.0f64..3.0, x in -1.0f64..1.0, u in -1.0f64..1.0) {
        let ctx = EvalContext::new().with(Var::T, 0.3).with(Var::X, x).with(Var::U, u).with(Var::P1, 0.2);
        let combined = (Expr::constant(c) * a.clone() + b.clone()).differentiate(Var::U);
        let lhs = combined.eval(&ctx).unwrap();
        let rhs = c * a.differentiate(Var::U).eval(&ctx).unwrap() + b.differentiate(Var::U).eval(&ctx).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn substitution_commutes_with_evaluation(e in arb_expr(), s in arb_expr(), x in -1.0f64..1.0, u in -1.0f64..1.0) {
        let ctx = EvalContext::new().with(Var::T, 0.1).with(Var::X, x).with(Var::U, u).with(Var::P1, -0.4);
        let sv = s.eval(&ctx).unwrap();
        let direct = e.substitute(Var::U, &s).eval(&ctx).unwrap();
        let staged = e.eval(&ctx.with(Var::U, sv)).unwrap();
        prop_assert!(close(direct, staged, 1e-12), "{} vs {}", direct, staged);
    }
}
