//! Expression language for `F`, winds, scalar fields and profiles, plus the
//! JSON metric specification consumed by the command line.

mod expr;
mod parser;
mod spec;

pub use expr::{BaseExpr, BinOp, ChartExpr, Env, Expr, Func, ProfileExpr, Usage, Var};
pub use parser::{parse, parse_profile};
pub use spec::{build, build_structure, preset, Built, MetricKind, MetricSpec, TransnormalSpec, PRESETS};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcalc::{Jet, JetSpace};
    use proptest::prelude::*;

    const CORPUS: [&str; 50] = [
        "sqrt(y1^2+y2^2)",
        "1/3*x2",
        "-1/3*x1",
        "x1^2+x2^2",
        "4*s",
        "1-s^2",
        "2-9*s^2",
        "sin(x1)",
        "cos(2*x1)",
        "sqrt(y1^2+sin(x1)^2*y2^2)",
        "sqrt(y1^2+cosh(x1)^2*y2^2)",
        "sqrt(y1^2+x1^2*y2^2)",
        "y1^2+sin(x2)^2*y3^2",
        "exp(x1)*y1",
        "ln(1+x1^2)",
        "abs(x1-x2)",
        "sinh(x1)^2",
        "2^3^2",
        "(2^3)^2",
        "-x1^2",
        "(-x1)^2",
        "x1-(x2-x3)",
        "x1-x2-x3",
        "x1/(x2*x3)",
        "x1/x2/x3",
        "x1*(x2+x3)",
        "pi*x1",
        "sin(pi/4)",
        "sqrt(y1^2+y2^2)+0.5*y1",
        "sqrt((y1*x2-y2*x1)^2+y1^2+y2^2)",
        "y1^4+y2^4",
        "sqrt(sqrt(y1^4+y2^4))",
        "exp(-x1^2-x2^2)",
        "1/(1+x1^2)",
        "x1^-1",
        "2*x1*x2",
        "x1*x2",
        "-s",
        "s*(1-s)",
        "cosh(x1)",
        "sqrt(y1^2+y2^2+y3^2)",
        "sqrt(y1^2+sin(x1)^2*(y2^2+sin(x2)^2*y3^2))",
        "sqrt(y1^2+sinh(x1)^2*y2^2)",
        "0.25*x1",
        "0.00000015",
        "x1+x2*x3^2",
        "(x1+x2)*x3",
        "abs(y1)+abs(y2)",
        "sin(x1)*cos(x2)-cos(x1)*sin(x2)",
        "3-2*s",
    ];

    #[test]
    fn corpus_round_trip() {
        for text in CORPUS {
            let e = parse(text, 3).unwrap_or_else(|err| panic!("{text}: {err}"));
            let printed = e.to_string();
            assert_eq!(printed, text, "printing changed {text}");
            assert_eq!(parse(&printed, 3).unwrap(), e);
        }
    }

    #[test]
    fn whitespace_is_ignored() {
        let a = parse(" sqrt( y1 ^ 2 + y2^2 ) ", 2).unwrap();
        assert_eq!(a.to_string(), "sqrt(y1^2+y2^2)");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(|v| Expr::num((v * 8.0).round() / 8.0)),
            (1usize..=2).prop_map(Expr::x),
            (1usize..=2).prop_map(Expr::y),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a / b),
                (inner.clone(), 1i32..4).prop_map(|(a, k)| a.powi(k)),
                inner.clone().prop_map(|a| -a),
                inner.clone().prop_map(Expr::sin),
                inner.clone().prop_map(|a| Expr::call(Func::Cosh, a)),
                inner.prop_map(|a| Expr::call(Func::Abs, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_expressions_reparse(e in arb_expr()) {
            let text = e.to_string();
            let back = parse(&text, 2).unwrap();
            prop_assert_eq!(back.to_string(), text);
            let (x, y) = ([0.3, -0.7], [1.1, 0.4]);
            let a = e.eval(&Env::chart(&x[..], &y[..]));
            let b = back.eval(&Env::chart(&x[..], &y[..]));
            prop_assert!(a == b || (a.is_nan() && b.is_nan()));
        }

        #[test]
        fn parse_never_panics(text in "[xy0-9sincoqrtph+*/^() .-]{0,24}") {
            let _ = parse(&text, 2);
        }

        #[test]
        fn order_zero_jets_match_plain(e in arb_expr(), x1 in -2.0f64..2.0, y1 in -2.0f64..2.0) {
            let (x, y) = ([x1, 0.5], [y1, -1.5]);
            let plain = e.eval(&Env::chart(&x[..], &y[..]));
            let space = JetSpace::get(4, 0);
            let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(&space, v)).collect();
            let yj: Vec<Jet> = y.iter().map(|&v| Jet::constant(&space, v)).collect();
            let lifted = e.eval(&Env::chart(&xj[..], &yj[..])).value();
            prop_assert!(lifted == plain || (lifted.is_nan() && plain.is_nan()));
        }
    }
}
