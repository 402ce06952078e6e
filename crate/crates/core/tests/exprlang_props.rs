use itovolterra::exprlang::{parse, BinOp, EvalContext, Expr, Func, Var};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Expr::num(n as f64 / 8.0)),
        (0.0f64..1e6).prop_map(Expr::num),
        Just(Expr::var(Var::T)),
        Just(Expr::var(Var::S)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (0..Func::ALL.len(), prop::collection::vec(inner, 2)).prop_map(|(i, mut args)| {
                let f = Func::ALL[i];
                args.truncate(f.arity());
                Expr::call(f, args)
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_round_trip(e in expr()) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &e, "printed as {}", printed);
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn round_trip_preserves_value(e in expr(), t in 0.0f64..10.0, s in 0.0f64..10.0) {
        let ctx = EvalContext::pair(t, s);
        let back = parse(&e.to_string()).unwrap();
        match (e.eval(&ctx), back.eval(&ctx)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn precedence_identities(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..3.0) {
        let ev = |src: &str| {
            parse(src).unwrap().eval(&EvalContext::at(0.0)).unwrap()
        };
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
        let cases = [
            (format!("{} + {} * {}", a, b, c), a + b * c),
            (format!("{} - {} - {}", a, b, c), (a - b) - c),
            (format!("{} / {} / {}", a, b, c), (a / b) / c),
            (format!("{} ^ {} ^ {}", a, b, c), a.powf(b.powf(c))),
            (format!("-{} ^ {}", a, c), -(a.powf(c))),
            (format!("{} * {} ^ {}", a, b, c), a * b.powf(c)),
            (format!("{} ^ -{}", a, c), a.powf(-c)),
            (format!("({} + {}) * {}", a, b, c), (a + b) * c),
            (format!("-{} * {}", a, b), -a * b),
        ];
        for (src, want) in cases {
            let got = ev(&src);
            prop_assert!(close(got, want), "{} = {} vs {}", src, got, want);
        }
    }
}

#[test]
fn error_offsets() {
    let e = parse("exp(t) + foo(s)").unwrap_err();
    assert_eq!(e.offset(), 9);
    let e = parse("t + q").unwrap_err();
    assert_eq!(e.offset(), 4);
    assert!(parse("min(t)").is_err());
}
