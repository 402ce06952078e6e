//! Acceptance battery. Prints one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Failing criteria are reported but only change the exit status under
//! `ACCEPTANCE_STRICT=1`; otherwise cargo's fail-fast would skip every
//! suite and doctest scheduled after this target.

use itovolterra::criteria::{
    check_additive_conditions, check_as_sufficient, check_equivalence, check_msq_condition,
    check_window_condition, ThetaSchedule, Tolerances, Verdict,
};
use itovolterra::diagnostics::counterexample_study;
use itovolterra::exprlang::{parse, BinOp, EvalContext, Expr, Func, Var};
use itovolterra::fixtures::{default_grid, fixture, DEFAULT_SEED, NAMES, SLOW_SHARP};
use itovolterra::quadrature::trapezoid;
use itovolterra::stochastic::{fubini_decomposition, generate_ensemble, lil_statistic, volterra_integral};
use itovolterra::{make_exponential, stats, BoundedFunction, Grid};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exp_unit() -> itovolterra::Kernel {
    make_exponential(BoundedFunction::constant(1.0), 1.0).unwrap()
}

fn isometry() -> Outcome {
    let want = 0.4908421805556329;
    let g = Grid::new(1.0 / 256.0, 2.0).unwrap().with_eval_times(&[2.0]).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let sq: Vec<f64> = pool.install(|| {
        let e = generate_ensemble(DEFAULT_SEED, 20_000, 1, &g).unwrap();
        let r = volterra_integral(&exp_unit(), &BoundedFunction::constant(1.0), &e, &g).unwrap();
        r.samples(0, 0).iter().map(|x| x * x).collect()
    });
    let secs = start.elapsed().as_secs_f64();
    let (mean, se) = (stats::mean(&sq), stats::std_error(&sq));
    let ok = (mean - want).abs() <= 3.0 * se + 0.01 && secs < 60.0;
    check(ok, format!("E[X(2)^2] = {mean:.5} +- {se:.5} vs {want:.5}, {secs:.2} s on one worker"))
}

fn quadrature_order() -> Outcome {
    let exact = (1.0 - (-4.0f64).exp()) / 2.0;
    let err = |n: usize| {
        let h = 2.0 / n as f64;
        let v: Vec<f64> = (0..=n).map(|j| (-2.0 * (2.0 - j as f64 * h)).exp()).collect();
        (trapezoid(&v, h) - exact).abs()
    };
    let ratio = err(128) / err(256);
    check((3.5..=4.5).contains(&ratio), format!("error ratio {ratio:.4}"))
}

fn soundness() -> Outcome {
    let g = default_grid();
    let tol = Tolerances::default();
    let m = check_msq_condition(&fixture("multiplicative").unwrap().kernel, &g, &tol).unwrap();
    let c = check_msq_condition(&fixture("ou-constant").unwrap().kernel, &g, &tol).unwrap();
    let mut agree = Vec::new();
    for name in NAMES {
        let eq = check_equivalence(&fixture(name).unwrap().kernel, &g, &tol).unwrap();
        agree.push(format!("{name}:{}", if eq.agree { "agree" } else { "DISAGREE" }));
    }
    let ok = m.holds() && c.fails() && agree.iter().all(|a| a.ends_with(":agree"));
    check(ok, format!("multiplicative {}, constant-volatility {}, {}", m.verdict, c.verdict, agree.join(" ")))
}

fn sufficient_battery() -> Outcome {
    let tol = Tolerances::default();
    let sched = ThetaSchedule::new(0.0, None, 0.5).unwrap();
    let decay = check_as_sufficient(&fixture("exp-decay").unwrap().kernel, &default_grid(), &sched, &tol).unwrap();
    let g = Grid::new(1.0 / 16.0, 1e4).unwrap();
    let fx = fixture("ou-log").unwrap();
    let ou = check_as_sufficient(&fx.kernel, &g, &sched, &tol).unwrap();
    let w = check_window_condition(fx.sigma.as_ref().unwrap(), &g, &tol).unwrap();
    let growth = Verdict::all([ou.derivative_growth.verdict, ou.diagonal_growth.verdict]);
    let ok = decay.overall == Verdict::Holds
        && ou.log_weighted.fails()
        && (0.8..=1.2).contains(&w.l_estimate)
        && growth == Verdict::Holds;
    check(
        ok,
        format!(
            "exp-decay overall {}; log volatility: log-weighted {}, L = {:.4}, growth (q=0) {}",
            decay.overall, ou.log_weighted.verdict, w.l_estimate, growth
        ),
    )
}

fn counterexample() -> Outcome {
    let g = Grid::new(1.0, 1e4).unwrap();
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &g).unwrap();
    let h = BoundedFunction::parse(SLOW_SHARP).unwrap();
    let rep = counterexample_study(&h, &e, 10_000, 0.05).unwrap();
    let v = check_additive_conditions(&h, &g, &Tolerances::default()).unwrap();
    let slope = v.msq.trend.slope.unwrap_or(f64::NAN);
    let as_value = v.as_.last_value().unwrap_or(f64::NAN);
    let ok = (0.5..=3.0).contains(&rep.median)
        && rep.oscillation_fraction >= 0.9
        && slope < 0.0
        && (0.9..=1.1).contains(&as_value);
    check(
        ok,
        format!(
            "median running max {:.4}, oscillating {:.1}%, msq slope {slope:.4}, as value {as_value:.4}",
            rep.median,
            100.0 * rep.oscillation_fraction
        ),
    )
}

fn fubini() -> Outcome {
    let fine = Grid::new(1.0 / 512.0, 4.0).unwrap();
    let coarse = fine.coarsened(2).unwrap();
    let f = BoundedFunction::constant(1.0);
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &fine).unwrap();
    let a = fubini_decomposition(&exp_unit(), &f, &e.coarsened(2).unwrap(), &coarse).unwrap();
    let b = fubini_decomposition(&exp_unit(), &f, &e, &fine).unwrap();
    let ratio = a.max_residual / b.max_residual;
    check(
        (1.5..=3.0).contains(&ratio),
        format!("residuals {:.3e} / {:.3e} = {ratio:.4}", a.max_residual, b.max_residual),
    )
}

fn lil() -> Outcome {
    let g = Grid::new(1.0, 1e4).unwrap();
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &g).unwrap();
    let r = lil_statistic(&e, 10_000).unwrap();
    check(
        (0.6..=1.4).contains(&r.median),
        format!("median of max over 3 <= n <= 1e4 is {:.4} (band 0.6 to 1.4)", r.median),
    )
}

fn determinism() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for workers in ["1", "8"] {
        let out = base.path().join(format!("w{workers}"));
        let args = [
            "itovolterra", "simulate", "--example", "ou-log", "--paths", "100", "--t-max", "200",
            "--seed", "7", "--quiet", "--workers", workers, "--out", out.to_str().unwrap(),
        ];
        let code = itovolterra_cli::run(args);
        if code != 0 {
            return Err(format!("simulate exited with {code}"));
        }
        csvs.push(std::fs::read(out.join("paths.csv")).unwrap());
    }
    check(csvs[0] == csvs[1], format!("paths.csv {} bytes, identical: {}", csvs[0].len(), csvs[0] == csvs[1]))
}

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
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (op, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (0..Func::ALL.len(), prop::collection::vec(inner, 2)).prop_map(|(i, mut args)| {
                let f = Func::ALL[i];
                args.truncate(f.arity());
                Expr::call(f, args)
            }),
        ]
    })
}

fn runner_config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn parser() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new(runner_config(cases));
    let trips = runner.run(&expr(), |e| {
        let printed = e.to_string();
        let back = parse(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert_eq!(&back, &e);
        Ok(())
    });
    let mut runner = TestRunner::new(runner_config(cases));
    let prec = runner.run(&(0.1f64..5.0, 0.1f64..5.0, 0.1f64..3.0), |(a, b, c)| {
        let cases = [
            (format!("{a} + {b} * {c}"), a + b * c),
            (format!("{a} - {b} - {c}"), (a - b) - c),
            (format!("{a} / {b} / {c}"), (a / b) / c),
            (format!("{a} ^ {b} ^ {c}"), a.powf(b.powf(c))),
            (format!("-{a} ^ {c}"), -(a.powf(c))),
            (format!("{a} * {b} ^ {c}"), a * b.powf(c)),
            (format!("({a} + {b}) * {c}"), (a + b) * c),
        ];
        for (src, want) in cases {
            let got = parse(&src).unwrap().eval(&EvalContext::at(0.0)).unwrap();
            let close = (got - want).abs() <= 1e-12 * want.abs().max(1.0);
            prop_assert!(close, "{} = {} vs {}", src, got, want);
        }
        Ok(())
    });
    match (trips, prec) {
        (Ok(()), Ok(())) => Ok(format!("{cases} random trees round-trip, {cases} precedence samples within 1e-12")),
        (t, p) => Err(format!("round trip {t:?}, precedence {p:?}")),
    }
}

fn theta_gate() -> Outcome {
    let k = fixture("exp-decay").unwrap().kernel;
    let g = default_grid();
    let tol = Tolerances::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for q in [0.0, 0.5, 1.0] {
        let bound = 1.0 / (1.0 + 2.0 * q);
        let at = ThetaSchedule { q, c_q: None, theta: bound };
        let inside = ThetaSchedule { q, c_q: None, theta: 0.99 * bound };
        let rejected = check_as_sufficient(&k, &g, &at, &tol).is_err();
        let accepted = check_as_sufficient(&k, &g, &inside, &tol).is_ok();
        ok &= rejected && accepted;
        notes.push(format!("q={q}: boundary rejected {rejected}, 0.99 accepted {accepted}"));
    }
    check(ok, notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("isometry", isometry),
        ("quadrature order", quadrature_order),
        ("criterion soundness", soundness),
        ("sufficient-condition battery", sufficient_battery),
        ("additive counterexample", counterexample),
        ("fubini residual rate", fubini),
        ("iterated-logarithm statistic", lil),
        ("worker-count determinism", determinism),
        ("expression parser", parser),
        ("theta gate", theta_gate),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("[PASS] {:>2} {name}: {d} ({secs:.1} s)", i + 1),
            Err(d) => {
                println!("[FAIL] {:>2} {name}: {d} ({secs:.1} s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
