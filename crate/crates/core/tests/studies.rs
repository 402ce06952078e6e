use itovolterra::criteria::{check_additive_conditions, Tolerances};
use itovolterra::diagnostics::{counterexample_study, ou_sharpness_study, Behavior};
use itovolterra::fixtures::{fixture, DEFAULT_SEED, SLOW_SHARP};
use itovolterra::stochastic::{
    as_tail_statistics, fubini_decomposition, generate_ensemble, lil_statistic, lil_statistic_from,
    volterra_integral, BrownianEnsemble,
};
use itovolterra::{make_exponential, BoundedFunction, Grid};

fn integer_grid(n: f64) -> Grid {
    Grid::new(1.0, n).unwrap()
}

#[test]
fn counterexample_keeps_oscillating() {
    let g = integer_grid(1e4);
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &g).unwrap();
    let h = BoundedFunction::parse(SLOW_SHARP).unwrap();
    let rep = counterexample_study(&h, &e, 10_000, 0.05).unwrap();
    assert!((0.5..=3.0).contains(&rep.median), "median {}", rep.median);
    assert!(rep.oscillation_fraction >= 0.9, "fraction {}", rep.oscillation_fraction);

    let flipped = counterexample_study(&h, &e.scaled(-1.0), 10_000, 0.05).unwrap();
    assert_eq!(rep.running_max, flipped.running_max);
    assert_eq!(rep.oscillation, flipped.oscillation);

    let v = check_additive_conditions(&h, &g, &Tolerances::default()).unwrap();
    assert!(v.msq.trend.slope.unwrap() < 0.0);
    let last = v.as_.last_value().unwrap();
    assert!((0.9..=1.1).contains(&last), "as value {last}");
}

#[test]
fn fast_decay_settles_early() {
    let g = integer_grid(2000.0);
    let e = generate_ensemble(DEFAULT_SEED, 100, 1, &g).unwrap();
    let h = BoundedFunction::parse("exp(-t)").unwrap();
    let rep = counterexample_study(&h, &e, 2000, 0.05).unwrap();
    assert!(rep.oscillation_fraction == 0.0);
    assert!(rep.median < 2.0);
}

#[test]
fn lil_statistic_of_silent_paths_is_zero() {
    let g = integer_grid(100.0);
    let e = BrownianEnsemble::from_increments(3, 1, &g, vec![0.0; 300]).unwrap();
    let r = lil_statistic(&e, 100).unwrap();
    assert!(r.per_path.iter().all(|v| *v == 0.0));
    assert!(lil_statistic(&generate_ensemble(1, 1, 1, &g).unwrap(), 101).is_err());
}

#[test]
fn lil_statistic_shrinks_with_later_start() {
    let g = integer_grid(1e4);
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &g).unwrap();
    let early = lil_statistic(&e, 10_000).unwrap().median;
    let late = lil_statistic_from(&e, 10_000, 100).unwrap().median;
    assert!(late < early);
    assert!((0.6..=1.4).contains(&late), "median from n=100: {late}");
}

#[test]
fn ou_classification() {
    let g = Grid::uniform(1.0 / 16.0, 1000.0, 160).unwrap();
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &g).unwrap();
    let tol = Tolerances::default();

    let log = ou_sharpness_study(&BoundedFunction::parse("1/sqrt(log(s+exp(1)))").unwrap(), &e, &g, &tol).unwrap();
    assert_eq!(log.behavior, Behavior::BoundedOscillating);
    assert!(log.oscillation_fraction > 0.5);
    let tail = &log.msq_curve[log.msq_curve.len() / 2..];
    let mc = tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64;
    let pred = tail.iter().map(|p| p.2).sum::<f64>() / tail.len() as f64;
    assert!((mc - pred).abs() < 0.1 * pred, "{mc} vs {pred}");

    let decay = ou_sharpness_study(&BoundedFunction::parse("exp(-s)").unwrap(), &e, &g, &tol).unwrap();
    assert_eq!(decay.behavior, Behavior::ConvergesToZero);

    let zero = ou_sharpness_study(&BoundedFunction::constant(0.0), &e, &g, &tol).unwrap();
    assert_eq!(zero.behavior, Behavior::ConvergesToZero);
}

#[test]
fn fubini_residual_is_first_order() {
    let fine = Grid::new(1.0 / 512.0, 4.0).unwrap();
    let coarse = fine.coarsened(2).unwrap();
    let k = make_exponential(BoundedFunction::constant(1.0), 1.0).unwrap();
    let f = BoundedFunction::constant(1.0);
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &fine).unwrap();
    let a = fubini_decomposition(&k, &f, &e.coarsened(2).unwrap(), &coarse).unwrap();
    let b = fubini_decomposition(&k, &f, &e, &fine).unwrap();
    let ratio = a.max_residual / b.max_residual;
    assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn multiplicative_tail_sups_shrink() {
    let g = Grid::new(1.0 / 16.0, 400.0).unwrap();
    let k = fixture("multiplicative").unwrap().kernel;
    let e = generate_ensemble(DEFAULT_SEED, 200, 1, &g).unwrap();
    let r = volterra_integral(&k, &BoundedFunction::constant(1.0), &e, &g).unwrap();
    let rep = as_tail_statistics(&r, &[(10.0, 40.0), (100.0, 400.0)], &[0.05]).unwrap();
    let fr = rep.fractions(0.05);
    assert!(fr[1] >= fr[0]);
    assert!(fr[1] > 0.9, "{fr:?}");
    assert!(rep.windows[1].median < rep.windows[0].median);
}
