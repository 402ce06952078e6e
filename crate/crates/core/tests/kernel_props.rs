use itovolterra::fixtures::builtin;
use itovolterra::{make_custom, make_exponential, BoundedFunction, Error};
use proptest::prelude::*;

proptest! {
    #[test]
    fn evaluation_outside_the_wedge_errors(t in 0.0f64..1e3, gap in 1e-9f64..1e3, neg in -1e3f64..-1e-12) {
        for fx in builtin() {
            let outside = matches!(fx.kernel.eval(t, t + gap), Err(Error::OutsideDomain { .. }));
            prop_assert!(outside);
            let negative = matches!(fx.kernel.eval(t, neg), Err(Error::OutsideDomain { .. }));
            prop_assert!(negative);
        }
    }

    #[test]
    fn fixtures_are_finite_on_the_wedge(t in 0.0f64..1e4, frac in 0.0f64..=1.0) {
        for fx in builtin() {
            let v = fx.kernel.eval(t, t * frac).unwrap().to_scalar().unwrap();
            prop_assert!(v.is_finite());
        }
    }
}

#[test]
fn expression_and_family_agree() {
    use rand::{Rng, SeedableRng};
    let built = make_exponential(BoundedFunction::constant(1.0), 1.0).unwrap();
    let expr = make_custom(1, &["exp(-(t-s))"], Some(&["0"]), Some(&["-exp(-(t-s))"])).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let t: f64 = rng.random_range(0.0..100.0);
        let s: f64 = rng.random_range(0.0..=t);
        let a = built.eval(t, s).unwrap().to_scalar().unwrap();
        let b = expr.eval(t, s).unwrap().to_scalar().unwrap();
        assert!((a - b).abs() <= 1e-12);
        let da = built.eval_d1(t, s).unwrap().to_scalar().unwrap();
        let db = expr.eval_d1(t, s).unwrap().to_scalar().unwrap();
        assert!((da - db).abs() <= 1e-12);
    }
    assert!(expr.d1_check().unwrap().consistent);
}

#[test]
fn matrix_kernel_norms() {
    let k = make_custom(2, &["1", "t", "s", "0"], Some(&["1", "0", "0", "0"]), None).unwrap();
    let h = k.eval(3.0, 2.0).unwrap();
    assert_eq!(h.frobenius_sq(), 1.0 + 9.0 + 4.0);
    assert_eq!(k.limit().unwrap().eval(5.0).unwrap().frobenius_sq(), 1.0);
}
