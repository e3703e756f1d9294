mod common;

use common::{ei_ref, erfc_ref};
use pcrx::specfun::{erfc, erfcx, expint_ei, EULER_GAMMA};
use proptest::prelude::*;

#[test]
fn erfc_matches_integral() {
    let mut x = -6.0;
    while x <= 26.0 {
        let (got, want) = (erfc(x).unwrap(), erfc_ref(x));
        assert!(
            (got - want).abs() <= 1e-12 + 1e-10 * want,
            "erfc({x}) = {got}, reference {want}"
        );
        x += 0.137;
    }
}

#[test]
fn erfc_reference_values() {
    assert!((erfc(0.27951).unwrap() - 0.69263).abs() < 1e-5);
    assert_eq!(erfc(0.0).unwrap(), 1.0);
    assert!(erfc(f64::INFINITY).is_err());
    assert!(erfc(f64::NAN).is_err());
}

#[test]
fn erfcx_is_scaled_erfc() {
    for &x in &[0.0f64, 0.4, 1.7, 3.0, 5.5, 9.0, 20.0] {
        let want = (x * x).exp() * erfc_ref(x);
        let got = erfcx(x).unwrap();
        assert!(
            (got - want).abs() <= 1e-10 * want,
            "erfcx({x}) = {got}, reference {want}"
        );
    }
    // asymptote 1/(x√π)
    let x = 1e6;
    assert!((erfcx(x).unwrap() * x * std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-11);
    assert!(erfcx(-1.0).is_err());
}

#[test]
fn ei_matches_integral() {
    let n = 120;
    for i in 0..=n {
        // log grid on [-30, -1e-6]
        let x = -(1e-6f64.ln() + (30f64.ln() - 1e-6f64.ln()) * i as f64 / n as f64).exp();
        let (got, want) = (expint_ei(x).unwrap(), ei_ref(x));
        assert!(
            (got - want).abs() <= 1e-10 * want.abs(),
            "Ei({x}) = {got}, reference {want}"
        );
    }
}

#[test]
fn ei_small_argument() {
    let x = -1e-8;
    let want = (1e-8f64).ln() + EULER_GAMMA + x;
    assert!((expint_ei(x).unwrap() - want).abs() < 1e-12);
    assert!((expint_ei(-1.0).unwrap() + 0.219_383_934_395_520_3).abs() < 1e-15);
    assert!(expint_ei(0.0).is_err());
    assert!(expint_ei(f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn erfc_is_decreasing(a in -10.0f64..30.0, b in -10.0f64..30.0) {
        let (x1, x2) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(erfc(x1).unwrap() >= erfc(x2).unwrap());
    }

    #[test]
    fn erfc_reflection(x in -6.0f64..6.0) {
        prop_assert!((erfc(x).unwrap() + erfc(-x).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ei_is_decreasing(a in -40.0f64..-1e-9, b in -40.0f64..-1e-9) {
        // Ei' = e^x / x < 0 on x < 0
        let (x1, x2) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(expint_ei(x1).unwrap() >= expint_ei(x2).unwrap());
    }
}
