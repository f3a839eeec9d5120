//! Gaussian tail against quadrature and asymptotic oracles.

use ascc_core::numerics::{log_q, log_q_derivative, q_function, tangent_l1, tangent_l2, tangent_l3};
use proptest::prelude::*;

/// `∫_x^{x+12} φ(t) dt` by composite Simpson; the omitted tail is below
/// `1e-30` relative for `x >= 0`.
fn simpson_q(x: f64) -> f64 {
    let n = 200_000;
    let b = x + 12.0;
    let h = (b - x) / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(x) + phi(b);
    for i in 1..n {
        let t = x + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(t);
    }
    s * h / 3.0
}

#[test]
fn matches_quadrature_on_central_range() {
    for x in [0.0, 0.3, 1.0, 1.7, 2.5, 4.0, 6.0, 7.9] {
        let q = q_function(x).unwrap();
        let oracle = simpson_q(x);
        assert!((q - oracle).abs() <= 1e-12 * oracle, "x={x}: {q} vs {oracle}");
    }
}

#[test]
fn ninety_fifth_percentile() {
    let q = q_function(1.644_853_626_951_472_2).unwrap();
    assert!((q - 0.05).abs() < 1e-15);
}

#[test]
fn deep_tail_log() {
    // ln Q(10) from the complementary error function tabulated to 20 digits
    let oracle = -53.231_285_150_512_47;
    assert!((log_q(10.0).unwrap() - oracle).abs() < 1e-12);
    // asymptotic expansion, relative error below 1e-9 at x = 40
    let x: f64 = 40.0;
    let series = -0.5 * x * x - (x * (2.0 * std::f64::consts::PI).sqrt()).ln()
        + (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4) - 15.0 / x.powi(6)).ln();
    assert!((log_q(x).unwrap() - series).abs() < 1e-9 * series.abs());
}

#[test]
fn tail_switch_is_continuous() {
    for x in [-8.0, 8.0] {
        let (a, b) = (log_q(x - 1e-9).unwrap(), log_q(x + 1e-9).unwrap());
        assert!((a - b).abs() < 1e-7 * a.abs().max(1e-300) + 1e-15);
    }
}

#[test]
fn non_finite_input_is_rejected() {
    assert!(log_q(f64::NAN).is_err());
    assert!(q_function(f64::INFINITY).is_err());
}

proptest! {
    #[test]
    fn q_is_a_tail_probability(x in -40.0..40.0f64) {
        let q = q_function(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!((q + q_function(-x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_differences(x in -5.0..20.0f64) {
        let h = 1e-5;
        let fd = (log_q(x + h).unwrap() - log_q(x - h).unwrap()) / (2.0 * h);
        let d = log_q_derivative(x).unwrap();
        prop_assert!(d < 0.0);
        prop_assert!((d - fd).abs() <= 1e-6 * d.abs());
    }

    #[test]
    fn log_q_is_concave(x in -20.0..30.0f64, h in 1e-3..1.0f64) {
        let d2 = log_q(x + h).unwrap() - 2.0 * log_q(x).unwrap() + log_q(x - h).unwrap();
        prop_assert!(d2 <= 1e-10);
    }

    #[test]
    fn tangents_bound_their_functions(x0 in 0.0..10.0f64, y0 in -10.0..10.0f64, x in 0.0..10.0f64, y in -10.0..10.0f64) {
        prop_assert!(tangent_l1(x0, y0, x, y) <= (x + y).powi(2) + 1e-9);
        prop_assert!(tangent_l2(x0, y0, x, y) <= (x - y).powi(2) + 1e-9);
        prop_assert!(tangent_l3(x0, x) >= -1.0 / (1.0 + x).powi(2) - 1e-12);
    }
}
