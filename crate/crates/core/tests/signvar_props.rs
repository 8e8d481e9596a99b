mod common;

use proptest::prelude::*;

use common::{s_minus_naive, s_plus_enum};
use totpos::signvar::{self, ClassHint, SignProfile, DEFAULT_ZERO_TOL as TOL};
use totpos::{tn, Matrix};

/// Vectors whose entries are drawn from a small alphabet so that zeros and
/// repeated signs are common.
fn arb_vector(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), Just(1.5), Just(-0.5), -3.0f64..3.0], 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn closed_form_matches_enumeration(y in arb_vector(14)) {
        prop_assert_eq!(signvar::s_plus(&y, TOL), s_plus_enum(&y, TOL));
        prop_assert_eq!(signvar::s_minus(&y, TOL), s_minus_naive(&y, TOL));
    }

    #[test]
    fn counts_are_ordered_and_bounded(y in arb_vector(14)) {
        let p = SignProfile::of(&y, TOL);
        prop_assert!(p.s_minus <= p.s_plus);
        prop_assert!(p.s_plus < y.len().max(1));
    }

    #[test]
    fn v_is_where_counts_agree(y in arb_vector(12)) {
        prop_assume!(y.len() >= 2);
        let p = SignProfile::of(&y, TOL);
        prop_assert_eq!(p.in_v, p.s_minus == p.s_plus);
    }

    #[test]
    fn sigma_is_locally_constant_on_v(y in arb_vector(10), noise in prop::collection::vec(-1.0f64..1.0, 10)) {
        let Some(sigma) = signvar::sigma(&y, TOL) else {
            return Ok(());
        };
        let smallest = y.iter().filter(|v| v.abs() > TOL).fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let delta = 0.49 * smallest;
        let y2: Vec<f64> = y.iter().zip(&noise).map(|(v, e)| v + delta * e).collect();
        prop_assert_eq!(signvar::s_minus(&y2, TOL), sigma);
        prop_assert_eq!(signvar::s_plus(&y2, TOL), sigma);
    }

    #[test]
    fn scaling_and_reversal_invariance(y in arb_vector(12), c in 0.1f64..10.0) {
        let scaled: Vec<f64> = y.iter().map(|v| -c * v).collect();
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        let p = SignProfile::of(&y, TOL);
        prop_assert_eq!(&SignProfile::of(&scaled, TOL), &p);
        prop_assert_eq!(&SignProfile::of(&rev, TOL), &p);
    }

    #[test]
    fn tn_products_diminish_variation(seed in any::<u64>(), x in arb_vector(6)) {
        prop_assume!(x.len() >= 2);
        let n = x.len();
        let a = tn::random_tn(n, 2 * n, seed).unwrap();
        let r = signvar::svdp_check(&a, &x, ClassHint::Tn, TOL).unwrap();
        prop_assert!(r.passed);
        prop_assert!(r.hint_verified);
    }
}

#[test]
fn n_equals_one_is_outside_v_at_zero() {
    // A single zero entry has s- = s+ = 0 but a zero endpoint.
    let p = SignProfile::of(&[0.0], TOL);
    assert_eq!((p.s_minus, p.s_plus, p.in_v), (0, 0, false));
    assert!(SignProfile::of(&[3.0], TOL).in_v);
}

#[test]
fn profile_json_uses_v_key() {
    let text = serde_json::to_string(&SignProfile::of(&[1.0, -1.0], TOL)).unwrap();
    assert_eq!(text, r#"{"s_minus":1,"s_plus":1,"in_V":true,"sigma":1}"#);
}

#[test]
fn hint_is_checked() {
    let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
    assert!(signvar::svdp_check(&bad, &[1.0, -1.0], ClassHint::Tn, TOL).is_err());
    let big = Matrix::identity(8);
    let r = signvar::svdp_check(&big, &[1.0; 8], ClassHint::TnNonsingular, TOL).unwrap();
    assert!(!r.hint_verified && r.passed);
}
