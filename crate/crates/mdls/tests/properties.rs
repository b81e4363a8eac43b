//! Property-based invariants of the multiple-double arithmetic: canonical
//! form is preserved by every operation, algebraic identities hold
//! bitwise where they should, and decimal round trips are lossless.

use mdls::md::{format_decimal, parse_decimal, round_trip_digits, MultiDouble, Precision};
use proptest::prelude::*;

fn precision() -> impl Strategy<Value = Precision> {
    prop_oneof![
        Just(Precision::Dd),
        Just(Precision::Qd),
        Just(Precision::Od),
    ]
}

/// Arbitrary normalized value: limbs at staggered scales with random
/// extra gaps, renormalized on construction.
fn value(m: Precision) -> impl Strategy<Value = MultiDouble> {
    let limbs = m.limbs();
    (
        proptest::collection::vec(-1.0f64..=1.0, limbs),
        proptest::collection::vec(0i32..30, limbs),
    )
        .prop_map(move |(vals, gaps)| {
            let mut scale = 0i32;
            let terms: Vec<f64> = vals
                .iter()
                .zip(&gaps)
                .map(|(v, g)| {
                    let t = v * (2f64).powi(scale);
                    scale -= 53 + g;
                    t
                })
                .collect();
            MultiDouble::renormalize(&terms, m).unwrap()
        })
}

/// Normalized value with ulp-adjacent limbs (no internal gaps): the
/// shape ordinary multiple-double arithmetic produces and the one the
/// decimal round-trip guarantee covers.
fn adjacent_value(m: Precision) -> impl Strategy<Value = MultiDouble> {
    let limbs = m.limbs();
    proptest::collection::vec(-1.0f64..=1.0, limbs).prop_map(move |vals| {
        let terms: Vec<f64> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| v * (2f64).powi(-53 * i as i32))
            .collect();
        MultiDouble::renormalize(&terms, m).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (MultiDouble, MultiDouble)> {
    precision().prop_flat_map(|m| (value(m), value(m)))
}

/// Non-overlap: consecutive nonzero limbs separated by at least 53 bits.
fn is_canonical(x: &MultiDouble) -> bool {
    let l = x.limbs();
    l.iter().all(|v| v.is_finite())
        && l.windows(2).all(|w| {
            w[1] == 0.0 || (w[1].abs() <= w[0].abs() * (2f64).powi(-52) && w[0] != 0.0)
        })
}

proptest! {
    #[test]
    fn ops_preserve_canonical_form((a, b) in pair()) {
        prop_assert!(is_canonical(&a.add(&b)));
        prop_assert!(is_canonical(&a.sub(&b)));
        prop_assert!(is_canonical(&a.mul(&b)));
        if !b.is_zero() {
            prop_assert!(is_canonical(&a.div(&b).unwrap()));
        }
    }

    #[test]
    fn add_and_mul_commute_bitwise((a, b) in pair()) {
        prop_assert!(a.add(&b).bits_eq(&b.add(&a)));
        prop_assert!(a.mul(&b).bits_eq(&b.mul(&a)));
    }

    #[test]
    fn identities_hold_bitwise(m in precision(), a in precision().prop_flat_map(value)) {
        let _ = m;
        let mp = a.precision();
        prop_assert!(a.add(&MultiDouble::zero(mp)).bits_eq(&a));
        prop_assert!(a.mul(&MultiDouble::one(mp)).bits_eq(&a));
        prop_assert!(a.sub(&a).is_zero());
        prop_assert!(a.neg().neg().bits_eq(&a));
    }

    // Round-trip safety is a property of ulp-adjacent values (~53m bits of
    // information); a gappy expansion can place limbs arbitrarily far
    // below the leading one and no fixed digit count covers that.
    #[test]
    fn decimal_round_trip_is_lossless(a in precision().prop_flat_map(adjacent_value)) {
        let m = a.precision();
        let s = format_decimal(&a, round_trip_digits(m));
        let back = parse_decimal(&s, m).unwrap();
        prop_assert!(back.bits_eq(&a), "{s}");
    }

    #[test]
    fn exact_power_of_two_scaling(a in precision().prop_flat_map(value)) {
        let scaled = a.scale_pow2(0.25).scale_pow2(4.0);
        prop_assert!(scaled.bits_eq(&a));
    }
}
