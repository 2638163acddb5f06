use num_bigint::BigInt;
use num_traits::Signed;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valdyn_core::arith::{rat, QuadElem, Rat};

fn elem(d: i64) -> impl Strategy<Value = QuadElem> {
    (-50i64..50, 1i64..6, -50i64..50, 1i64..6).prop_map(move |(an, ad, bn, bd)| QuadElem::new(rat(an, ad), rat(bn, bd), d).unwrap())
}

fn field() -> impl Strategy<Value = i64> {
    prop::sample::select(vec![2i64, 3, 5, 6, 7, 13, 15])
}

proptest! {
    #[test]
    fn norm_is_multiplicative((x, y) in field().prop_flat_map(|d| (elem(d), elem(d)))) {
        prop_assert_eq!((&x * &y).field_norm(), x.field_norm() * y.field_norm());
    }

    #[test]
    fn conj_is_a_ring_homomorphism((x, y) in field().prop_flat_map(|d| (elem(d), elem(d)))) {
        prop_assert_eq!((&x * &y).conj(), &x.conj() * &y.conj());
        prop_assert_eq!((&x + &y).conj(), &x.conj() + &y.conj());
    }

    #[test]
    fn units_have_unit_inverses(d in field(), k in 1u32..6, n in 1i64..4) {
        // powers of a known unit, times an integer that spoils the unit property when n > 1
        let base = match d {
            2 => QuadElem::parse("1+1*sqrt(2)").unwrap(),
            3 => QuadElem::parse("2+1*sqrt(3)").unwrap(),
            5 => QuadElem::new(rat(1, 2), rat(1, 2), 5).unwrap(),
            6 => QuadElem::parse("5+2*sqrt(6)").unwrap(),
            7 => QuadElem::parse("8+3*sqrt(7)").unwrap(),
            13 => QuadElem::new(rat(3, 2), rat(1, 2), 13).unwrap(),
            _ => QuadElem::parse("4+1*sqrt(15)").unwrap(),
        };
        let x = base.pow(k).scale(&Rat::from_integer(BigInt::from(n)));
        prop_assert_eq!(x.is_unit(), n == 1);
        if x.is_unit() {
            prop_assert!(x.inv().unwrap().is_unit());
        }
    }

    #[test]
    fn display_round_trips(x in field().prop_flat_map(elem)) {
        prop_assert_eq!(QuadElem::parse(&x.to_string()).unwrap(), x);
    }
}

#[test]
fn sign_agrees_with_high_precision_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fields = [2i64, 3, 5, 6, 7, 10, 11, 13];
    for _ in 0..10_000 {
        let d = fields[rng.gen_range(0..fields.len())];
        // near-cancelling pairs a ~ b sqrt(d) exercise the exact path
        let b: i64 = rng.gen_range(-10_000..10_000);
        let approx = (b.abs() as f64) * (d as f64).sqrt();
        let a: i64 = if b >= 0 { -(approx.round() as i64) } else { approx.round() as i64 } + rng.gen_range(-2..=2);
        let den: i64 = rng.gen_range(1..50);
        let x = QuadElem::new(rat(a, den), rat(b, den), d).unwrap();
        // compare a against -b sqrt(d) using 128-bit integers: sign(a + b sqrt d)
        let (a2, bd2) = ((a as i128) * (a as i128), (b as i128) * (b as i128) * d as i128);
        let expected: i8 = match (a.signum(), b.signum()) {
            (0, s) | (s, 0) => s as i8,
            (sa, sb) if sa == sb => sa as i8,
            (sa, _) => match a2.cmp(&bd2) {
                std::cmp::Ordering::Greater => sa as i8,
                std::cmp::Ordering::Less => -sa as i8,
                std::cmp::Ordering::Equal => 0,
            },
        };
        assert_eq!(x.sign(), expected, "{x}");
        if x.to_f64().abs() > 1e-6 {
            assert_eq!(x.to_f64().signum() as i8, expected, "{x}");
        }
    }
}

#[test]
fn is_integral_handles_half_integers() {
    let phi = QuadElem::new(rat(1, 2), rat(1, 2), 5).unwrap();
    assert!(phi.is_integral());
    assert!(!QuadElem::new(rat(1, 2), rat(1, 2), 3).unwrap().is_integral());
    assert!(phi.field_norm().is_negative());
}
