use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valdyn_core::arith::{int, rat_sqrt, QuadElem};
use valdyn_core::cusp::{induced_skeleton_map, rotation_number, validate_alpha, CuspData};
use valdyn_core::dynamics::SkeletonMap;
use valdyn_core::valuation::QMValuation;

const RATIONAL_STEPS: usize = 100_000;
const IRRATIONAL_STEPS: usize = 1000;

fn cusps() -> Vec<CuspData> {
    vec![
        CuspData::new(vec![4, 2], 1).unwrap(),
        CuspData::new(vec![2, 2, 3], 1).unwrap(),
        CuspData::new(vec![3], 2).unwrap(),
    ]
}

/// A valid `α`: either a random lattice element `x + y ω` or an integer times a power of `ε_ω`.
fn random_alpha(rng: &mut impl Rng, c: &CuspData) -> QuadElem {
    loop {
        let alpha = if rng.gen_bool(0.3) {
            let n = int(rng.gen_range(1..=4));
            c.vertex_sequence(c.r() as i64).pow(rng.gen_range(0..=2)).scale(&n)
        } else {
            let (x, y) = (int(rng.gen_range(0..=6)), int(rng.gen_range(0..=4)));
            c.omega().scale(&y).checked_add(&c.omega().lift_rat(x)).unwrap()
        };
        if !alpha.is_zero() && validate_alpha(&alpha, c).unwrap().ok {
            return alpha;
        }
    }
}

/// Steps until the orbit of the first prime comes back, if it does within `limit`.
fn return_time(f: &SkeletonMap, limit: usize) -> Option<usize> {
    let g = f.graph();
    let start = QMValuation::vertex(g, 0).canonical(g);
    let mut cur = start.clone();
    for n in 1..=limit {
        cur = f.apply(&cur).unwrap().image.canonical(g);
        if cur == start {
            return Some(n);
        }
    }
    None
}

#[test]
fn vertex_sequence_is_unit_equivariant() {
    for c in cusps().into_iter().chain([CuspData::new(vec![5, 2, 3], 1).unwrap()]) {
        let r = c.r() as i64;
        let eps = c.vertex_sequence(r);
        assert!(eps.is_unit() && eps.is_totally_positive(), "{:?}", c.cycle());
        for n in -10..10 {
            assert_eq!(c.vertex_sequence(n + r), eps.checked_mul(&c.vertex_sequence(n)).unwrap(), "{:?} n={n}", c.cycle());
        }
    }
}

#[test]
fn integers_rotate_by_zero() {
    for c in cusps() {
        for n in 1..=5 {
            let rot = rotation_number(&c.omega().lift_rat(int(n)), &c).unwrap();
            assert_eq!(rot.rational, Some(int(0)));
            assert!(rot.beta.abs() < 1e-12);
        }
    }
}

#[test]
fn rotation_agrees_with_orbit_periodicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut rational, mut irrational) = (0, 0);
    for c in cusps() {
        let mut tried = 0;
        while tried < 6 {
            let alpha = random_alpha(&mut rng, &c);
            let rot = rotation_number(&alpha, &c).unwrap();
            let f = induced_skeleton_map(&alpha, &c).unwrap();
            match rot.rational {
                Some(_) => {
                    assert!(return_time(&f, RATIONAL_STEPS).is_some(), "{alpha} on {:?} should close up", c.cycle());
                    rational += 1;
                }
                None => {
                    if irrational >= 6 {
                        continue;
                    }
                    assert_eq!(return_time(&f, IRRATIONAL_STEPS), None, "{alpha} on {:?} returned", c.cycle());
                    irrational += 1;
                }
            }
            tried += 1;
        }
    }
    assert!(rational >= 3 && irrational >= 3, "{rational} rational, {irrational} irrational");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sector_determinants_are_the_degree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in cusps() {
            let alpha = random_alpha(&mut rng, &c);
            let q = alpha.field_norm();
            let f = induced_skeleton_map(&alpha, &c).unwrap();
            for sec in f.sectors() {
                prop_assert_eq!(int(sec.det()), q.clone());
            }
        }
    }

    #[test]
    fn dynamical_degree_is_root_of_the_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in cusps() {
            let alpha = random_alpha(&mut rng, &c);
            let q = alpha.field_norm();
            let lambda = induced_skeleton_map(&alpha, &c).unwrap().dynamical_degree().unwrap();
            let expected: Vec<BigInt> = match rat_sqrt(&q) {
                Some(root) => vec![BigInt::from(1), -root.to_integer()],
                None => vec![BigInt::from(1), BigInt::from(0), -q.to_integer()],
            };
            prop_assert_eq!(&lambda.minpoly, &expected);
            let approx: f64 = q.to_integer().to_string().parse::<f64>().unwrap().sqrt();
            prop_assert!((lambda.approx - approx).abs() < 1e-9 * approx);
        }
    }

    #[test]
    fn degree_is_multiplicative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in cusps() {
            let (a, b) = (random_alpha(&mut rng, &c), random_alpha(&mut rng, &c));
            let ab = a.checked_mul(&b).unwrap();
            let check = validate_alpha(&ab, &c).unwrap();
            prop_assert!(check.ok);
            prop_assert_eq!(check.degree, a.field_norm() * b.field_norm());
            let (ra, rb, rab) = (rotation_number(&a, &c).unwrap(), rotation_number(&b, &c).unwrap(), rotation_number(&ab, &c).unwrap());
            prop_assert!((rab.beta - ra.beta - rb.beta).abs() < 1e-9);
            if let (Some(x), Some(y)) = (&ra.rational, &rb.rational) {
                prop_assert_eq!(rab.rational.clone(), Some(x + y));
            }
        }
    }
}

#[test]
fn rational_alpha_has_rational_rotation() {
    for c in cusps() {
        let eps = c.vertex_sequence(c.r() as i64);
        for k in 0..3u32 {
            let rot = rotation_number(&eps.pow(k).scale(&int(3)), &c).unwrap();
            assert!(rot.rational.is_some(), "{:?} k={k}", c.cycle());
        }
    }
}
