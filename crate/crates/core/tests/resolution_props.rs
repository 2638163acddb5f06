mod common;

use common::*;
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valdyn_core::arith::{int, Rat};
use valdyn_core::resolution::{inverse, to_rat_matrix, Singularity};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_basis_is_negative_and_inverts(seed in any::<u64>()) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let m = g.intersection_matrix();
        let n = g.len();
        for i in 0..n {
            let col = g.dual(i);
            prop_assert!(col.iter().all(|x| *x < Rat::zero()));
            for j in 0..n {
                let dot = (0..n).fold(Rat::zero(), |acc, k| acc + int(m[j][k]) * &col[k]);
                prop_assert_eq!(dot, if i == j { int(1) } else { int(0) });
            }
        }
    }

    #[test]
    fn disconnected_blocks_have_zero_cross_terms(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_graph(&mut rng, 4), random_graph(&mut rng, 4));
        let n = a.len() + b.len();
        let mut m = vec![vec![0i64; n]; n];
        for (off, g) in [(0, &a), (a.len(), &b)] {
            for (i, row) in g.intersection_matrix().iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    m[off + i][off + j] = *x;
                }
            }
        }
        let inv = inverse(&to_rat_matrix(&m)).unwrap();
        for i in 0..n {
            for j in 0..n {
                let same = (i < a.len()) == (j < a.len());
                prop_assert!(inv[i][j] <= Rat::zero());
                prop_assert_eq!(inv[i][j] < Rat::zero(), same);
            }
        }
    }

    #[test]
    fn efh_inequality_with_equality_cases(seed in any::<u64>()) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 7);
        let inv = g.dual_basis();
        let n = g.len();
        for e in 0..n {
            for f in 0..n {
                let comp = component_without(&g, e, f);
                for h in 0..n {
                    let lhs = &inv[e][f] * &inv[e][h];
                    let rhs = &inv[e][e] * &inv[f][h];
                    prop_assert!(lhs <= rhs);
                    prop_assert_eq!(lhs == rhs, e == f || e == h || !comp[h]);
                }
            }
        }
    }

    #[test]
    fn free_blowup_adds_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 6);
        let e = rng.gen_range(0..g.len());
        let g2 = g.blowup_free(g.id(e)).unwrap();
        let (old, new) = (&g.canonical_coeffs().a_div, &g2.canonical_coeffs().a_div);
        prop_assert_eq!(&new[g2.len() - 1], &(&old[e] + int(1)));
        prop_assert_eq!(g2.b(g2.len() - 1), g.b(e));
        // untouched primes keep their discrepancy
        for i in 0..g.len() {
            prop_assert_eq!(&new[i], &old[i]);
        }
    }

    #[test]
    fn satellite_blowup_adds_ends(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 6);
        prop_assume!(!g.edges().is_empty());
        let k = rng.gen_range(0..g.edges().len());
        let (a, b) = g.edges()[k];
        let g2 = g.blowup_satellite(k).unwrap();
        let (old, new) = (&g.canonical_coeffs().a_div, &g2.canonical_coeffs().a_div);
        prop_assert_eq!(&new[g2.len() - 1], &(&old[a] + &old[b]));
        prop_assert_eq!(g2.b(g2.len() - 1), g.b(a) + g.b(b));
    }
}

#[test]
fn nonpositive_discrepancies_on_lc_fixtures() {
    for name in ["cusp_322", "cusp_42", "ex_elliptic", "ex_cusp_flow", "chain_22", "ex_divisorial"] {
        let g = fixture(name).graph;
        let class = g.classify_singularity().unwrap();
        if matches!(class, Singularity::CyclicQuotient | Singularity::OtherQuotient) {
            continue;
        }
        let a = &g.canonical_coeffs().a_norm;
        for v in g.essential_skeleton() {
            assert!(a[v] <= Rat::zero(), "{name}: A_norm({}) = {}", g.id(v), a[v]);
        }
    }
}
