mod common;

use common::{coefficient_row, minor_rank, q, scalar, table};
use foliage::scalar::{q_rank, Sign, SymScalar, DEFAULT_PRECISION_CEILING};
use proptest::prelude::*;

fn coeffs(width: usize) -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-20i64..=20, 1i64..=9), width)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn addition_laws(a in coeffs(5), b in coeffs(5), c in coeffs(5)) {
        let t = table(4);
        let (a, b, c) = (scalar(&t, &a), scalar(&t, &b), scalar(&t, &c));
        prop_assert_eq!((a.clone() + b.clone()) + c.clone(), a.clone() + (b + c));
        prop_assert_eq!(a.clone() + SymScalar::zero(), a.clone());
        prop_assert!((a.clone() + (-a)).is_zero());
    }

    #[test]
    fn sign_is_antisymmetric(a in coeffs(5)) {
        let t = table(4);
        let a = scalar(&t, &a);
        let s = a.sign(&t, DEFAULT_PRECISION_CEILING).unwrap();
        prop_assert_eq!(s == Sign::Zero, a.is_zero());
        prop_assert_eq!((-a).sign(&t, DEFAULT_PRECISION_CEILING).unwrap(), -s);
    }

    #[test]
    fn q_rank_matches_minor_oracle(
        vals in prop::collection::vec(prop::collection::vec((-3i64..=3, 1i64..=3), 5), 0..=6)
    ) {
        let t = table(4);
        let xs: Vec<SymScalar> = vals.iter().map(|c| scalar(&t, c)).collect();
        let rows: Vec<_> = xs.iter().map(|x| coefficient_row(x, 5)).collect();
        prop_assert_eq!(q_rank(&xs), minor_rank(&rows));
    }

    #[test]
    fn q_rank_ignores_order_and_scale(
        vals in prop::collection::vec(coeffs(5), 1..=6),
        scales in prop::collection::vec((1i64..=7, 1i64..=7, any::<bool>()), 6),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let t = table(4);
        let xs: Vec<SymScalar> = vals.iter().map(|c| scalar(&t, c)).collect();
        let mut ys: Vec<SymScalar> = xs
            .iter()
            .zip(&scales)
            .map(|(x, &(n, d, neg))| x.scale(&q(if neg { -n } else { n }, d)))
            .collect();
        ys.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(q_rank(&xs), q_rank(&ys));
    }
}

#[test]
fn rank_examples() {
    let t = table(2);
    assert_eq!(q_rank(&[scalar(&t, &[(1, 1)]), scalar(&t, &[(2, 1)])]), 1);
    assert_eq!(q_rank(&[scalar(&t, &[(0, 1), (1, 1)]), scalar(&t, &[(0, 1), (0, 1), (1, 1)])]), 2);
    assert_eq!(q_rank(&[]), 0);
}
