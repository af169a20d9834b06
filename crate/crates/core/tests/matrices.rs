use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;

use facs::corpus;
use facs::exactmat::{
    affine_pow, int_vec, mat_pow, monoid_of, power_entry_bound, vec_add, IntMatrix, MonoidVerdict,
};

fn small_matrix(n: usize) -> impl Strategy<Value = IntMatrix> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, n), n)
        .prop_map(|rows| IntMatrix::from_i64(&rows))
}

fn square() -> impl Strategy<Value = IntMatrix> {
    (1usize..=3).prop_flat_map(small_matrix)
}

fn naive_pow(a: &IntMatrix, k: u64) -> IntMatrix {
    (0..k).fold(IntMatrix::identity(a.rows()), |acc, _| acc.mul(a).unwrap())
}

proptest! {
    #[test]
    fn squaring_matches_repeated_products(a in square(), k in 0u64..12) {
        prop_assert_eq!(mat_pow(&a, &BigUint::from(k)).unwrap(), naive_pow(&a, k));
    }

    #[test]
    fn powers_add_exponents(a in square(), j in 0u64..8, k in 0u64..8) {
        let pj = a.pow_u64(j).unwrap();
        let pk = a.pow_u64(k).unwrap();
        prop_assert_eq!(pj.mul(&pk).unwrap(), a.pow_u64(j + k).unwrap());
    }

    #[test]
    fn affine_power_matches_iteration(a in small_matrix(2), b in prop::collection::vec(-3i64..=3, 2), v in prop::collection::vec(-5i64..=5, 2), k in 0u64..10) {
        let b = int_vec(&b);
        let (m, off) = affine_pow(&a, &b, &BigUint::from(k)).unwrap();
        let mut cur = int_vec(&v);
        for _ in 0..k {
            cur = vec_add(&a.mul_vec(&cur).unwrap(), &b);
        }
        prop_assert_eq!(vec_add(&m.mul_vec(&int_vec(&v)).unwrap(), &off), cur);
    }

    #[test]
    fn finite_monoids_repeat_where_reported(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let n = 1 + (seed % 3) as usize;
        let a = corpus::random_finite_monoid_matrix(&mut rng, n);
        let MonoidVerdict::Finite(info) = monoid_of(&a, 100_000).unwrap() else {
            return Err(TestCaseError::fail(format!("{a} should have a finite monoid")));
        };
        for (k, p) in info.powers.iter().enumerate() {
            prop_assert_eq!(p, &naive_pow(&a, k as u64));
        }
        let (alpha, beta) = (info.index as u64, info.period as u64);
        prop_assert_eq!(naive_pow(&a, alpha), naive_pow(&a, alpha + beta));
        for k in 0..(alpha + 3 * beta) {
            prop_assert_eq!(info.power(&BigUint::from(k)), &naive_pow(&a, k));
        }
        let bound = power_entry_bound(&a);
        for p in &info.powers[1..] {
            prop_assert!(p.entries().all(|x| x.magnitude() <= bound.magnitude()));
        }
    }

    #[test]
    fn growing_matrices_are_rejected(n in 1usize..=3, c in 2i64..=3) {
        let mut a = IntMatrix::identity(n);
        a.set(0, 0, BigInt::from(c));
        let infinite = matches!(monoid_of(&a, 100_000).unwrap(), MonoidVerdict::Infinite { .. });
        prop_assert!(infinite);
    }
}
