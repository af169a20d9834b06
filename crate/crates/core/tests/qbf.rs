use proptest::prelude::*;

use facs::corpus;
use facs::qbfgen::{build_reduction, parse_qbf, qbf_valid};
use facs::solver::{reach, ReachOutcome, SolverOptions};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reduction_decides_validity(seed in any::<u64>()) {
        let phi = corpus::random_qbf(&mut corpus::rng(seed), 3, 3, 4, 3);
        let r = build_reduction(&phi);
        prop_assert!(r.system.is_flat());
        r.system.require_finite_monoid(10_000).unwrap();
        let s = r.system.complete_deadlock_free();
        let got = reach(&s, &r.init, r.target, SolverOptions::default()).unwrap();
        prop_assert_eq!(matches!(got, ReachOutcome::Reachable(_)), qbf_valid(&phi).unwrap(), "{}", phi);
    }

    #[test]
    fn qdimacs_round_trip(seed in any::<u64>()) {
        let phi = corpus::random_qbf(&mut corpus::rng(seed), 4, 4, 5, 4);
        prop_assert_eq!(parse_qbf(&phi.to_string()).unwrap(), phi);
    }
}
