use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use facs::corpus::{self, SystemParams};
use facs::oracle::{bfs_reach, prefix_length, replay, replay_witness, BfsVerdict, ReplayOutcome};
use facs::schema::{enumerate_schemas, IteratedPathSchema};
use facs::solver::{reach, validate_ips, ReachOutcome, RunWitness, SolverOptions, Validation};
use facs::system::StateId;

const TERMINAL: usize = 40;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn validation_matches_replay(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let s = corpus::random_flat_system(&mut rng, &SystemParams::default());
        let init = corpus::random_init(&mut rng, &s, 3);
        let schemas: Vec<_> = enumerate_schemas(&s, StateId(0)).unwrap().take(32).collect();
        let Some(schema) = schemas.choose(&mut rng).cloned() else { return Ok(()) };
        let counts: Vec<BigUint> = schema
            .prefix()
            .iter()
            .map(|e| BigUint::from(if e.is_cycle() { rng.gen_range(1u32..=6) } else { 1 }))
            .collect();
        let ips = IteratedPathSchema::new(schema.clone(), counts.clone()).unwrap();
        let steps = prefix_length(schema.prefix(), &counts).to_usize().unwrap();
        let k = schema.terminal().len();
        let replayed = replay(&s, &init, schema.elements(), &counts, TERMINAL, 1_000_000).unwrap();
        match validate_ips(&s, &init, &ips, 10_000).unwrap() {
            Validation::Invalid { step, rule } => {
                let step = step.to_usize().unwrap();
                if step < steps + TERMINAL * k {
                    prop_assert_eq!(replayed, ReplayOutcome::GuardFail { step, rule });
                } else {
                    prop_assert!(matches!(replayed, ReplayOutcome::Ok(_)));
                }
            }
            Validation::Valid { exit } => {
                let ReplayOutcome::Ok(trace) = replayed else {
                    return Err(TestCaseError::fail(format!("valid schema failed replay: {replayed:?}")));
                };
                prop_assert_eq!(&trace[steps], &exit);
            }
        }
    }

    #[test]
    fn reach_is_sound_against_bfs(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let s = corpus::random_flat_system(&mut rng, &SystemParams::default()).complete_deadlock_free();
        let init = corpus::random_init(&mut rng, &s, 3);
        let target = StateId(rng.gen_range(0..s.states().len()));
        let bfs = bfs_reach(&s, &init, target, 24, 24);
        match reach(&s, &init, target, SolverOptions::default()).unwrap() {
            ReachOutcome::Unreachable => prop_assert_eq!(bfs, BfsVerdict::Exhausted),
            ReachOutcome::Reachable(w) => {
                let out = replay_witness(&s, &init, &w, 3, 1_000_000).unwrap();
                let ReplayOutcome::Ok(trace) = out else {
                    return Err(TestCaseError::fail(format!("witness fails: {out:?}")));
                };
                prop_assert!(trace.iter().any(|c| c.state == target));
                prop_assert!(w.ips.counts().iter().all(|c| c <= w.certificate.as_ref().unwrap()));
                let back = RunWitness::from_json(&s, &w.to_json(&s)).unwrap();
                prop_assert_eq!(back.ips, w.ips);
            }
        }
    }
}
