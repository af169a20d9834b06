//! Existential model checking: some run of the system satisfies the formula.
//!
//! Per schema, each cycle count only matters up to the formula's stuttering
//! threshold, so the solver's mode search is filtered by evaluating the
//! formula on the truncated word of each candidate count pattern.

use std::collections::HashMap;

use super::fo::{eval_fo, Fo};
use super::pltl::{eval_pltl, Pltl};
use super::LogicError;
use crate::schema::{enumerate_schemas, word_of_pattern, xi_big, LassoWord};
use crate::solver::{RunWitness, Solver, SolverOptions};
use crate::system::{Configuration, CounterSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub solver: SolverOptions,
    /// Largest stuttering threshold attempted before reporting a budget error.
    pub max_threshold: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            solver: SolverOptions::default(),
            max_threshold: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum McOutcome {
    Sat(RunWitness),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Universal {
    Holds,
    Counterexample(RunWitness),
}

fn drive(
    system: &CounterSystem,
    init: &Configuration,
    threshold: u64,
    opts: McOptions,
    check: &mut dyn FnMut(&LassoWord) -> Result<bool, LogicError>,
) -> Result<McOutcome, LogicError> {
    if threshold > opts.max_threshold {
        return Err(LogicError::Budget(format!(
            "stuttering threshold {threshold} exceeds the limit {}",
            opts.max_threshold
        )));
    }
    let solver = Solver::new(system, opts.solver)?;
    for schema in enumerate_schemas(system, init.state).map_err(crate::solver::SolverError::from)? {
        let mut memo: HashMap<Vec<u64>, bool> = HashMap::new();
        let mut failure = None;
        let mut accept = |pattern: &[u64]| {
            if let Some(&v) = memo.get(pattern) {
                return v;
            }
            let v = match check(&word_of_pattern(system, &schema, pattern)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    false
                }
            };
            memo.insert(pattern.to_vec(), v);
            v
        };
        let found = solver.find_run(init, &schema, Some(threshold), &mut accept)?;
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some(w) = found {
            let pattern = xi_big(w.ips.counts(), threshold);
            debug_assert!(check(&word_of_pattern(system, &schema, &pattern)).unwrap_or(false));
            return Ok(McOutcome::Sat(w));
        }
    }
    Ok(McOutcome::Unsat)
}

/// Whether some run from `init` satisfies `phi` at position 0.
pub fn mc_pltl(
    system: &CounterSystem,
    init: &Configuration,
    phi: &Pltl,
    opts: McOptions,
) -> Result<McOutcome, LogicError> {
    drive(system, init, phi.stutter_threshold(), opts, &mut |w| {
        Ok(eval_pltl(w, phi, 0))
    })
}

pub fn mc_fo(
    system: &CounterSystem,
    init: &Configuration,
    phi: &Fo,
    opts: McOptions,
) -> Result<McOutcome, LogicError> {
    if let Some(z) = phi.free_variables().into_iter().next() {
        return Err(LogicError::FreeVariable(z));
    }
    drive(system, init, phi.stutter_threshold(), opts, &mut |w| {
        eval_fo(w, phi)
    })
}

/// Every run satisfies `phi`: no run satisfies its negation.
pub fn mc_all_pltl(
    system: &CounterSystem,
    init: &Configuration,
    phi: &Pltl,
    opts: McOptions,
) -> Result<Universal, LogicError> {
    Ok(
        match mc_pltl(system, init, &Pltl::not(phi.clone()), opts)? {
            McOutcome::Sat(w) => Universal::Counterexample(w),
            McOutcome::Unsat => Universal::Holds,
        },
    )
}

pub fn mc_all_fo(
    system: &CounterSystem,
    init: &Configuration,
    phi: &Fo,
    opts: McOptions,
) -> Result<Universal, LogicError> {
    Ok(match mc_fo(system, init, &Fo::not(phi.clone()), opts)? {
        McOutcome::Sat(w) => Universal::Counterexample(w),
        McOutcome::Unsat => Universal::Holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::int_vec;
    use crate::logic::{parse_fo, parse_pltl};
    use crate::schema::word_of;
    use crate::solver::{validate_ips, Validation};
    use crate::system::{figure1, StateId};

    fn init() -> Configuration {
        Configuration::new(StateId(0), int_vec(&[0, 0, 0]))
    }

    fn sat(s: &CounterSystem, f: &str) -> Option<RunWitness> {
        match mc_pltl(s, &init(), &parse_pltl(f).unwrap(), McOptions::default()).unwrap() {
            McOutcome::Sat(w) => Some(w),
            McOutcome::Unsat => None,
        }
    }

    #[test]
    fn eventually_d() {
        let s = figure1();
        let w = sat(&s, "F d").expect("q3 is reachable");
        assert!(matches!(
            validate_ips(&s, &init(), &w.ips, 1000).unwrap(),
            Validation::Valid { .. }
        ));
        assert!(eval_pltl(
            &word_of(&s, &w.ips).unwrap(),
            &parse_pltl("F d").unwrap(),
            0
        ));
    }

    #[test]
    fn always_a_depends_on_completion() {
        // looping on q0 forever is a run of the plain system
        assert!(sat(&figure1(), "G a").is_some());
        let done = figure1().complete_deadlock_free();
        assert!(sat(&done, "G a").is_some());
        assert!(sat(&figure1(), "G b").is_none());
    }

    #[test]
    fn repeated_bs_then_d() {
        let s = figure1();
        // the all-ones run already shows two b's (d2 and d3 leave q1)
        let w = sat(&s, "F(b & X b) & F d").unwrap();
        assert_eq!(w.ips.counts(), &[1u32; 6].map(Into::into));
        let w = sat(&s, "F(b & X b & X X b) & F d").unwrap();
        let c = w.ips.counts();
        assert!(c[2] >= 2u32.into());
        assert_eq!(c[0], c[2]);
        assert_eq!(c[4], c[2]);
    }

    #[test]
    fn worked_properties_hold_on_all_runs() {
        let s = figure1().complete_deadlock_free();
        let f = parse_pltl("G((b & X b & F d) -> F(c & X c))").unwrap();
        assert_eq!(
            mc_all_pltl(&s, &init(), &f, McOptions::default()).unwrap(),
            Universal::Holds
        );
        let weaker = parse_pltl("G((b & F d) -> F(c & X c))").unwrap();
        assert_eq!(
            mc_all_pltl(&s, &init(), &weaker, McOptions::default()).unwrap(),
            Universal::Holds
        );
        let wrong = parse_pltl("F d").unwrap();
        assert!(matches!(
            mc_all_pltl(&s, &init(), &wrong, McOptions::default()).unwrap(),
            Universal::Counterexample(_)
        ));
    }

    #[test]
    fn fo_examples() {
        let s = figure1();
        let e = parse_fo("exists z. e(z)").unwrap();
        assert_eq!(
            mc_fo(&s, &init(), &e, McOptions::default()).unwrap(),
            McOutcome::Unsat
        );
        let d = parse_fo("exists z. d(z)").unwrap();
        assert!(matches!(
            mc_fo(&s, &init(), &d, McOptions::default()).unwrap(),
            McOutcome::Sat(_)
        ));
        let deep =
            parse_fo("exists a. exists b. exists c. exists d. exists e. exists f. exists g. p(a)")
                .unwrap();
        assert!(matches!(
            mc_fo(&s, &init(), &deep, McOptions::default()),
            Err(LogicError::Budget(_))
        ));
    }
}
