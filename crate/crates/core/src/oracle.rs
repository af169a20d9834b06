//! Brute-force references: explicit-state search, step-by-step replay and
//! evaluation of formulas on long finite unrollings.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::exactmat::vec_inf_norm;
use crate::logic::{Fo, Pltl};
use crate::schema::{Element, LassoWord, PathSchema, SchemaError};
use crate::solver::RunWitness;
use crate::system::{Configuration, CounterSystem, RuleId, StateId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BfsVerdict {
    /// Rules fired along a shortest path to the target.
    Reachable(Vec<RuleId>),
    /// Inconclusive: nothing found within the budgets.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub steps: usize,
    pub values: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            steps: 64,
            values: 64,
        }
    }
}

/// Breadth-first search over configurations whose counters stay within
/// `value_budget` in absolute value, up to `step_budget` transitions.
pub fn bfs_reach(
    system: &CounterSystem,
    init: &Configuration,
    target: StateId,
    step_budget: usize,
    value_budget: u64,
) -> BfsVerdict {
    let limit = BigInt::from(value_budget);
    if vec_inf_norm(&init.values) > limit {
        return BfsVerdict::Exhausted;
    }
    if init.state == target {
        return BfsVerdict::Reachable(Vec::new());
    }
    let mut parent: HashMap<Configuration, (Configuration, RuleId)> = HashMap::new();
    let mut seen: HashSet<Configuration> = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([(init.clone(), 0usize)]);
    while let Some((c, depth)) = queue.pop_front() {
        if depth == step_budget {
            continue;
        }
        for &r in system.outgoing(c.state) {
            let rule = system.rule(r);
            if !rule.guard.holds(&c.values) {
                continue;
            }
            let next = Configuration::new(rule.target, rule.update.apply(&c.values));
            if vec_inf_norm(&next.values) > limit || seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            parent.insert(next.clone(), (c.clone(), r));
            if next.state == target {
                let mut path = vec![r];
                let mut at = c.clone();
                while let Some((p, r)) = parent.get(&at) {
                    path.push(*r);
                    at = p.clone();
                }
                path.reverse();
                return BfsVerdict::Reachable(path);
            }
            queue.push_back((next, depth + 1));
        }
    }
    BfsVerdict::Exhausted
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    /// Every configuration visited, starting with `init`.
    Ok(Vec<Configuration>),
    GuardFail {
        step: usize,
        rule: RuleId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("malformed witness: {0}")]
    Malformed(#[from] SchemaError),
    #[error("witness does not start at the initial state")]
    WrongStart,
    #[error("witness unrolls to more than {0} steps")]
    TooLong(usize),
}

/// Fires every transition of the prefix, then `terminal_iterations` rounds
/// of the terminal cycle, checking each guard.
pub fn replay(
    system: &CounterSystem,
    init: &Configuration,
    elements: &[Element],
    counts: &[BigUint],
    terminal_iterations: usize,
    max_steps: usize,
) -> Result<ReplayOutcome, OracleError> {
    let schema = PathSchema::new(system, elements.to_vec())?;
    if schema.start(system) != init.state {
        return Err(OracleError::WrongStart);
    }
    if counts.len() != schema.prefix().len() {
        return Err(SchemaError::CountLength {
            expected: schema.prefix().len(),
            found: counts.len(),
        }
        .into());
    }
    let mut word: Vec<RuleId> = Vec::new();
    for (e, c) in schema.prefix().iter().zip(counts) {
        let c = c
            .to_usize()
            .filter(|c| c.saturating_mul(e.rules().len()) <= max_steps)
            .ok_or(OracleError::TooLong(max_steps))?;
        for _ in 0..c {
            word.extend_from_slice(e.rules());
        }
        if word.len() > max_steps {
            return Err(OracleError::TooLong(max_steps));
        }
    }
    for _ in 0..terminal_iterations {
        word.extend_from_slice(schema.terminal());
    }
    let mut trace = vec![init.clone()];
    let mut cur = init.clone();
    for (step, &r) in word.iter().enumerate() {
        match system.step(&cur, r) {
            Ok(Some(next)) => {
                trace.push(next.clone());
                cur = next;
            }
            Ok(None) => return Ok(ReplayOutcome::GuardFail { step, rule: r }),
            Err(_) => return Err(SchemaError::Disconnected(step).into()),
        }
    }
    Ok(ReplayOutcome::Ok(trace))
}

pub fn replay_witness(
    system: &CounterSystem,
    init: &Configuration,
    w: &RunWitness,
    terminal_iterations: usize,
    max_steps: usize,
) -> Result<ReplayOutcome, OracleError> {
    replay(
        system,
        init,
        w.ips.schema().elements(),
        w.ips.counts(),
        terminal_iterations,
        max_steps,
    )
}

/// PLTL on `u·v^H` with the last position followed by the start of the
/// last copy, so the unrolled lasso still spells the same infinite word.
/// Until is decided by walking successors, not by a fixpoint.
pub fn brute_pltl(word: &LassoWord, phi: &Pltl, position: usize, copies: usize) -> bool {
    assert!(copies >= 1 && !word.cycle.is_empty());
    let n = word.prefix.len() + copies * word.cycle.len();
    assert!(position < n, "position beyond the unrolled horizon");
    let back = n - word.cycle.len();
    brute_table(word, n, back, phi)[position]
}

fn brute_table(w: &LassoWord, n: usize, back: usize, phi: &Pltl) -> Vec<bool> {
    let succ = |i: usize| if i + 1 < n { i + 1 } else { back };
    let sub = |f: &Pltl| brute_table(w, n, back, f);
    match phi {
        Pltl::True => vec![true; n],
        Pltl::Atom(p) => (0..n).map(|i| w.at(i).contains(p)).collect(),
        Pltl::Not(a) => sub(a).iter().map(|x| !x).collect(),
        Pltl::And(a, b) => {
            let (a, b) = (sub(a), sub(b));
            (0..n).map(|i| a[i] && b[i]).collect()
        }
        Pltl::Next(a) => {
            let a = sub(a);
            (0..n).map(|i| a[succ(i)]).collect()
        }
        Pltl::Prev(a) => {
            let a = sub(a);
            (0..n).map(|i| i > 0 && a[i - 1]).collect()
        }
        Pltl::Until(a, b) => {
            let (a, b) = (sub(a), sub(b));
            (0..n)
                .map(|i| {
                    // n steps visit every position reachable from i
                    let mut j = i;
                    for _ in 0..=n {
                        if b[j] {
                            return true;
                        }
                        if !a[j] {
                            return false;
                        }
                        j = succ(j);
                    }
                    false
                })
                .collect()
        }
        Pltl::Since(a, b) => {
            let (a, b) = (sub(a), sub(b));
            (0..n)
                .map(|i| {
                    (0..=i)
                        .rev()
                        .find(|&j| b[j])
                        .is_some_and(|j| (j + 1..=i).all(|k| a[k]))
                })
                .collect()
        }
    }
}

/// FO on the infinite word, with a quantifier at nesting depth `d` ranging
/// over the first `|u| + (d+1)·H·|v|` positions. Each deeper quantifier can
/// thus always look `H` loop copies past every position chosen so far.
pub fn brute_fo(word: &LassoWord, phi: &Fo, copies: usize) -> bool {
    let mut env: HashMap<String, usize> = HashMap::new();
    fo_rec(word, copies, 0, phi, &mut env)
}

fn fo_rec(
    w: &LassoWord,
    copies: usize,
    depth: usize,
    phi: &Fo,
    env: &mut HashMap<String, usize>,
) -> bool {
    match phi {
        Fo::True => true,
        Fo::Atom(p, z) => w.at(env[z]).contains(p),
        Fo::Less(a, b) => env[a] < env[b],
        Fo::Not(f) => !fo_rec(w, copies, depth, f, env),
        Fo::And(a, b) => fo_rec(w, copies, depth, a, env) && fo_rec(w, copies, depth, b, env),
        Fo::Exists(z, f) => {
            let n = w.prefix.len() + (depth + 1) * copies * w.cycle.len();
            let saved = env.get(z).copied();
            let mut found = false;
            for p in 0..n {
                env.insert(z.clone(), p);
                if fo_rec(w, copies, depth + 1, f, env) {
                    found = true;
                    break;
                }
            }
            match saved {
                Some(v) => env.insert(z.clone(), v),
                None => env.remove(z),
            };
            found
        }
    }
}

/// Total transitions spelled by the prefix of a witness.
pub fn prefix_length(elements: &[Element], counts: &[BigUint]) -> BigUint {
    elements
        .iter()
        .zip(counts)
        .fold(BigUint::zero(), |acc, (e, c)| {
            acc + c * BigUint::from(e.rules().len())
        })
}

/// Unit count vector, handy for replaying schemas once.
pub fn ones(len: usize) -> Vec<BigUint> {
    vec![BigUint::one(); len]
}
