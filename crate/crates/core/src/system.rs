//! Affine counter systems: control graph, guards, updates and step semantics.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::cycleanalysis::compose_cycle;
use crate::exactmat::{self, IntMatrix, MonoidInfo, MonoidVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("rule {rule} leaves {expected}, but the configuration is in {found}")]
    WrongSourceState {
        rule: String,
        expected: String,
        found: String,
    },
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("unknown rule {0}")]
    UnknownRule(String),
    #[error("duplicate state id {0}")]
    DuplicateState(String),
    #[error("duplicate rule id {0}")]
    DuplicateRule(String),
    #[error("system is not flat: {0}")]
    NotFlat(NonFlatWitness),
    #[error("cycle {cycle:?} does not have a finite monoid ({verdict})")]
    NotFiniteMonoid { cycle: Vec<String>, verdict: String },
    #[error("dimension-0 systems admit only trivial guards (rule {0})")]
    GuardInKripkeStructure(String),
}

/// One inequality `coeffs · x <= bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GuardRow {
    pub coeffs: Vec<BigInt>,
    pub bound: BigInt,
}

impl GuardRow {
    pub fn new(coeffs: Vec<BigInt>, bound: BigInt) -> Self {
        GuardRow { coeffs, bound }
    }

    pub fn from_i64(coeffs: &[i64], bound: i64) -> Self {
        GuardRow::new(exactmat::int_vec(coeffs), BigInt::from(bound))
    }

    pub fn holds(&self, v: &[BigInt]) -> bool {
        exactmat::dot(&self.coeffs, v) <= self.bound
    }
}

/// Conjunction of inequalities; the empty conjunction is ⊤.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Guard {
    rows: Vec<GuardRow>,
}

impl Guard {
    pub fn top() -> Self {
        Guard { rows: Vec::new() }
    }

    pub fn new(rows: Vec<GuardRow>) -> Self {
        Guard { rows }
    }

    /// `coeffs · x >= bound`, stored as its negation.
    pub fn at_least(coeffs: &[i64], bound: i64) -> Self {
        let neg: Vec<i64> = coeffs.iter().map(|c| -c).collect();
        Guard::new(vec![GuardRow::from_i64(&neg, -bound)])
    }

    /// `coeffs · x = bound` as two opposing rows.
    pub fn equal(coeffs: &[i64], bound: i64) -> Self {
        let mut g = Guard::new(vec![GuardRow::from_i64(coeffs, bound)]);
        g.rows.extend(Guard::at_least(coeffs, bound).rows);
        g
    }

    pub fn and(mut self, other: Guard) -> Self {
        self.rows.extend(other.rows);
        self
    }

    pub fn rows(&self) -> &[GuardRow] {
        &self.rows
    }

    pub fn is_top(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn holds(&self, v: &[BigInt]) -> bool {
        self.rows.iter().all(|r| r.holds(v))
    }

    /// Index of the first failing row.
    pub fn first_violation(&self, v: &[BigInt]) -> Option<usize> {
        self.rows.iter().position(|r| !r.holds(v))
    }
}

/// `v -> matrix · v + offset`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineUpdate {
    pub matrix: IntMatrix,
    pub offset: Vec<BigInt>,
}

impl AffineUpdate {
    pub fn new(matrix: IntMatrix, offset: Vec<BigInt>) -> Self {
        AffineUpdate { matrix, offset }
    }

    pub fn identity(n: usize) -> Self {
        AffineUpdate::new(IntMatrix::identity(n), exactmat::zero_vec(n))
    }

    pub fn translation(b: &[i64]) -> Self {
        AffineUpdate::new(IntMatrix::identity(b.len()), exactmat::int_vec(b))
    }

    pub fn dimension(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        let mut out = self.matrix.mul_vec(v).expect("dimension checked");
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        out
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &AffineUpdate) -> AffineUpdate {
        let matrix = self.matrix.mul(&first.matrix).expect("dimension checked");
        AffineUpdate::new(matrix, self.apply(&first.offset))
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_identity() && self.offset.iter().all(Zero::is_zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRule {
    pub name: String,
    pub source: StateId,
    pub target: StateId,
    pub guard: Guard,
    pub update: AffineUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlState {
    pub name: String,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub state: StateId,
    pub values: Vec<BigInt>,
}

impl Configuration {
    pub fn new(state: StateId, values: Vec<BigInt>) -> Self {
        Configuration { state, values }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonFlatWitness {
    pub state: String,
    pub first: Vec<String>,
    pub second: Vec<String>,
}

impl fmt::Display for NonFlatWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "state {} lies on cycles [{}] and [{}]",
            self.state,
            self.first.join(" "),
            self.second.join(" ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flatness {
    Flat,
    NotFlat(NonFlatWitness),
}

/// Monoid data for one simple cycle, listed in canonical rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleMonoid {
    pub cycle: Vec<RuleId>,
    pub info: MonoidInfo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonoidReport {
    Finite(Vec<CycleMonoid>),
    NotFinite {
        cycle: Vec<RuleId>,
        verdict: MonoidVerdict,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterSystem {
    dimension: usize,
    states: Vec<ControlState>,
    rules: Vec<TransitionRule>,
    out_rules: Vec<Vec<RuleId>>,
}

impl CounterSystem {
    pub fn new(
        dimension: usize,
        states: Vec<ControlState>,
        rules: Vec<TransitionRule>,
    ) -> Result<Self, SystemError> {
        let mut seen = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if seen.insert(s.name.clone(), i).is_some() {
                return Err(SystemError::DuplicateState(s.name.clone()));
            }
        }
        let mut seen_rules = HashMap::new();
        let mut out_rules = vec![Vec::new(); states.len()];
        for (i, r) in rules.iter().enumerate() {
            if seen_rules.insert(r.name.clone(), i).is_some() {
                return Err(SystemError::DuplicateRule(r.name.clone()));
            }
            for s in [r.source, r.target] {
                if s.0 >= states.len() {
                    return Err(SystemError::UnknownState(format!("#{}", s.0)));
                }
            }
            let dim_err = |what: &str, found: usize| SystemError::DimensionMismatch {
                what: format!("rule {} {what}", r.name),
                expected: dimension,
                found,
            };
            if r.update.matrix.rows() != dimension {
                return Err(dim_err("matrix rows", r.update.matrix.rows()));
            }
            if r.update.matrix.cols() != dimension {
                return Err(dim_err("matrix columns", r.update.matrix.cols()));
            }
            if r.update.offset.len() != dimension {
                return Err(dim_err("offset", r.update.offset.len()));
            }
            for row in r.guard.rows() {
                if row.coeffs.len() != dimension {
                    return Err(dim_err("guard row", row.coeffs.len()));
                }
            }
            if dimension == 0 && !r.guard.is_top() {
                return Err(SystemError::GuardInKripkeStructure(r.name.clone()));
            }
            out_rules[r.source.0].push(RuleId(i));
        }
        Ok(CounterSystem {
            dimension,
            states,
            rules,
            out_rules,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn states(&self) -> &[ControlState] {
        &self.states
    }

    pub fn rules(&self) -> &[TransitionRule] {
        &self.rules
    }

    pub fn state(&self, id: StateId) -> &ControlState {
        &self.states[id.0]
    }

    pub fn rule(&self, id: RuleId) -> &TransitionRule {
        &self.rules[id.0]
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = RuleId> {
        (0..self.rules.len()).map(RuleId)
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn outgoing(&self, s: StateId) -> &[RuleId] {
        &self.out_rules[s.0]
    }

    pub fn state_by_name(&self, name: &str) -> Result<StateId, SystemError> {
        self.states
            .iter()
            .position(|s| s.name == name)
            .map(StateId)
            .ok_or_else(|| SystemError::UnknownState(name.to_string()))
    }

    pub fn rule_by_name(&self, name: &str) -> Result<RuleId, SystemError> {
        self.rules
            .iter()
            .position(|r| r.name == name)
            .map(RuleId)
            .ok_or_else(|| SystemError::UnknownRule(name.to_string()))
    }

    pub fn rule_names(&self, ids: &[RuleId]) -> Vec<String> {
        ids.iter().map(|&r| self.rule(r).name.clone()).collect()
    }

    pub fn labels(&self, s: StateId) -> &BTreeSet<String> {
        &self.states[s.0].labels
    }

    fn check_config(&self, config: &Configuration, rule: RuleId) -> Result<(), SystemError> {
        if config.values.len() != self.dimension {
            return Err(SystemError::DimensionMismatch {
                what: "configuration".into(),
                expected: self.dimension,
                found: config.values.len(),
            });
        }
        let r = self
            .rules
            .get(rule.0)
            .ok_or_else(|| SystemError::UnknownRule(format!("#{}", rule.0)))?;
        if r.source != config.state {
            return Err(SystemError::WrongSourceState {
                rule: r.name.clone(),
                expected: self.state(r.source).name.clone(),
                found: self
                    .states
                    .get(config.state.0)
                    .map_or_else(|| format!("#{}", config.state.0), |s| s.name.clone()),
            });
        }
        Ok(())
    }

    /// Fires `rule`; `Ok(None)` means the guard refused.
    pub fn step(
        &self,
        config: &Configuration,
        rule: RuleId,
    ) -> Result<Option<Configuration>, SystemError> {
        self.check_config(config, rule)?;
        let r = self.rule(rule);
        if !r.guard.holds(&config.values) {
            return Ok(None);
        }
        Ok(Some(Configuration::new(
            r.target,
            r.update.apply(&config.values),
        )))
    }

    /// Fires `rule` without looking at its guard.
    pub fn pseudo_step(
        &self,
        config: &Configuration,
        rule: RuleId,
    ) -> Result<Configuration, SystemError> {
        self.check_config(config, rule)?;
        let r = self.rule(rule);
        Ok(Configuration::new(r.target, r.update.apply(&config.values)))
    }

    fn sccs(&self) -> Vec<usize> {
        // Kosaraju on the control graph.
        let n = self.states.len();
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        for s in 0..n {
            if visited[s] {
                continue;
            }
            let mut stack = vec![(s, 0usize)];
            visited[s] = true;
            while let Some((v, i)) = stack.pop() {
                if i < self.out_rules[v].len() {
                    stack.push((v, i + 1));
                    let t = self.rule(self.out_rules[v][i]).target.0;
                    if !visited[t] {
                        visited[t] = true;
                        stack.push((t, 0));
                    }
                } else {
                    order.push(v);
                }
            }
        }
        let mut rev = vec![Vec::new(); n];
        for r in &self.rules {
            rev[r.target.0].push(r.source.0);
        }
        let mut comp = vec![usize::MAX; n];
        let mut c = 0;
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = c;
            while let Some(v) = stack.pop() {
                for &u in &rev[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = c;
                        stack.push(u);
                    }
                }
            }
            c += 1;
        }
        comp
    }

    /// Rules from `s` that stay inside its strongly connected component.
    fn internal_out_rules(&self, comp: &[usize], s: usize) -> Vec<RuleId> {
        self.out_rules[s]
            .iter()
            .copied()
            .filter(|&r| comp[self.rule(r).target.0] == comp[s])
            .collect()
    }

    /// Shortest rule path from `from` to `to` inside one component.
    fn path_within(&self, comp: &[usize], from: usize, to: usize) -> Vec<RuleId> {
        let mut pred: HashMap<usize, RuleId> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = vec![false; self.states.len()];
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for r in self.internal_out_rules(comp, v) {
                let t = self.rule(r).target.0;
                if !seen[t] {
                    seen[t] = true;
                    pred.insert(t, r);
                    queue.push_back(t);
                }
            }
        }
        let mut path = Vec::new();
        let mut v = to;
        while v != from {
            let r = pred[&v];
            path.push(r);
            v = self.rule(r).source.0;
        }
        path.reverse();
        path
    }

    /// A state lying on two distinct simple cycles has two rules leaving it
    /// inside its component; conversely, if no state does, every non-trivial
    /// component is a single cycle.
    pub fn check_flat(&self) -> Flatness {
        let comp = self.sccs();
        for s in 0..self.states.len() {
            let internal = self.internal_out_rules(&comp, s);
            if internal.len() >= 2 {
                let cycle_via = |r: RuleId| {
                    let mut c = vec![r];
                    c.extend(self.path_within(&comp, self.rule(r).target.0, s));
                    self.rule_names(&c)
                };
                return Flatness::NotFlat(NonFlatWitness {
                    state: self.states[s].name.clone(),
                    first: cycle_via(internal[0]),
                    second: cycle_via(internal[1]),
                });
            }
        }
        Flatness::Flat
    }

    pub fn is_flat(&self) -> bool {
        self.check_flat() == Flatness::Flat
    }

    /// The unique simple cycle starting at each state, for flat systems.
    pub fn cycle_table(&self) -> Result<CycleTable, SystemError> {
        if let Flatness::NotFlat(w) = self.check_flat() {
            return Err(SystemError::NotFlat(w));
        }
        let comp = self.sccs();
        let mut cycles = vec![None; self.states.len()];
        for (s, slot) in cycles.iter_mut().enumerate() {
            let internal = self.internal_out_rules(&comp, s);
            if let Some(&first) = internal.first() {
                let mut c = vec![first];
                let mut v = self.rule(first).target.0;
                while v != s {
                    let next = self.internal_out_rules(&comp, v)[0];
                    c.push(next);
                    v = self.rule(next).target.0;
                }
                *slot = Some(c);
            }
        }
        Ok(CycleTable { cycles })
    }

    /// Per-cycle finiteness of the power monoid of the composed matrix.
    pub fn check_finite_monoid(&self, cap: usize) -> Result<MonoidReport, SystemError> {
        let table = self.cycle_table()?;
        let mut out = Vec::new();
        for cycle in table.distinct_cycles() {
            let cu = compose_cycle(self, &cycle).expect("cycle from table is non-empty");
            let verdict = exactmat::monoid_of(&cu.matrix, cap).expect("square");
            match verdict {
                MonoidVerdict::Finite(info) => out.push(CycleMonoid { cycle, info }),
                other => {
                    return Ok(MonoidReport::NotFinite {
                        cycle,
                        verdict: other,
                    })
                }
            }
        }
        Ok(MonoidReport::Finite(out))
    }

    /// Fails with [`SystemError::NotFiniteMonoid`] unless every cycle is fine.
    pub fn require_finite_monoid(&self, cap: usize) -> Result<Vec<CycleMonoid>, SystemError> {
        match self.check_finite_monoid(cap)? {
            MonoidReport::Finite(v) => Ok(v),
            MonoidReport::NotFinite { cycle, verdict } => Err(SystemError::NotFiniteMonoid {
                cycle: self.rule_names(&cycle),
                verdict: match verdict {
                    MonoidVerdict::Capped { iterations } => {
                        format!("inconclusive after {iterations} powers")
                    }
                    MonoidVerdict::Infinite { power, .. } => {
                        format!("power {power} breaks the finite-monoid bounds")
                    }
                    MonoidVerdict::Finite(_) => unreachable!(),
                },
            }),
        }
    }

    /// Every state has an outgoing rule guarded by ⊤.
    pub fn is_deadlock_free_completed(&self) -> bool {
        self.state_ids().all(|s| {
            self.outgoing(s)
                .iter()
                .any(|&r| self.rule(r).guard.is_top())
        })
    }

    /// Adds a fresh sink with an identity self-loop plus an identity escape
    /// from every original state.
    pub fn complete_deadlock_free(&self) -> CounterSystem {
        let mut sink = "sink".to_string();
        while self.states.iter().any(|s| s.name == sink) {
            sink.push('_');
        }
        let fresh_rule = |base: String| {
            let mut name = base;
            while self.rules.iter().any(|r| r.name == name) {
                name.push('_');
            }
            name
        };
        let sink_id = StateId(self.states.len());
        let mut states = self.states.clone();
        states.push(ControlState {
            name: sink.clone(),
            labels: BTreeSet::new(),
        });
        let mut rules = self.rules.clone();
        let id = AffineUpdate::identity(self.dimension);
        rules.push(TransitionRule {
            name: fresh_rule(format!("{sink}_loop")),
            source: sink_id,
            target: sink_id,
            guard: Guard::top(),
            update: id.clone(),
        });
        for (i, s) in self.states.iter().enumerate() {
            rules.push(TransitionRule {
                name: fresh_rule(format!("{}_to_{sink}", s.name)),
                source: StateId(i),
                target: sink_id,
                guard: Guard::top(),
                update: id.clone(),
            });
        }
        CounterSystem::new(self.dimension, states, rules).expect("completion stays well-formed")
    }
}

/// Simple cycles of a flat system, one optional entry per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleTable {
    cycles: Vec<Option<Vec<RuleId>>>,
}

impl CycleTable {
    pub fn at(&self, s: StateId) -> Option<&[RuleId]> {
        self.cycles[s.0].as_deref()
    }

    /// One rotation per cycle: the one starting at its smallest state.
    pub fn distinct_cycles(&self) -> Vec<Vec<RuleId>> {
        let mut out: Vec<Vec<RuleId>> = Vec::new();
        let mut covered = vec![false; self.cycles.len()];
        for (s, c) in self.cycles.iter().enumerate() {
            if covered[s] {
                continue;
            }
            if let Some(c) = c {
                for (t, other) in self.cycles.iter().enumerate() {
                    if let Some(o) = other {
                        if canonical_rotation(o) == canonical_rotation(c) {
                            covered[t] = true;
                        }
                    }
                }
                out.push(c.clone());
            }
        }
        out
    }
}

/// Rotation starting at the smallest rule id; used to compare cycles.
pub fn canonical_rotation(cycle: &[RuleId]) -> Vec<RuleId> {
    if cycle.is_empty() {
        return Vec::new();
    }
    let start = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
    cycle[start..]
        .iter()
        .chain(&cycle[..start])
        .copied()
        .collect()
}

/// Name-based incremental construction, mainly for tests and generators.
#[derive(Debug, Clone, Default)]
pub struct SystemBuilder {
    dimension: usize,
    states: Vec<ControlState>,
    rules: Vec<(String, String, String, Guard, AffineUpdate)>,
}

impl SystemBuilder {
    pub fn new(dimension: usize) -> Self {
        SystemBuilder {
            dimension,
            ..Default::default()
        }
    }

    pub fn state(mut self, name: &str, labels: &[&str]) -> Self {
        self.states.push(ControlState {
            name: name.to_string(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn rule(
        mut self,
        name: &str,
        from: &str,
        to: &str,
        guard: Guard,
        update: AffineUpdate,
    ) -> Self {
        self.rules
            .push((name.into(), from.into(), to.into(), guard, update));
        self
    }

    pub fn build(self) -> Result<CounterSystem, SystemError> {
        let lookup = |n: &str| {
            self.states
                .iter()
                .position(|s| s.name == n)
                .map(StateId)
                .ok_or_else(|| SystemError::UnknownState(n.to_string()))
        };
        let mut rules = Vec::new();
        for (name, from, to, guard, update) in &self.rules {
            rules.push(TransitionRule {
                name: name.clone(),
                source: lookup(from)?,
                target: lookup(to)?,
                guard: guard.clone(),
                update: update.clone(),
            });
        }
        CounterSystem::new(self.dimension, self.states, rules)
    }
}

/// The three-counter running example: reach `q3` with `x1 = 2 x3`.
pub fn figure1() -> CounterSystem {
    let transfer = IntMatrix::from_i64(&[[0, 0, 0], [0, 0, 0], [1, 0, 0]]);
    SystemBuilder::new(3)
        .state("q0", &["a"])
        .state("q1", &["b"])
        .state("q2", &["c"])
        .state("q3", &["d"])
        .rule(
            "d0",
            "q0",
            "q0",
            Guard::top(),
            AffineUpdate::translation(&[1, 0, 0]),
        )
        .rule(
            "d1",
            "q0",
            "q1",
            Guard::at_least(&[1, 0, 0], 1),
            AffineUpdate::new(transfer, exactmat::zero_vec(3)),
        )
        .rule(
            "d2",
            "q1",
            "q1",
            Guard::at_least(&[0, 0, 1], 1),
            AffineUpdate::translation(&[1, 1, 0]),
        )
        .rule(
            "d3",
            "q1",
            "q2",
            Guard::equal(&[1, 0, -1], 0),
            AffineUpdate::identity(3),
        )
        .rule(
            "d4",
            "q2",
            "q2",
            Guard::at_least(&[0, 1, 0], 1),
            AffineUpdate::translation(&[1, -1, 0]),
        )
        .rule(
            "d5",
            "q2",
            "q3",
            Guard::equal(&[1, 0, -2], 0),
            AffineUpdate::identity(3),
        )
        .rule("d6", "q3", "q3", Guard::top(), AffineUpdate::identity(3))
        .build()
        .expect("figure 1 is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::int_vec;

    fn cfg(s: usize, v: &[i64]) -> Configuration {
        Configuration::new(StateId(s), int_vec(v))
    }

    #[test]
    fn figure1_steps() {
        let s = figure1();
        assert_eq!(
            s.step(&cfg(0, &[0, 0, 0]), RuleId(0)).unwrap(),
            Some(cfg(0, &[1, 0, 0]))
        );
        assert_eq!(
            s.step(&cfg(0, &[1, 0, 0]), RuleId(1)).unwrap(),
            Some(cfg(1, &[0, 0, 1]))
        );
        assert_eq!(s.step(&cfg(0, &[0, 0, 0]), RuleId(1)).unwrap(), None);
    }

    #[test]
    fn figure1_pseudo_steps() {
        let s = figure1();
        assert_eq!(
            s.pseudo_step(&cfg(0, &[0, 0, 0]), RuleId(1)).unwrap(),
            cfg(1, &[0, 0, 0])
        );
        assert_eq!(
            s.pseudo_step(&cfg(1, &[1, 1, 1]), RuleId(2)).unwrap(),
            cfg(1, &[2, 2, 1])
        );
        assert_eq!(
            s.pseudo_step(&cfg(1, &[5, -3, 2]), RuleId(3)).unwrap(),
            cfg(2, &[5, -3, 2])
        );
    }

    #[test]
    fn step_errors() {
        let s = figure1();
        assert!(matches!(
            s.step(&cfg(1, &[0, 0, 0]), RuleId(0)),
            Err(SystemError::WrongSourceState { .. })
        ));
        assert!(matches!(
            s.step(&cfg(0, &[0, 0]), RuleId(0)),
            Err(SystemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn flatness() {
        assert!(figure1().is_flat());
        let two_loops = SystemBuilder::new(1)
            .state("q", &[])
            .rule("l1", "q", "q", Guard::top(), AffineUpdate::identity(1))
            .rule("l2", "q", "q", Guard::top(), AffineUpdate::identity(1))
            .build()
            .unwrap();
        match two_loops.check_flat() {
            Flatness::NotFlat(w) => {
                assert_eq!(w.state, "q");
                assert_eq!(w.first, vec!["l1"]);
                assert_eq!(w.second, vec!["l2"]);
            }
            Flatness::Flat => panic!("two self-loops are not flat"),
        }
        let lonely = SystemBuilder::new(0).state("q", &[]).build().unwrap();
        assert!(lonely.is_flat());
    }

    #[test]
    fn cycle_table_rotations() {
        let s = SystemBuilder::new(0)
            .state("a", &[])
            .state("b", &[])
            .rule("ab", "a", "b", Guard::top(), AffineUpdate::identity(0))
            .rule("ba", "b", "a", Guard::top(), AffineUpdate::identity(0))
            .build()
            .unwrap();
        let t = s.cycle_table().unwrap();
        assert_eq!(t.at(StateId(0)).unwrap(), &[RuleId(0), RuleId(1)]);
        assert_eq!(t.at(StateId(1)).unwrap(), &[RuleId(1), RuleId(0)]);
        assert_eq!(t.distinct_cycles().len(), 1);
    }

    #[test]
    fn monoid_report_examples() {
        match figure1().check_finite_monoid(1000).unwrap() {
            MonoidReport::Finite(cycles) => {
                assert_eq!(cycles.len(), 4);
                let d2 = cycles.iter().find(|c| c.cycle == vec![RuleId(2)]).unwrap();
                assert_eq!((d2.info.index, d2.info.period), (0, 1));
            }
            other => panic!("{other:?}"),
        }
        let loop_with = |m: IntMatrix| {
            SystemBuilder::new(2)
                .state("q", &[])
                .rule(
                    "l",
                    "q",
                    "q",
                    Guard::top(),
                    AffineUpdate::new(m, int_vec(&[0, 0])),
                )
                .build()
                .unwrap()
        };
        let swap = loop_with(IntMatrix::from_i64(&[[0, 1], [1, 0]]));
        match swap.check_finite_monoid(1000).unwrap() {
            MonoidReport::Finite(c) => assert_eq!((c[0].info.index, c[0].info.period), (0, 2)),
            other => panic!("{other:?}"),
        }
        let shear = loop_with(IntMatrix::from_i64(&[[1, 1], [0, 1]]));
        assert!(matches!(
            shear.check_finite_monoid(1000).unwrap(),
            MonoidReport::NotFinite {
                verdict: MonoidVerdict::Infinite { .. },
                ..
            }
        ));
    }

    #[test]
    fn completion_counts() {
        let one = SystemBuilder::new(0).state("q", &[]).build().unwrap();
        let c = one.complete_deadlock_free();
        assert_eq!((c.states().len(), c.rules().len()), (2, 2));
        let f = figure1().complete_deadlock_free();
        assert_eq!((f.states().len(), f.rules().len()), (5, 12));
        assert!(f.is_flat());
        assert!(f.is_deadlock_free_completed());
        let twice = f.complete_deadlock_free();
        assert_eq!(twice.states().len(), 6);
    }

    #[test]
    fn kripke_structures_reject_guards() {
        let bad = SystemBuilder::new(0)
            .state("q", &[])
            .rule(
                "l",
                "q",
                "q",
                Guard::new(vec![GuardRow::new(vec![], BigInt::from(-1))]),
                AffineUpdate::identity(0),
            )
            .build();
        assert!(matches!(bad, Err(SystemError::GuardInKripkeStructure(_))));
    }
}
