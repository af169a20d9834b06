//! Path schemas, their iterated instances and labelling words.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::system::{canonical_rotation, CounterSystem, CycleTable, RuleId, StateId, SystemError};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    Rule(RuleId),
    Cycle(Vec<RuleId>),
}

impl Element {
    pub fn rules(&self) -> &[RuleId] {
        match self {
            Element::Rule(r) => std::slice::from_ref(r),
            Element::Cycle(c) => c,
        }
    }

    pub fn is_cycle(&self) -> bool {
        matches!(self, Element::Cycle(_))
    }

    /// Identity used for the pairwise-distinctness requirement: a cycle is
    /// the same element in any rotation, and a lone rule equals its own
    /// length-one cycle.
    pub fn key(&self) -> Vec<RuleId> {
        canonical_rotation(self.rules())
    }

    pub fn source(&self, s: &CounterSystem) -> StateId {
        s.rule(self.rules()[0]).source
    }

    pub fn target(&self, s: &CounterSystem) -> StateId {
        s.rule(*self.rules().last().expect("non-empty element"))
            .target
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("a path schema needs at least one element")]
    Empty,
    #[error("the last element must be a cycle")]
    NoTerminalCycle,
    #[error("element {0} is empty")]
    EmptyCycle(usize),
    #[error("element {0} uses an unknown rule")]
    UnknownRule(usize),
    #[error("element {0} is not a closed path of distinct rules")]
    BadCycle(usize),
    #[error("elements {0} and {1} are the same")]
    Repeated(usize, usize),
    #[error("element {0} does not continue where the previous element ends")]
    Disconnected(usize),
    #[error("expected {expected} counts, found {found}")]
    CountLength { expected: usize, found: usize },
    #[error("count {0} must be at least 1")]
    ZeroCount(usize),
    #[error("count {0} exceeds 1 on a single rule")]
    RepeatedRule(usize),
    #[error("count {0} is too large to expand")]
    TooLarge(usize),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathSchema {
    elements: Vec<Element>,
}

fn check_segment(s: &CounterSystem, i: usize, e: &Element) -> Result<(), SchemaError> {
    let rules = e.rules();
    if rules.is_empty() {
        return Err(SchemaError::EmptyCycle(i));
    }
    if rules.iter().any(|r| r.0 >= s.rules().len()) {
        return Err(SchemaError::UnknownRule(i));
    }
    if let Element::Cycle(c) = e {
        let distinct: BTreeSet<_> = c.iter().collect();
        let closed = s.rule(c[0]).source == s.rule(c[c.len() - 1]).target;
        let chained = c
            .windows(2)
            .all(|w| s.rule(w[0]).target == s.rule(w[1]).source);
        if distinct.len() != c.len() || !closed || !chained {
            return Err(SchemaError::BadCycle(i));
        }
    }
    Ok(())
}

impl PathSchema {
    pub fn new(system: &CounterSystem, elements: Vec<Element>) -> Result<Self, SchemaError> {
        if elements.is_empty() {
            return Err(SchemaError::Empty);
        }
        if !elements.last().unwrap().is_cycle() {
            return Err(SchemaError::NoTerminalCycle);
        }
        Self::check_prefix(system, &elements)?;
        Ok(PathSchema { elements })
    }

    /// Checks everything except the terminal-cycle requirement.
    pub fn check_prefix(system: &CounterSystem, elements: &[Element]) -> Result<(), SchemaError> {
        for (i, e) in elements.iter().enumerate() {
            check_segment(system, i, e)?;
            if i > 0 && elements[i - 1].target(system) != e.source(system) {
                return Err(SchemaError::Disconnected(i));
            }
            let k = e.key();
            if let Some(j) = elements[..i].iter().position(|o| o.key() == k) {
                return Err(SchemaError::Repeated(j, i));
            }
        }
        Ok(())
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn prefix(&self) -> &[Element] {
        &self.elements[..self.elements.len() - 1]
    }

    pub fn terminal(&self) -> &[RuleId] {
        self.elements.last().unwrap().rules()
    }

    pub fn start(&self, s: &CounterSystem) -> StateId {
        self.elements[0].source(s)
    }

    pub fn to_json(&self, s: &CounterSystem) -> serde_json::Value {
        elements_to_json(s, &self.elements)
    }
}

pub fn elements_to_json(s: &CounterSystem, elements: &[Element]) -> serde_json::Value {
    use serde_json::Value;
    Value::Array(
        elements
            .iter()
            .map(|e| match e {
                Element::Rule(r) => Value::String(s.rule(*r).name.clone()),
                Element::Cycle(c) => Value::Array(
                    c.iter()
                        .map(|r| Value::String(s.rule(*r).name.clone()))
                        .collect(),
                ),
            })
            .collect(),
    )
}

/// Inverse of [`elements_to_json`]: strings are rules, arrays are cycles.
pub fn elements_from_json(
    s: &CounterSystem,
    v: &serde_json::Value,
) -> Result<Vec<Element>, SchemaError> {
    let bad = || SchemaError::System(SystemError::UnknownRule(v.to_string()));
    let arr = v.as_array().ok_or_else(bad)?;
    let rule = |x: &serde_json::Value| -> Result<RuleId, SchemaError> {
        Ok(s.rule_by_name(x.as_str().ok_or_else(bad)?)?)
    };
    arr.iter()
        .map(|e| match e {
            serde_json::Value::Array(c) => Ok(Element::Cycle(
                c.iter().map(rule).collect::<Result<_, _>>()?,
            )),
            other => Ok(Element::Rule(rule(other)?)),
        })
        .collect()
}

/// A path schema together with iteration counts for all but the last element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IteratedPathSchema {
    schema: PathSchema,
    counts: Vec<BigUint>,
}

impl IteratedPathSchema {
    pub fn new(schema: PathSchema, counts: Vec<BigUint>) -> Result<Self, SchemaError> {
        if counts.len() != schema.len() - 1 {
            return Err(SchemaError::CountLength {
                expected: schema.len() - 1,
                found: counts.len(),
            });
        }
        for (i, (c, e)) in counts.iter().zip(schema.prefix()).enumerate() {
            if *c < BigUint::one() {
                return Err(SchemaError::ZeroCount(i));
            }
            if !e.is_cycle() && !c.is_one() {
                return Err(SchemaError::RepeatedRule(i));
            }
        }
        Ok(IteratedPathSchema { schema, counts })
    }

    pub fn from_u64(schema: PathSchema, counts: &[u64]) -> Result<Self, SchemaError> {
        Self::new(schema, counts.iter().map(|&c| BigUint::from(c)).collect())
    }

    pub fn schema(&self) -> &PathSchema {
        &self.schema
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// Number of transitions before the terminal cycle starts.
    pub fn prefix_steps(&self) -> BigUint {
        self.schema
            .prefix()
            .iter()
            .zip(&self.counts)
            .map(|(e, c)| c * BigUint::from(e.rules().len()))
            .sum()
    }

    pub fn counts_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.counts
                .iter()
                .map(|c| match c.to_u64() {
                    Some(v) => serde_json::Value::from(v),
                    None => serde_json::Value::String(c.to_string()),
                })
                .collect(),
        )
    }
}

pub type Letter = BTreeSet<String>;

/// The ultimately periodic word `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LassoWord {
    pub prefix: Vec<Letter>,
    pub cycle: Vec<Letter>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Letter>, cycle: Vec<Letter>) -> Self {
        assert!(!cycle.is_empty(), "lasso loop must be non-empty");
        LassoWord { prefix, cycle }
    }

    /// Letter at an arbitrary position of the infinite word.
    pub fn at(&self, i: usize) -> &Letter {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// The same infinite word with `copies` loop iterations moved into the prefix.
    pub fn unrolled(&self, copies: usize) -> LassoWord {
        let mut prefix = self.prefix.clone();
        for _ in 0..copies {
            prefix.extend(self.cycle.iter().cloned());
        }
        LassoWord::new(prefix, self.cycle.clone())
    }
}

fn rule_letters<'a>(
    s: &'a CounterSystem,
    rules: &'a [RuleId],
) -> impl Iterator<Item = Letter> + 'a {
    rules
        .iter()
        .map(move |&r| s.labels(s.rule(r).source).clone())
        .collect::<Vec<_>>()
        .into_iter()
}

/// One letter per transition, labelled by the transition's source state.
pub fn word_of(s: &CounterSystem, ips: &IteratedPathSchema) -> Result<LassoWord, SchemaError> {
    let counts: Vec<u64> = ips
        .counts()
        .iter()
        .enumerate()
        .map(|(i, c)| c.to_u64().ok_or(SchemaError::TooLarge(i)))
        .collect::<Result<_, _>>()?;
    Ok(word_of_pattern(s, ips.schema(), &counts))
}

/// [`word_of`] for small explicit counts, bypassing count validation.
pub fn word_of_pattern(s: &CounterSystem, schema: &PathSchema, counts: &[u64]) -> LassoWord {
    let mut prefix = Vec::new();
    for (e, &c) in schema.prefix().iter().zip(counts) {
        let block: Vec<Letter> = rule_letters(s, e.rules()).collect();
        for _ in 0..c {
            prefix.extend(block.iter().cloned());
        }
    }
    LassoWord::new(prefix, rule_letters(s, schema.terminal()).collect())
}

/// Componentwise `min(m[i], threshold)`.
pub fn xi(m: &[u64], threshold: u64) -> Vec<u64> {
    m.iter().map(|&x| x.min(threshold)).collect()
}

pub fn xi_big(m: &[BigUint], threshold: u64) -> Vec<u64> {
    m.iter()
        .map(|x| x.to_u64().map_or(threshold, |v| v.min(threshold)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Opt {
    Yield,
    Terminal,
    Nonterminal,
    Rule(RuleId),
}

struct Frame {
    state: StateId,
    options: Vec<Opt>,
    next: usize,
}

/// What the search is looking for.
#[derive(Clone, Copy)]
enum Goal {
    /// Full schemas ending in a terminal cycle.
    Schemas,
    /// Cycle-free-at-the-end prefixes stopping at the first visit of a state.
    ReachPrefix(StateId),
}

/// Depth-first stream of element sequences.
///
/// At each state the options are tried in a fixed order: the local cycle
/// as terminal element, the local cycle as nonterminal element, then single
/// rules in declaration order.
pub struct SchemaStream<'a> {
    system: &'a CounterSystem,
    cycles: CycleTable,
    goal: Goal,
    stack: Vec<Frame>,
    path: Vec<Element>,
}

impl<'a> SchemaStream<'a> {
    fn new(system: &'a CounterSystem, start: StateId, goal: Goal) -> Result<Self, SchemaError> {
        let cycles = system.cycle_table()?;
        let mut s = SchemaStream {
            system,
            cycles,
            goal,
            stack: Vec::new(),
            path: Vec::new(),
        };
        let root = s.frame(start);
        s.stack.push(root);
        Ok(s)
    }

    fn used(&self, key: &[RuleId]) -> bool {
        self.path.iter().any(|e| e.key() == key)
    }

    fn frame(&self, state: StateId) -> Frame {
        let mut options = Vec::new();
        let cycle = self.cycles.at(state);
        let cycle_free = cycle.filter(|c| !self.used(&canonical_rotation(c)));
        match self.goal {
            Goal::Schemas => {
                if cycle_free.is_some() {
                    options.push(Opt::Terminal);
                    options.push(Opt::Nonterminal);
                }
            }
            Goal::ReachPrefix(target) => {
                if state == target {
                    return Frame {
                        state,
                        options: vec![Opt::Yield],
                        next: 0,
                    };
                }
                if let Some(c) = cycle_free {
                    let touches = c.iter().any(|&r| self.system.rule(r).target == target);
                    if !touches {
                        options.push(Opt::Nonterminal);
                    }
                }
            }
        }
        for &r in self.system.outgoing(state) {
            // a self-loop taken once is its cycle with count 1
            if self.system.rule(r).target != state && !self.used(&[r]) {
                options.push(Opt::Rule(r));
            }
        }
        Frame {
            state,
            options,
            next: 0,
        }
    }
}

impl Iterator for SchemaStream<'_> {
    type Item = Vec<Element>;

    fn next(&mut self) -> Option<Vec<Element>> {
        loop {
            let frame = self.stack.last_mut()?;
            if frame.next >= frame.options.len() {
                self.stack.pop();
                self.path.pop();
                continue;
            }
            let opt = frame.options[frame.next];
            frame.next += 1;
            let state = frame.state;
            match opt {
                Opt::Yield => return Some(self.path.clone()),
                Opt::Terminal => {
                    let mut out = self.path.clone();
                    out.push(Element::Cycle(self.cycles.at(state).unwrap().to_vec()));
                    return Some(out);
                }
                Opt::Nonterminal => {
                    self.path
                        .push(Element::Cycle(self.cycles.at(state).unwrap().to_vec()));
                    let f = self.frame(state);
                    self.stack.push(f);
                }
                Opt::Rule(r) => {
                    self.path.push(Element::Rule(r));
                    let f = self.frame(self.system.rule(r).target);
                    self.stack.push(f);
                }
            }
        }
    }
}

/// All path schemas starting at `start`, lazily.
pub fn enumerate_schemas(
    system: &CounterSystem,
    start: StateId,
) -> Result<impl Iterator<Item = PathSchema> + '_, SchemaError> {
    Ok(SchemaStream::new(system, start, Goal::Schemas)?.map(|elements| PathSchema { elements }))
}

/// Element sequences from `start` that stop at their first visit of `target`.
///
/// Cycles passing through `target` are skipped: the first visit would lie
/// inside them, and the walk along the single rules covers that case.
pub fn enumerate_reach_prefixes(
    system: &CounterSystem,
    start: StateId,
    target: StateId,
) -> Result<impl Iterator<Item = Vec<Element>> + '_, SchemaError> {
    SchemaStream::new(system, start, Goal::ReachPrefix(target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{figure1, AffineUpdate, Guard, SystemBuilder};

    fn fig1_schema() -> PathSchema {
        let s = figure1();
        let c = |i| Element::Cycle(vec![RuleId(i)]);
        let r = |i| Element::Rule(RuleId(i));
        PathSchema::new(&s, vec![c(0), r(1), c(2), r(3), c(4), r(5), c(6)]).unwrap()
    }

    #[test]
    fn figure1_enumeration_contains_main_schema() {
        let s = figure1();
        let all: Vec<_> = enumerate_schemas(&s, StateId(0)).unwrap().collect();
        assert!(all.contains(&fig1_schema()));
        // each of the 3 optional nonterminal loops, plus choosing where to stop
        assert!(all.len() > 8);
        for p in &all {
            assert!(PathSchema::new(&s, p.elements().to_vec()).is_ok());
        }
    }

    #[test]
    fn single_loop_has_one_schema() {
        let s = SystemBuilder::new(0)
            .state("q", &[])
            .rule("l", "q", "q", Guard::top(), AffineUpdate::identity(0))
            .build()
            .unwrap();
        let all: Vec<_> = enumerate_schemas(&s, StateId(0)).unwrap().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].elements(), &[Element::Cycle(vec![RuleId(0)])]);
    }

    #[test]
    fn distinctness_rules() {
        let s = figure1();
        let r = |i| Element::Rule(RuleId(i));
        let c = |i| Element::Cycle(vec![RuleId(i)]);
        assert_eq!(
            PathSchema::new(&s, vec![r(0), c(0)]),
            Err(SchemaError::Repeated(0, 1))
        );
        assert_eq!(
            PathSchema::new(&s, vec![r(1)]),
            Err(SchemaError::NoTerminalCycle)
        );
        assert_eq!(
            PathSchema::new(&s, vec![r(1), c(4)]),
            Err(SchemaError::Disconnected(1))
        );
    }

    #[test]
    fn count_invariants() {
        let p = fig1_schema();
        assert!(IteratedPathSchema::from_u64(p.clone(), &[1; 6]).is_ok());
        assert_eq!(
            IteratedPathSchema::from_u64(p.clone(), &[1; 5]),
            Err(SchemaError::CountLength {
                expected: 6,
                found: 5
            })
        );
        assert_eq!(
            IteratedPathSchema::from_u64(p.clone(), &[0, 1, 1, 1, 1, 1]),
            Err(SchemaError::ZeroCount(0))
        );
        assert_eq!(
            IteratedPathSchema::from_u64(p, &[1, 2, 1, 1, 1, 1]),
            Err(SchemaError::RepeatedRule(1))
        );
    }

    #[test]
    fn words() {
        let s = figure1();
        let letter = |x: &str| -> Letter { [x.to_string()].into_iter().collect() };
        let ips = IteratedPathSchema::from_u64(fig1_schema(), &[1; 6]).unwrap();
        let w = word_of(&s, &ips).unwrap();
        let expect: Vec<Letter> = ["a", "a", "b", "b", "c", "c"]
            .iter()
            .map(|x| letter(x))
            .collect();
        assert_eq!(w.prefix, expect);
        assert_eq!(w.cycle, vec![letter("d")]);

        let ips = IteratedPathSchema::from_u64(fig1_schema(), &[1, 1, 3, 1, 1, 1]).unwrap();
        let w = word_of(&s, &ips).unwrap();
        assert_eq!(w.prefix.iter().filter(|l| **l == letter("b")).count(), 4);
    }

    #[test]
    fn unlabeled_word() {
        let s = SystemBuilder::new(0)
            .state("q", &[])
            .rule("l", "q", "q", Guard::top(), AffineUpdate::identity(0))
            .build()
            .unwrap();
        let p = PathSchema::new(&s, vec![Element::Cycle(vec![RuleId(0)])]).unwrap();
        let w = word_of(&s, &IteratedPathSchema::from_u64(p, &[]).unwrap()).unwrap();
        assert!(w.prefix.is_empty());
        assert!(w.cycle.iter().all(BTreeSet::is_empty));
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi(&[1, 5, 2], 3), vec![1, 3, 2]);
        assert_eq!(xi(&[1, 2], 9), vec![1, 2]);
        assert_eq!(xi(&[4, 1, 7], 1), vec![1, 1, 1]);
    }

    #[test]
    fn reach_prefixes_stop_at_target() {
        let s = figure1();
        let all: Vec<_> = enumerate_reach_prefixes(&s, StateId(0), StateId(2))
            .unwrap()
            .collect();
        // d1 d3 with optional loops on q0 and q1
        assert_eq!(all.len(), 4);
        for p in &all {
            assert_eq!(p.last().unwrap(), &Element::Rule(RuleId(3)));
        }
        let here: Vec<_> = enumerate_reach_prefixes(&s, StateId(0), StateId(0))
            .unwrap()
            .collect();
        assert_eq!(here, vec![Vec::<Element>::new()]);
    }

    #[test]
    fn json_round_trip() {
        let s = figure1();
        let p = fig1_schema();
        let j = p.to_json(&s);
        assert_eq!(
            j.to_string(),
            r#"[["d0"],"d1",["d2"],"d3",["d4"],"d5",["d6"]]"#
        );
        assert_eq!(elements_from_json(&s, &j).unwrap(), p.elements());
    }
}
