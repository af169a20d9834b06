//! Reachability and run existence over iterated path schemas.
//!
//! For a fixed schema, every nonterminal cycle is either unfolded a small
//! explicit number of times or iterated `α + (z+1)β + r` times for a fresh
//! natural unknown `z`. Counter valuations are propagated as affine terms
//! over those unknowns, each guard becomes a linear row, and the resulting
//! system goes to [`crate::ilp`]. Mode assignments are explored depth-first
//! with pruning on constant guard violations and infeasible prefixes.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cycleanalysis::{
    compose_cycle, infinitely_iterable, translation_vectors, CycleUpdate, TranslationVectors,
};
use crate::exactmat::{self, MonoidInfo, MonoidVerdict, DEFAULT_MONOID_CAP};
use crate::format::ConfigurationDoc;
use crate::ilp::{self, Feasibility, IlpError, IlpOptions, LinSys, LinearConstraint};
use crate::schema::{
    elements_from_json, enumerate_reach_prefixes, Element, IteratedPathSchema, PathSchema,
    SchemaError,
};
use crate::system::{Configuration, CounterSystem, Guard, RuleId, StateId, SystemError};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("state {0} has no outgoing rule guarded by true; complete the system first")]
    NotCompleted(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("malformed witness: {0}")]
    Witness(String),
}

impl From<IlpError> for SolverError {
    fn from(e: IlpError) -> Self {
        SolverError::Inconclusive(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub monoid_cap: usize,
    pub ilp: IlpOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            monoid_cap: DEFAULT_MONOID_CAP,
            ilp: IlpOptions::default(),
        }
    }
}

/// Everything the solver needs about one rotation of one cycle.
#[derive(Debug, Clone)]
pub struct CycleData {
    pub rules: Vec<RuleId>,
    pub update: CycleUpdate,
    pub monoid: MonoidInfo,
    pub translation: TranslationVectors,
}

impl CycleData {
    pub fn new(system: &CounterSystem, rules: &[RuleId], cap: usize) -> Result<Self, SolverError> {
        let update =
            compose_cycle(system, rules).map_err(|e| SolverError::Witness(e.to_string()))?;
        let monoid = match exactmat::monoid_of(&update.matrix, cap).expect("square") {
            MonoidVerdict::Finite(m) => m,
            MonoidVerdict::Capped { iterations } => {
                return Err(SolverError::Inconclusive(format!(
                    "monoid of cycle [{}] undecided after {iterations} powers",
                    system.rule_names(rules).join(" ")
                )))
            }
            MonoidVerdict::Infinite { .. } => {
                return Err(SystemError::NotFiniteMonoid {
                    cycle: system.rule_names(rules),
                    verdict: "infinite".into(),
                }
                .into())
            }
        };
        let translation = translation_vectors(&update, &monoid);
        Ok(CycleData {
            rules: rules.to_vec(),
            update,
            monoid,
            translation,
        })
    }

    pub fn alpha(&self) -> usize {
        self.monoid.index
    }

    pub fn beta(&self) -> usize {
        self.monoid.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleMode {
    Explicit(u64),
    /// `α + (z+1)β + residue` iterations, with `z` constrained so the count
    /// is at least `min_count`.
    Parametric {
        residue: usize,
        min_count: u64,
    },
}

/// An affine term `constant + Σ coeffs[j] · z_j`; missing coefficients are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Term {
    constant: BigInt,
    coeffs: Vec<BigInt>,
}

impl Term {
    fn constant(c: BigInt) -> Self {
        Term {
            constant: c,
            coeffs: Vec::new(),
        }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn add_scaled(&mut self, other: &Term, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        self.constant += &other.constant * k;
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), BigInt::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            if !b.is_zero() {
                *a += b * k;
            }
        }
    }

    fn add_var(&mut self, var: usize, k: &BigInt) {
        if self.coeffs.len() <= var {
            self.coeffs.resize(var + 1, BigInt::zero());
        }
        self.coeffs[var] += k;
    }
}

#[derive(Debug, Clone)]
struct ParamVar {
    element: usize,
    alpha: usize,
    beta: usize,
    residue: usize,
    lower: BigInt,
}

/// Symbolic execution state along a schema prefix.
#[derive(Debug, Clone)]
struct Assembly {
    cur: Vec<Term>,
    rows: Vec<(Term, BigInt)>,
    vars: Vec<ParamVar>,
    infeasible: bool,
    unchecked_rows: bool,
}

impl Assembly {
    fn new(init: &[BigInt]) -> Self {
        Assembly {
            cur: init.iter().cloned().map(Term::constant).collect(),
            rows: Vec::new(),
            vars: Vec::new(),
            infeasible: false,
            unchecked_rows: false,
        }
    }

    fn combine(&self, c: &[BigInt]) -> Term {
        let mut t = Term::constant(BigInt::zero());
        for (k, ck) in c.iter().enumerate() {
            t.add_scaled(&self.cur[k], ck);
        }
        t
    }

    fn guard(&mut self, g: &Guard) {
        for row in g.rows() {
            let t = self.combine(&row.coeffs);
            if t.is_constant() {
                if t.constant > row.bound {
                    self.infeasible = true;
                    return;
                }
            } else {
                let rhs = &row.bound - &t.constant;
                let lhs = Term {
                    constant: BigInt::zero(),
                    coeffs: t.coeffs,
                };
                if !self.rows.iter().any(|(l, r)| *l == lhs && *r <= rhs) {
                    self.rows.push((lhs, rhs));
                    self.unchecked_rows = true;
                }
            }
        }
    }

    fn update(&mut self, u: &crate::system::AffineUpdate) {
        let n = self.cur.len();
        let next = (0..n)
            .map(|i| {
                let mut t = self.combine(u.matrix.row(i));
                t.constant += &u.offset[i];
                t
            })
            .collect();
        self.cur = next;
    }

    fn rule(&mut self, system: &CounterSystem, r: RuleId) {
        let rule = system.rule(r);
        self.guard(&rule.guard);
        if !self.infeasible {
            self.update(&rule.update);
        }
    }

    fn iterate(&mut self, cd: &CycleData) {
        for (g, u) in cd.update.guards.iter().zip(&cd.update.steps) {
            self.guard(g);
            if self.infeasible {
                return;
            }
            self.update(u);
        }
    }

    fn parametric(&mut self, cd: &CycleData, element: usize, residue: usize, min_count: u64) {
        let (alpha, beta) = (cd.alpha(), cd.beta());
        let mut snapshot = None;
        let entry = self.cur.clone();
        for it in 0..alpha + beta + 1 {
            if it == alpha + residue {
                snapshot = Some(self.cur.clone());
            }
            self.iterate(cd);
            if self.infeasible {
                return;
            }
        }
        let base = snapshot.expect("residue below period");
        // count = α + (z+1)β + r >= min_count
        let need = BigInt::from(min_count) - BigInt::from(alpha + residue);
        let lower: BigInt = Integer::div_ceil(&need, &BigInt::from(beta)) - 1;
        let lower = lower.max(BigInt::one());
        let var = self.vars.len();
        self.vars.push(ParamVar {
            element,
            alpha,
            beta,
            residue,
            lower,
        });
        let w0 = &cd.translation.w[0];
        let mut tail = base.clone();
        for (t, w) in tail.iter_mut().zip(w0) {
            t.add_var(var, w);
        }
        self.cur = tail;
        for _ in 0..beta {
            self.iterate(cd);
            if self.infeasible {
                return;
            }
        }
        let mut exit = base;
        for (t, w) in exit.iter_mut().zip(w0) {
            t.constant += w;
            t.add_var(var, w);
        }
        self.cur = exit;
        let _ = entry;
    }

    fn terminal(&mut self, cd: &CycleData) {
        if !infinitely_iterable(&cd.update, &cd.translation) {
            self.infeasible = true;
            return;
        }
        for _ in 0..cd.alpha() + cd.beta() + 1 {
            self.iterate(cd);
            if self.infeasible {
                return;
            }
        }
    }

    fn linsys(&self) -> LinSys {
        let n = self.vars.len();
        let rows = self
            .rows
            .iter()
            .map(|(t, rhs)| {
                let mut c = t.coeffs.clone();
                c.resize(n, BigInt::zero());
                LinearConstraint::new(c, rhs.clone())
            })
            .collect();
        LinSys::new(n, rows)
            .expect("rows padded")
            .with_lower_bounds(self.vars.iter().map(|v| v.lower.clone()).collect())
    }
}

/// A concrete run shape: schema, counts, and where the prefix ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunWitness {
    pub ips: IteratedPathSchema,
    pub reached: Option<Configuration>,
    /// Upper bound every count of a solution of this shape could be kept under.
    pub certificate: Option<BigUint>,
}

impl RunWitness {
    pub fn to_json(&self, s: &CounterSystem) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("schema".into(), self.ips.schema().to_json(s));
        obj.insert("counts".into(), self.ips.counts_json());
        if let Some(c) = &self.reached {
            obj.insert(
                "reached".into(),
                serde_json::to_value(ConfigurationDoc::new(s, c)).expect("serializable"),
            );
        }
        serde_json::Value::Object(obj)
    }

    pub fn from_json(s: &CounterSystem, v: &serde_json::Value) -> Result<Self, SolverError> {
        let elements = elements_from_json(s, &v["schema"])?;
        let schema = PathSchema::new(s, elements)?;
        let counts = v["counts"]
            .as_array()
            .ok_or_else(|| SolverError::Witness("missing counts".into()))?
            .iter()
            .map(|c| match c {
                serde_json::Value::Number(n) => n
                    .as_u64()
                    .map(BigUint::from)
                    .ok_or_else(|| SolverError::Witness(format!("bad count {n}"))),
                serde_json::Value::String(t) => t
                    .parse::<BigUint>()
                    .map_err(|_| SolverError::Witness(format!("bad count {t}"))),
                other => Err(SolverError::Witness(format!("bad count {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RunWitness {
            ips: IteratedPathSchema::new(schema, counts)?,
            reached: None,
            certificate: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReachOutcome {
    Reachable(RunWitness),
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunExistence {
    Sat(Vec<BigUint>),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    /// `exit` is the configuration entering the terminal cycle.
    Valid {
        exit: Configuration,
    },
    Invalid {
        step: BigUint,
        rule: RuleId,
    },
}

/// Search for one schema: mode limits, terminal handling and pattern filter.
struct Search<'f> {
    elements: Vec<Element>,
    terminal: Option<Vec<RuleId>>,
    threshold: Option<u64>,
    accept: &'f mut dyn FnMut(&[u64]) -> bool,
}

struct Found {
    modes: Vec<Option<CycleMode>>,
    values: Vec<BigInt>,
    vars: Vec<ParamVar>,
    bound: BigInt,
}

pub struct Solver<'a> {
    system: &'a CounterSystem,
    opts: SolverOptions,
    cycles: HashMap<Vec<RuleId>, CycleData>,
}

impl<'a> Solver<'a> {
    /// Checks flatness and the finite monoid property of every cycle rotation.
    pub fn new(system: &'a CounterSystem, opts: SolverOptions) -> Result<Self, SolverError> {
        let table = system.cycle_table()?;
        system.require_finite_monoid(opts.monoid_cap)?;
        let mut cycles = HashMap::new();
        for s in system.state_ids() {
            if let Some(c) = table.at(s) {
                cycles.insert(c.to_vec(), CycleData::new(system, c, opts.monoid_cap)?);
            }
        }
        Ok(Solver {
            system,
            opts,
            cycles,
        })
    }

    pub fn system(&self) -> &CounterSystem {
        self.system
    }

    fn cycle(&self, rules: &[RuleId]) -> Result<&CycleData, SolverError> {
        self.cycles.get(rules).ok_or_else(|| {
            SolverError::Witness(format!(
                "[{}] is not a cycle",
                self.system.rule_names(rules).join(" ")
            ))
        })
    }

    fn check_init(&self, init: &Configuration) -> Result<(), SolverError> {
        if init.values.len() != self.system.dimension() {
            return Err(SystemError::DimensionMismatch {
                what: "initial configuration".into(),
                expected: self.system.dimension(),
                found: init.values.len(),
            }
            .into());
        }
        if init.state.0 >= self.system.states().len() {
            return Err(SystemError::UnknownState(format!("#{}", init.state.0)).into());
        }
        Ok(())
    }

    fn explicit_limit(&self, cd: &CycleData, threshold: Option<u64>) -> u64 {
        let base = (cd.alpha() + 2 * cd.beta() + 1) as u64;
        match threshold {
            Some(t) => base.max(t.saturating_sub(1)),
            None => base,
        }
    }

    fn solve_rows(&self, asm: &Assembly) -> Result<Option<Vec<BigInt>>, SolverError> {
        match ilp::feasible_with(&asm.linsys(), self.opts.ilp)? {
            Feasibility::Sat(x) => Ok(Some(x)),
            Feasibility::Unsat => Ok(None),
        }
    }

    fn dfs(
        &self,
        search: &mut Search<'_>,
        idx: usize,
        mut asm: Assembly,
        modes: &mut Vec<Option<CycleMode>>,
    ) -> Result<Option<Found>, SolverError> {
        let len = search.elements.len();
        let mut i = idx;
        while i < len {
            let Element::Rule(r) = search.elements[i] else {
                break;
            };
            asm.rule(self.system, r);
            if asm.infeasible {
                modes.truncate(modes.len() - (i - idx));
                return Ok(None);
            }
            modes.push(None);
            i += 1;
        }
        let pushed = i - idx;
        let result = self.dfs_at(search, i, asm, modes);
        for _ in 0..pushed {
            modes.pop();
        }
        result
    }

    fn dfs_at(
        &self,
        search: &mut Search<'_>,
        i: usize,
        mut asm: Assembly,
        modes: &mut Vec<Option<CycleMode>>,
    ) -> Result<Option<Found>, SolverError> {
        let len = search.elements.len();
        if i == len {
            if let Some(t) = &search.terminal {
                let cd = self.cycle(t)?;
                asm.terminal(cd);
                if asm.infeasible {
                    return Ok(None);
                }
            }
            if let Some(th) = search.threshold {
                let pattern: Vec<u64> = modes
                    .iter()
                    .map(|m| match m {
                        None => 1,
                        Some(CycleMode::Explicit(l)) => (*l).min(th),
                        Some(CycleMode::Parametric { .. }) => th,
                    })
                    .collect();
                if !(search.accept)(&pattern) {
                    return Ok(None);
                }
            }
            let Some(values) = self.solve_rows(&asm)? else {
                return Ok(None);
            };
            let bound = ilp::small_solution_bound(&asm.linsys().shifted());
            return Ok(Some(Found {
                modes: modes.clone(),
                values,
                vars: asm.vars,
                bound,
            }));
        }
        if asm.unchecked_rows {
            asm.unchecked_rows = false;
            if self.solve_rows(&asm)?.is_none() {
                return Ok(None);
            }
        }
        let Element::Cycle(rules) = &search.elements[i] else {
            unreachable!()
        };
        let cd = self.cycle(rules)?;
        let limit = self.explicit_limit(cd, search.threshold);
        let mut st = asm.clone();
        let mut broke = false;
        for l in 1..=limit {
            st.iterate(cd);
            if st.infeasible {
                broke = true;
                break;
            }
            modes.push(Some(CycleMode::Explicit(l)));
            let r = self.dfs(search, i + 1, st.clone(), modes)?;
            modes.pop();
            if r.is_some() {
                return Ok(r);
            }
        }
        if broke {
            // every longer iteration passes through the failing one
            return Ok(None);
        }
        for residue in 0..cd.beta() {
            let mut st = asm.clone();
            st.parametric(cd, i, residue, limit + 1);
            if st.infeasible {
                continue;
            }
            modes.push(Some(CycleMode::Parametric {
                residue,
                min_count: limit + 1,
            }));
            let r = self.dfs(search, i + 1, st, modes)?;
            modes.pop();
            if r.is_some() {
                return Ok(r);
            }
        }
        Ok(None)
    }

    fn search(
        &self,
        init: &Configuration,
        search: &mut Search<'_>,
    ) -> Result<Option<(Vec<BigUint>, BigUint)>, SolverError> {
        let mut modes = Vec::new();
        let Some(found) = self.dfs(search, 0, Assembly::new(&init.values), &mut modes)? else {
            return Ok(None);
        };
        let mut counts = Vec::with_capacity(found.modes.len());
        let mut cert = BigUint::one();
        for (e, m) in found.modes.iter().enumerate() {
            let c = match m {
                None => BigUint::one(),
                Some(CycleMode::Explicit(l)) => BigUint::from(*l),
                Some(CycleMode::Parametric { .. }) => {
                    let (j, v) = found
                        .vars
                        .iter()
                        .enumerate()
                        .find(|(_, v)| v.element == e)
                        .expect("parametric cycle has a variable");
                    let z = found.values[j].to_biguint().expect("natural");
                    let count =
                        BigUint::from(v.alpha + v.residue) + (z + 1u32) * BigUint::from(v.beta);
                    let lower = v.lower.to_biguint().expect("natural");
                    let bound = found.bound.to_biguint().expect("natural");
                    let c_max = BigUint::from(v.alpha + v.residue)
                        + (lower + bound + 1u32) * BigUint::from(v.beta);
                    cert = cert.max(c_max);
                    count
                }
            };
            cert = cert.max(c.clone());
            counts.push(c);
        }
        Ok(Some((counts, cert)))
    }

    /// Run existence for one schema and a fixed mode per nonterminal cycle.
    pub fn run_exists(
        &self,
        init: &Configuration,
        schema: &PathSchema,
        modes: &[CycleMode],
    ) -> Result<RunExistence, SolverError> {
        self.check_init(init)?;
        let mut asm = Assembly::new(&init.values);
        let mut mode_iter = modes.iter();
        let mut assigned = Vec::new();
        for (i, e) in schema.prefix().iter().enumerate() {
            match e {
                Element::Rule(r) => {
                    asm.rule(self.system, *r);
                    assigned.push(None);
                }
                Element::Cycle(c) => {
                    let cd = self.cycle(c)?;
                    let m = *mode_iter
                        .next()
                        .ok_or_else(|| SolverError::Witness("too few cycle modes".into()))?;
                    match m {
                        CycleMode::Explicit(l) => {
                            if l == 0 {
                                return Err(SchemaError::ZeroCount(i).into());
                            }
                            for _ in 0..l {
                                asm.iterate(cd);
                                if asm.infeasible {
                                    break;
                                }
                            }
                        }
                        CycleMode::Parametric { residue, min_count } => {
                            if residue >= cd.beta() {
                                return Err(SolverError::Witness(format!(
                                    "residue {residue} >= period {}",
                                    cd.beta()
                                )));
                            }
                            let floor = (cd.alpha() + 2 * cd.beta() + 2) as u64;
                            asm.parametric(cd, i, residue, min_count.max(floor));
                        }
                    }
                    assigned.push(Some(m));
                }
            }
            if asm.infeasible {
                return Ok(RunExistence::Unsat);
            }
        }
        if mode_iter.next().is_some() {
            return Err(SolverError::Witness("too many cycle modes".into()));
        }
        let elements = schema.prefix().to_vec();
        let mut accept = |_: &[u64]| true;
        let mut search = Search {
            elements,
            terminal: Some(schema.terminal().to_vec()),
            threshold: None,
            accept: &mut accept,
        };
        asm.unchecked_rows = false;
        let mut modes = assigned;
        match self.dfs_at(&mut search, schema.prefix().len(), asm, &mut modes)? {
            None => Ok(RunExistence::Unsat),
            Some(found) => {
                let counts = found
                    .modes
                    .iter()
                    .enumerate()
                    .map(|(e, m)| match m {
                        None => BigUint::one(),
                        Some(CycleMode::Explicit(l)) => BigUint::from(*l),
                        Some(CycleMode::Parametric { .. }) => {
                            let (j, v) = found
                                .vars
                                .iter()
                                .enumerate()
                                .find(|(_, v)| v.element == e)
                                .unwrap();
                            let z = found.values[j].to_biguint().unwrap();
                            BigUint::from(v.alpha + v.residue) + (z + 1u32) * BigUint::from(v.beta)
                        }
                    })
                    .collect();
                Ok(RunExistence::Sat(counts))
            }
        }
    }

    /// Some run of this schema whose truncated count pattern passes `accept`.
    pub fn find_run(
        &self,
        init: &Configuration,
        schema: &PathSchema,
        threshold: Option<u64>,
        accept: &mut dyn FnMut(&[u64]) -> bool,
    ) -> Result<Option<RunWitness>, SolverError> {
        self.check_init(init)?;
        if schema.start(self.system) != init.state {
            return Ok(None);
        }
        let mut search = Search {
            elements: schema.prefix().to_vec(),
            terminal: Some(schema.terminal().to_vec()),
            threshold,
            accept,
        };
        let Some((counts, cert)) = self.search(init, &mut search)? else {
            return Ok(None);
        };
        let ips = IteratedPathSchema::new(schema.clone(), counts)?;
        self.assert_valid(init, &ips, &cert);
        Ok(Some(RunWitness {
            ips,
            reached: None,
            certificate: Some(cert),
        }))
    }

    fn assert_valid(&self, init: &Configuration, ips: &IteratedPathSchema, cert: &BigUint) {
        let v = validate_ips(self.system, init, ips, self.opts.monoid_cap)
            .expect("well-formed witness");
        assert!(
            matches!(v, Validation::Valid { .. }),
            "solver produced an invalid witness: {v:?}"
        );
        assert!(
            ips.counts().iter().all(|c| c <= cert),
            "witness counts exceed the certificate"
        );
    }

    /// Whether some run from `init` visits `target`.
    pub fn reach(
        &self,
        init: &Configuration,
        target: StateId,
    ) -> Result<ReachOutcome, SolverError> {
        self.check_init(init)?;
        for s in self.system.state_ids() {
            if !self
                .system
                .outgoing(s)
                .iter()
                .any(|&r| self.system.rule(r).guard.is_top())
            {
                return Err(SolverError::NotCompleted(self.system.state(s).name.clone()));
            }
        }
        for prefix in enumerate_reach_prefixes(self.system, init.state, target)? {
            let mut accept = |_: &[u64]| true;
            let mut search = Search {
                elements: prefix.clone(),
                terminal: None,
                threshold: None,
                accept: &mut accept,
            };
            if let Some((mut counts, cert)) = self.search(init, &mut search)? {
                let reached = self.simulate_prefix(init, &prefix, &counts);
                let (ext, terminal) = self.extension(&prefix, target);
                let mut elements = prefix.clone();
                for r in ext {
                    elements.push(Element::Rule(r));
                    counts.push(BigUint::one());
                }
                elements.push(Element::Cycle(terminal));
                let schema = PathSchema::new(self.system, elements)?;
                let ips = IteratedPathSchema::new(schema, counts)?;
                self.assert_valid(init, &ips, &cert);
                return Ok(ReachOutcome::Reachable(RunWitness {
                    ips,
                    reached: Some(reached),
                    certificate: Some(cert),
                }));
            }
        }
        Ok(ReachOutcome::Unreachable)
    }

    fn simulate_prefix(
        &self,
        init: &Configuration,
        prefix: &[Element],
        counts: &[BigUint],
    ) -> Configuration {
        let mut v = init.values.clone();
        let mut state = init.state;
        for (e, c) in prefix.iter().zip(counts) {
            match e {
                Element::Rule(r) => {
                    let rule = self.system.rule(*r);
                    v = rule.update.apply(&v);
                    state = rule.target;
                }
                Element::Cycle(cy) => {
                    let cd = &self.cycles[cy];
                    v = crate::cycleanalysis::iterate_update(&cd.update, &cd.monoid, &v, c);
                }
            }
        }
        Configuration::new(state, v)
    }

    /// Guard-free continuation into a ⊤-guarded cycle, avoiding rules of the prefix.
    fn extension(&self, prefix: &[Element], target: StateId) -> (Vec<RuleId>, Vec<RuleId>) {
        let used: Vec<Vec<RuleId>> = prefix.iter().map(Element::key).collect();
        let free_cycle = |s: StateId| -> Option<Vec<RuleId>> {
            let (c, _) = self
                .cycles
                .iter()
                .find(|(c, _)| self.system.rule(c[0]).source == s)?;
            let top = c.iter().all(|&r| self.system.rule(r).guard.is_top());
            let fresh = !used.contains(&crate::system::canonical_rotation(c));
            (top && fresh).then(|| c.clone())
        };
        let mut pred: HashMap<StateId, RuleId> = HashMap::new();
        let mut queue = std::collections::VecDeque::from([target]);
        let mut seen = vec![false; self.system.states().len()];
        seen[target.0] = true;
        while let Some(s) = queue.pop_front() {
            if let Some(c) = free_cycle(s) {
                let mut path = Vec::new();
                let mut v = s;
                while v != target {
                    let r = pred[&v];
                    path.push(r);
                    v = self.system.rule(r).source;
                }
                path.reverse();
                return (path, c);
            }
            for &r in self.system.outgoing(s) {
                let rule = self.system.rule(r);
                if rule.guard.is_top() && !used.contains(&vec![r]) && !seen[rule.target.0] {
                    seen[rule.target.0] = true;
                    pred.insert(rule.target, r);
                    queue.push_back(rule.target);
                }
            }
        }
        unreachable!("a completed system always reaches its sink loop through true guards")
    }
}

pub fn reach(
    system: &CounterSystem,
    init: &Configuration,
    target: StateId,
    opts: SolverOptions,
) -> Result<ReachOutcome, SolverError> {
    Solver::new(system, opts)?.reach(init, target)
}

pub fn run_exists(
    system: &CounterSystem,
    init: &Configuration,
    schema: &PathSchema,
    modes: &[CycleMode],
    opts: SolverOptions,
) -> Result<RunExistence, SolverError> {
    Solver::new(system, opts)?.run_exists(init, schema, modes)
}

/// Exact earliest guard violation of the pseudo-run spelled by `ips`.
///
/// Long cycle iterations are never simulated: iterations in the middle of a
/// cycle lie on arithmetic progressions, so the first failing one is solved
/// for directly, and the last iterations are reached by affine squaring.
pub fn validate_ips(
    system: &CounterSystem,
    init: &Configuration,
    ips: &IteratedPathSchema,
    monoid_cap: usize,
) -> Result<Validation, SolverError> {
    if init.values.len() != system.dimension() {
        return Err(SystemError::DimensionMismatch {
            what: "initial configuration".into(),
            expected: system.dimension(),
            found: init.values.len(),
        }
        .into());
    }
    let schema = ips.schema();
    if schema.start(system) != init.state {
        return Err(SolverError::Witness(
            "schema does not start at the initial state".into(),
        ));
    }
    let mut v = init.values.clone();
    let mut step = BigUint::zero();
    let mut state = init.state;
    for (e, count) in schema.prefix().iter().zip(ips.counts()) {
        match e {
            Element::Rule(r) => {
                let rule = system.rule(*r);
                if !rule.guard.holds(&v) {
                    return Ok(Validation::Invalid { step, rule: *r });
                }
                v = rule.update.apply(&v);
                state = rule.target;
                step += 1u32;
            }
            Element::Cycle(c) => {
                let cd = CycleData::new(system, c, monoid_cap)?;
                match check_cycle(&cd, &v, Some(count), &step) {
                    Ok(exit) => v = exit,
                    Err((s, q)) => {
                        return Ok(Validation::Invalid {
                            step: s,
                            rule: c[q],
                        })
                    }
                }
                step += count * BigUint::from(c.len());
            }
        }
    }
    let terminal = schema.terminal();
    let cd = CycleData::new(system, terminal, monoid_cap)?;
    if let Err((s, q)) = check_cycle(&cd, &v, None, &step) {
        return Ok(Validation::Invalid {
            step: s,
            rule: terminal[q],
        });
    }
    Ok(Validation::Valid {
        exit: Configuration::new(state, v),
    })
}

/// First violation as `(global step, offset in cycle)`, or the exit valuation
/// (meaningless for the infinite case).
fn check_cycle(
    cd: &CycleData,
    v: &[BigInt],
    count: Option<&BigUint>,
    step0: &BigUint,
) -> Result<Vec<BigInt>, (BigUint, usize)> {
    let (alpha, beta, k) = (cd.alpha(), cd.beta(), cd.update.len());
    let at = |it: &BigUint, q: usize| step0 + it * BigUint::from(k) + BigUint::from(q);
    let head = (alpha + beta + 1) as u64;
    let head_iters = count.map_or(head, |c| c.to_u64().map_or(head, |c| c.min(head)));
    let mut starts = Vec::new();
    let mut cur = v.to_vec();
    for it in 0..head_iters {
        starts.push(cur.clone());
        for (q, (g, u)) in cd.update.guards.iter().zip(&cd.update.steps).enumerate() {
            if !g.holds(&cur) {
                return Err((at(&BigUint::from(it), q), q));
            }
            cur = u.apply(&cur);
        }
    }
    if let Some(c) = count {
        if *c <= BigUint::from(head_iters) {
            return Ok(cur);
        }
    }
    // Middle: iterations α + pβ + r in [α+β+1, end), where end = count - β.
    let end: Option<BigInt> = count.map(|c| BigInt::from(c.clone()) - BigInt::from(beta));
    let beta_i = BigInt::from(beta);
    let mut best: Option<(BigUint, usize)> = None;
    for r in 0..beta {
        let p_min = BigInt::from(if r == 0 { 2 } else { 1 });
        let p_max = end.as_ref().map(|e| {
            let span = e - BigInt::one() - BigInt::from(alpha + r);
            if span.is_negative() {
                BigInt::from(-1)
            } else {
                span.div_floor(&beta_i)
            }
        });
        if let Some(pm) = &p_max {
            if *pm < p_min {
                continue;
            }
        }
        let mut base = starts[alpha + r].clone();
        for (q, (g, u)) in cd.update.guards.iter().zip(&cd.update.steps).enumerate() {
            let w = &cd.translation.w[q];
            for row in g.rows() {
                let b0 = exactmat::dot(&row.coeffs, &base);
                let s = exactmat::dot(&row.coeffs, w);
                let p_star = if s.is_positive() {
                    let p: BigInt = (&row.bound - &b0).div_floor(&s) + 1;
                    Some(p.max(p_min.clone()))
                } else if &b0 + &p_min * &s > row.bound {
                    Some(p_min.clone())
                } else {
                    None
                };
                let Some(p) = p_star else { continue };
                if p_max.as_ref().is_some_and(|pm| p > *pm) {
                    continue;
                }
                let it = (BigInt::from(alpha + r) + &p * &beta_i)
                    .to_biguint()
                    .unwrap();
                let s_idx = at(&it, q);
                if best.as_ref().is_none_or(|(b, _)| s_idx < *b) {
                    best = Some((s_idx, q));
                }
            }
            base = u.apply(&base);
        }
    }
    if let Some(b) = best {
        return Err(b);
    }
    let Some(c) = count else { return Ok(cur) };
    // Tail: the last β iterations, or fewer if they overlap the head.
    let tail_start = (c - BigUint::from(beta.min(c.to_usize().unwrap_or(usize::MAX))))
        .max(BigUint::from(head_iters));
    let (m, off) =
        exactmat::affine_pow(&cd.update.matrix, &cd.update.offset, &tail_start).expect("square");
    let mut cur = exactmat::vec_add(&m.mul_vec(v).expect("dimension"), &off);
    let mut it = tail_start;
    while it < *c {
        for (q, (g, u)) in cd.update.guards.iter().zip(&cd.update.steps).enumerate() {
            if !g.holds(&cur) {
                return Err((at(&it, q), q));
            }
            cur = u.apply(&cur);
        }
        it += 1u32;
    }
    Ok(cur)
}
