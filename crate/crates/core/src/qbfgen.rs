//! ∃*∀* quantified boolean formulas and their encoding as reachability in a
//! flat counter system whose only cycle rotates prime-length blocks.

use std::fmt;

use num_bigint::BigInt;

use crate::exactmat::{zero_vec, IntMatrix};
use crate::system::{
    AffineUpdate, Configuration, CounterSystem, Guard, GuardRow, StateId, SystemBuilder,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QbfError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("need at least one existential and one universal variable")]
    EmptyBlock,
    #[error("variable {0} is used but not quantified")]
    Unquantified(i64),
    #[error("{vars} variables exceed the brute-force cap of {cap}")]
    CapExceeded { vars: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Existential, 0-based.
    Y(usize),
    /// Universal, 0-based.
    Z(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub var: Var,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sigma2Qbf {
    existentials: usize,
    universals: usize,
    clauses: Vec<Vec<Lit>>,
}

pub const DEFAULT_QBF_CAP: usize = 16;

impl Sigma2Qbf {
    pub fn new(
        existentials: usize,
        universals: usize,
        clauses: Vec<Vec<Lit>>,
    ) -> Result<Self, QbfError> {
        if existentials == 0 || universals == 0 {
            return Err(QbfError::EmptyBlock);
        }
        for l in clauses.iter().flatten() {
            let ok = match l.var {
                Var::Y(i) => i < existentials,
                Var::Z(j) => j < universals,
            };
            if !ok {
                return Err(QbfError::Unquantified(dimacs_var(existentials, l.var)));
            }
        }
        Ok(Sigma2Qbf {
            existentials,
            universals,
            clauses,
        })
    }

    pub fn existentials(&self) -> usize {
        self.existentials
    }

    pub fn universals(&self) -> usize {
        self.universals
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    fn matrix_holds(&self, y: u64, z: u64) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|l| {
                let v = match l.var {
                    Var::Y(i) => y >> i & 1 == 1,
                    Var::Z(j) => z >> j & 1 == 1,
                };
                v == l.positive
            })
        })
    }

    /// Brute-force truth table.
    pub fn valid(&self, cap: usize) -> Result<bool, QbfError> {
        let vars = self.existentials + self.universals;
        if vars > cap || vars >= 64 {
            return Err(QbfError::CapExceeded { vars, cap });
        }
        Ok((0..1u64 << self.existentials)
            .any(|y| (0..1u64 << self.universals).all(|z| self.matrix_holds(y, z))))
    }
}

fn dimacs_var(p: usize, v: Var) -> i64 {
    match v {
        Var::Y(i) => i as i64 + 1,
        Var::Z(j) => (p + j) as i64 + 1,
    }
}

pub fn qbf_valid(phi: &Sigma2Qbf) -> Result<bool, QbfError> {
    phi.valid(DEFAULT_QBF_CAP)
}

/// QDIMACS-style text with existentials numbered first.
impl fmt::Display for Sigma2Qbf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.existentials;
        writeln!(f, "p cnf {} {}", p + self.universals, self.clauses.len())?;
        let block = |f: &mut fmt::Formatter<'_>, tag: &str, vars: Vec<Var>| -> fmt::Result {
            write!(f, "{tag}")?;
            for v in vars {
                write!(f, " {}", dimacs_var(p, v))?;
            }
            writeln!(f, " 0")
        };
        block(f, "e", (0..p).map(Var::Y).collect())?;
        block(f, "a", (0..self.universals).map(Var::Z).collect())?;
        for c in &self.clauses {
            for l in c {
                let v = dimacs_var(p, l.var);
                write!(f, "{} ", if l.positive { v } else { -v })?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

/// Parses `e ... 0` / `a ... 0` quantifier lines followed by clause lines.
/// `c` comment lines and a `p cnf` header are accepted and ignored.
pub fn parse_qbf(text: &str) -> Result<Sigma2Qbf, QbfError> {
    let mut exist: Vec<i64> = Vec::new();
    let mut univ: Vec<i64> = Vec::new();
    let mut clauses_raw: Vec<Vec<i64>> = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let bad = |msg: String| QbfError::Parse { line: line_no, msg };
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') || t.starts_with('p') {
            continue;
        }
        let (tag, rest) = match t.split_at(1) {
            ("e", r) | ("a", r) => (Some(&t[..1]), r),
            _ => (None, t),
        };
        let nums = rest
            .split_whitespace()
            .map(|w| {
                w.parse::<i64>()
                    .map_err(|_| bad(format!("not an integer: {w:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        match tag {
            Some(tag) => {
                if !clauses_raw.is_empty() || !pending.is_empty() {
                    return Err(bad("quantifier line after clauses".into()));
                }
                if tag == "e" && !univ.is_empty() {
                    return Err(bad("only ∃*∀* prefixes are supported".into()));
                }
                if nums.last() != Some(&0) {
                    return Err(bad("quantifier line must end with 0".into()));
                }
                let vars = &nums[..nums.len() - 1];
                if vars.iter().any(|&v| v <= 0) {
                    return Err(bad("quantified variables must be positive".into()));
                }
                if tag == "e" { &mut exist } else { &mut univ }.extend_from_slice(vars);
            }
            None => {
                for x in nums {
                    if x == 0 {
                        clauses_raw.push(std::mem::take(&mut pending));
                    } else {
                        pending.push(x);
                    }
                }
            }
        }
    }
    if !pending.is_empty() {
        clauses_raw.push(pending);
    }
    let lookup = |x: i64| -> Result<Lit, QbfError> {
        let v = x.abs();
        let var = if let Some(i) = exist.iter().position(|&e| e == v) {
            Var::Y(i)
        } else if let Some(j) = univ.iter().position(|&a| a == v) {
            Var::Z(j)
        } else {
            return Err(QbfError::Unquantified(v));
        };
        Ok(Lit {
            var,
            positive: x > 0,
        })
    };
    let clauses = clauses_raw
        .iter()
        .map(|c| c.iter().map(|&x| lookup(x)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Sigma2Qbf::new(exist.len(), univ.len(), clauses)
}

/// The first `k` primes.
pub fn primes(k: usize) -> Vec<u64> {
    if k == 0 {
        return Vec::new();
    }
    let mut limit = 16usize;
    loop {
        let mut composite = vec![false; limit + 1];
        let mut out = Vec::new();
        for i in 2..=limit {
            if composite[i] {
                continue;
            }
            out.push(i as u64);
            if out.len() == k {
                return out;
            }
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
        limit *= 2;
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub system: CounterSystem,
    pub init: Configuration,
    pub target: StateId,
    /// Counter index standing for each universal variable.
    pub z_counters: Vec<usize>,
}

/// 0-based counter of each universal variable: the last row of its block.
fn z_counters(p: usize, ps: &[u64]) -> Vec<usize> {
    let mut acc = p;
    ps.iter()
        .map(|&pi| {
            acc += pi as usize;
            acc - 1
        })
        .collect()
}

/// Counter matrix: identity on the existentials, then one rotation per prime.
pub fn reduction_matrix(p: usize, ps: &[u64]) -> IntMatrix {
    let mut blocks = vec![IntMatrix::identity(p)];
    for &pi in ps {
        let pi = pi as usize;
        let mut m = IntMatrix::zeros(pi, pi);
        for i in 0..pi {
            m.set(i, (i + 1) % pi, BigInt::from(1));
        }
        blocks.push(m);
    }
    IntMatrix::block_diagonal(&blocks).expect("square blocks")
}

pub fn build_reduction(phi: &Sigma2Qbf) -> Reduction {
    let p = phi.existentials();
    let ps = primes(phi.universals());
    let n = p + ps.iter().sum::<u64>() as usize;
    let zs = z_counters(p, &ps);
    let counter = |v: Var| match v {
        Var::Y(i) => i,
        Var::Z(j) => zs[j],
    };
    // sum of literal terms >= 1, as  -Σpos + Σneg <= #neg - 1
    let g1 = Guard::new(
        phi.clauses()
            .iter()
            .map(|c| {
                let mut coeffs = vec![0i64; n];
                let mut negs = 0;
                for l in c {
                    if l.positive {
                        coeffs[counter(l.var)] -= 1;
                    } else {
                        coeffs[counter(l.var)] += 1;
                        negs += 1;
                    }
                }
                GuardRow::from_i64(&coeffs, negs - 1)
            })
            .collect(),
    );
    let mut g2 = Guard::top();
    for &z in &zs {
        let mut coeffs = vec![0i64; n];
        coeffs[z] = 1;
        g2 = g2.and(Guard::equal(&coeffs, 1));
    }
    let rotate = AffineUpdate::new(reduction_matrix(p, &ps), zero_vec(n));
    let mut b = SystemBuilder::new(n);
    for i in 0..=p {
        b = b.state(&format!("q{i}"), &[]);
    }
    b = b.state("q", &[]).state("qf", &[]);
    for i in 1..=p {
        let mut e = vec![0i64; n];
        e[i - 1] = 1;
        let (from, to) = (format!("q{}", i - 1), format!("q{i}"));
        b = b
            .rule(
                &format!("set{i}"),
                &from,
                &to,
                Guard::top(),
                AffineUpdate::translation(&e),
            )
            .rule(
                &format!("keep{i}"),
                &from,
                &to,
                Guard::top(),
                AffineUpdate::identity(n),
            );
    }
    b = b
        .rule("enter", &format!("q{p}"), "q", g1.clone(), rotate.clone())
        .rule("rotate", "q", "q", g1, rotate)
        .rule("exit", "q", "qf", g2, AffineUpdate::identity(n));
    let system = b.build().expect("well-formed reduction");
    let mut v0 = zero_vec(n);
    for &z in &zs {
        v0[z] = BigInt::from(1);
    }
    let target = system.state_by_name("qf").expect("qf exists");
    Reduction {
        init: Configuration::new(StateId(0), v0),
        system,
        target,
        z_counters: zs,
    }
}
