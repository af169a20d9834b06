//! Cycle composition, translation vectors and guard windows.
//!
//! A cycle `δ0 … δ(k-1)` is repeated `ℓ` times. When the power monoid of
//! its composed matrix has index `α` and period `β`, the valuation after
//! `α + pβ + r` iterations is the valuation after `α + r` iterations shifted
//! by `p` copies of a fixed translation vector. Guards are convex, hence it
//! suffices to check them on the first `α + β + 1` and last `β` iterations.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::exactmat::{self, vec_add, IntMatrix, MonoidInfo};
use crate::system::{AffineUpdate, CounterSystem, Guard, RuleId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CycleError {
    #[error("cycle has no rules")]
    Empty,
    #[error("residue {residue} is not below the period {period}")]
    Residue { residue: usize, period: usize },
}

/// The update of one full iteration together with its per-step prefixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleUpdate {
    pub matrix: IntMatrix,
    pub offset: Vec<BigInt>,
    /// `prefixes[q]` maps the entry valuation to the one `q` steps in.
    pub prefixes: Vec<AffineUpdate>,
    pub steps: Vec<AffineUpdate>,
    pub guards: Vec<Guard>,
}

pub fn compose_cycle(system: &CounterSystem, cycle: &[RuleId]) -> Result<CycleUpdate, CycleError> {
    if cycle.is_empty() {
        return Err(CycleError::Empty);
    }
    let n = system.dimension();
    let mut acc = AffineUpdate::identity(n);
    let mut prefixes = Vec::with_capacity(cycle.len());
    let mut steps = Vec::with_capacity(cycle.len());
    let mut guards = Vec::with_capacity(cycle.len());
    for &r in cycle {
        let rule = system.rule(r);
        prefixes.push(acc.clone());
        acc = rule.update.after(&acc);
        steps.push(rule.update.clone());
        guards.push(rule.guard.clone());
    }
    Ok(CycleUpdate {
        matrix: acc.matrix,
        offset: acc.offset,
        prefixes,
        steps,
        guards,
    })
}

impl CycleUpdate {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.offset.len()
    }

    pub fn as_update(&self) -> AffineUpdate {
        AffineUpdate::new(self.matrix.clone(), self.offset.clone())
    }

    /// One full iteration.
    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        vec_add(&self.matrix.mul_vec(v).expect("dimension"), &self.offset)
    }

    /// `ℓ` iterations, one at a time.
    pub fn iterate_naive(&self, v: &[BigInt], l: usize) -> Vec<BigInt> {
        (0..l).fold(v.to_vec(), |acc, _| self.apply(&acc))
    }

    /// `f^j(0)`.
    pub fn offset_power(&self, j: usize) -> Vec<BigInt> {
        self.iterate_naive(&exactmat::zero_vec(self.dimension()), j)
    }

    /// Whether every guard holds along one iteration from `v`.
    pub fn iteration_holds(&self, v: &[BigInt]) -> bool {
        let mut cur = v.to_vec();
        for (g, u) in self.guards.iter().zip(&self.steps) {
            if !g.holds(&cur) {
                return false;
            }
            cur = u.apply(&cur);
        }
        true
    }
}

/// `f^ℓ(v)` through the index/period decomposition; cost does not grow with `ℓ`.
pub fn iterate_update(
    cu: &CycleUpdate,
    mono: &MonoidInfo,
    v: &[BigInt],
    l: &BigUint,
) -> Vec<BigInt> {
    let head = BigUint::from(mono.index + mono.period);
    if *l < head {
        return cu.iterate_naive(v, l.to_usize().expect("small"));
    }
    let (p, r) = (l - BigUint::from(mono.index)).div_rem(&BigUint::from(mono.period));
    let base = cu.iterate_naive(v, mono.index + r.to_usize().expect("below period"));
    let w0 = translation_w0(cu, mono);
    let p = BigInt::from(p);
    base.iter().zip(&w0).map(|(b, w)| b + &p * w).collect()
}

fn translation_w0(cu: &CycleUpdate, mono: &MonoidInfo) -> Vec<BigInt> {
    let fb = cu.offset_power(mono.period);
    mono.powers[mono.index].mul_vec(&fb).expect("dimension")
}

/// `w[q]`: shift of the valuation `q` steps into an iteration, per extra period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationVectors {
    pub w: Vec<Vec<BigInt>>,
}

pub fn translation_vectors(cu: &CycleUpdate, mono: &MonoidInfo) -> TranslationVectors {
    let mut w = vec![translation_w0(cu, mono)];
    for step in &cu.steps[..cu.len() - 1] {
        let next = step.matrix.mul_vec(w.last().unwrap()).expect("dimension");
        w.push(next);
    }
    TranslationVectors { w }
}

/// Every guard row `c` of step `i` satisfies `c · w[i] <= 0`.
pub fn infinitely_iterable(cu: &CycleUpdate, tv: &TranslationVectors) -> bool {
    cu.guards.iter().zip(&tv.w).all(|(g, w)| {
        g.rows()
            .iter()
            .all(|row| exactmat::dot(&row.coeffs, w) <= BigInt::zero())
    })
}

/// `y · entry + z · Z <= rhs` for entry valuation `entry` and iteration symbol `Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalRow {
    pub y: Vec<BigInt>,
    pub z: BigInt,
    pub rhs: BigInt,
}

/// `entry -> matrix · entry + offset + Z · z_dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalAffine {
    pub matrix: IntMatrix,
    pub offset: Vec<BigInt>,
    pub z_dir: Vec<BigInt>,
}

impl LocalAffine {
    fn identity(n: usize) -> Self {
        LocalAffine {
            matrix: IntMatrix::identity(n),
            offset: exactmat::zero_vec(n),
            z_dir: exactmat::zero_vec(n),
        }
    }

    fn advance(&mut self, u: &AffineUpdate) {
        self.matrix = u.matrix.mul(&self.matrix).expect("dimension");
        self.offset = u.apply(&self.offset);
        self.z_dir = u.matrix.mul_vec(&self.z_dir).expect("dimension");
    }

    fn rows_for(&self, g: &Guard, out: &mut Vec<LocalRow>) {
        for row in g.rows() {
            let y = self.matrix.left_mul_vec(&row.coeffs).expect("dimension");
            let z = exactmat::dot(&row.coeffs, &self.z_dir);
            let rhs = &row.bound - exactmat::dot(&row.coeffs, &self.offset);
            let r = LocalRow { y, z, rhs };
            if !out.contains(&r) {
                out.push(r);
            }
        }
    }

    pub fn apply(&self, entry: &[BigInt], z: &BigInt) -> Vec<BigInt> {
        let base = vec_add(
            &self.matrix.mul_vec(entry).expect("dimension"),
            &self.offset,
        );
        base.iter()
            .zip(&self.z_dir)
            .map(|(b, d)| b + z * d)
            .collect()
    }
}

fn unfold_into(
    cu: &CycleUpdate,
    start: &mut LocalAffine,
    iterations: usize,
    rows: &mut Vec<LocalRow>,
) {
    for _ in 0..iterations {
        for (g, u) in cu.guards.iter().zip(&cu.steps) {
            start.rows_for(g, rows);
            start.advance(u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// `ℓ = α + (Z+1)β + residue` iterations with `Z >= 0`.
    Nonterminal {
        residue: usize,
    },
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub rows: Vec<LocalRow>,
    /// Exit valuation; absent for terminal cycles.
    pub exit: Option<LocalAffine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowOutcome {
    Fragment(Window),
    Infeasible,
}

/// Guard constraints for a cycle iterated a symbolic number of times.
pub fn window_constraints(
    cu: &CycleUpdate,
    mono: &MonoidInfo,
    tv: &TranslationVectors,
    mode: WindowMode,
) -> Result<WindowOutcome, CycleError> {
    let (alpha, beta) = (mono.index, mono.period);
    let n = cu.dimension();
    let mut rows = Vec::new();
    unfold_into(
        cu,
        &mut LocalAffine::identity(n),
        alpha + beta + 1,
        &mut rows,
    );
    match mode {
        WindowMode::Terminal => {
            if !infinitely_iterable(cu, tv) {
                return Ok(WindowOutcome::Infeasible);
            }
            Ok(WindowOutcome::Fragment(Window { rows, exit: None }))
        }
        WindowMode::Nonterminal { residue } => {
            if residue >= beta {
                return Err(CycleError::Residue {
                    residue,
                    period: beta,
                });
            }
            let base = LocalAffine {
                matrix: mono.powers[alpha + residue].clone(),
                offset: cu.offset_power(alpha + residue),
                z_dir: tv.w[0].clone(),
            };
            let mut tail = base.clone();
            unfold_into(cu, &mut tail, beta, &mut rows);
            let exit = LocalAffine {
                offset: vec_add(&base.offset, &tv.w[0]),
                ..base
            };
            Ok(WindowOutcome::Fragment(Window {
                rows,
                exit: Some(exit),
            }))
        }
    }
}

/// Guard constraints for exactly `iterations` iterations, all spelled out.
pub fn unfolded_constraints(cu: &CycleUpdate, iterations: usize) -> Window {
    let mut rows = Vec::new();
    let mut cur = LocalAffine::identity(cu.dimension());
    unfold_into(cu, &mut cur, iterations, &mut rows);
    Window {
        rows,
        exit: Some(cur),
    }
}

/// Concrete guard check restricted to the first `α + β + 1` and the last
/// `β` iterations out of `ℓ`.
pub fn window_holds(cu: &CycleUpdate, mono: &MonoidInfo, v: &[BigInt], l: &BigUint) -> bool {
    let head = (mono.index + mono.period + 1) as u64;
    let mut cur = v.to_vec();
    let l_small = l.to_u64();
    let head_iters = l_small.map_or(head, |x| x.min(head));
    for _ in 0..head_iters {
        if !cu.iteration_holds(&cur) {
            return false;
        }
        cur = cu.apply(&cur);
    }
    let beta = BigUint::from(mono.period);
    if *l <= BigUint::from(head) + &beta {
        // Tail overlaps or directly follows the head; check the gap explicitly.
        let total = l.to_u64().unwrap();
        for _ in head_iters..total {
            if !cu.iteration_holds(&cur) {
                return false;
            }
            cur = cu.apply(&cur);
        }
        return true;
    }
    let mut cur = iterate_update(cu, mono, v, &(l - &beta));
    for _ in 0..mono.period {
        if !cu.iteration_holds(&cur) {
            return false;
        }
        cur = cu.apply(&cur);
    }
    true
}

/// Terminal-cycle criterion: infinitely iterable and the first
/// `α + β + 1` iterations are guard-correct.
pub fn terminal_window_holds(
    cu: &CycleUpdate,
    mono: &MonoidInfo,
    tv: &TranslationVectors,
    v: &[BigInt],
) -> bool {
    infinitely_iterable(cu, tv)
        && window_holds(cu, mono, v, &BigUint::from(mono.index + mono.period + 1))
}
