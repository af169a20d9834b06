//! Seeded random instances for property tests and benchmarking.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exactmat::{int_vec, IntMatrix};
use crate::logic::{Fo, Pltl};
use crate::qbfgen::{Lit, Sigma2Qbf, Var};
use crate::system::{
    AffineUpdate, Configuration, CounterSystem, Guard, GuardRow, StateId, SystemBuilder,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct SystemParams {
    pub max_states: usize,
    pub max_dim: usize,
    pub coeff: i64,
    pub labels: &'static [&'static str],
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            max_states: 5,
            max_dim: 3,
            coeff: 2,
            labels: &["a", "b", "c"],
        }
    }
}

/// Square matrix with at most one ±1 per row and column. Products of such
/// matrices stay in the same finite set.
pub fn signed_partial_permutation(rng: &mut impl Rng, n: usize) -> IntMatrix {
    let mut cols: Vec<usize> = (0..n).collect();
    cols.shuffle(rng);
    let mut m = IntMatrix::zeros(n, n);
    for (i, &j) in cols.iter().enumerate() {
        match rng.gen_range(0..6) {
            0 => {}
            1 => m.set(i, j, BigInt::from(-1)),
            _ => m.set(i, j, BigInt::from(1)),
        }
    }
    m
}

fn random_update(rng: &mut impl Rng, n: usize, coeff: i64) -> AffineUpdate {
    let matrix = if rng.gen_bool(0.5) {
        IntMatrix::identity(n)
    } else {
        signed_partial_permutation(rng, n)
    };
    let b: Vec<i64> = (0..n).map(|_| rng.gen_range(-coeff..=coeff)).collect();
    AffineUpdate::new(matrix, int_vec(&b))
}

fn random_guard(rng: &mut impl Rng, n: usize, coeff: i64) -> Guard {
    let rows = match rng.gen_range(0..10) {
        0..=3 => 0,
        4..=7 => 1,
        _ => 2,
    };
    Guard::new(
        (0..rows)
            .map(|_| {
                let c: Vec<i64> = (0..n).map(|_| rng.gen_range(-coeff..=coeff)).collect();
                GuardRow::from_i64(&c, rng.gen_range(-3..=3))
            })
            .collect(),
    )
}

/// A flat system: states are grouped into consecutive blocks that form a
/// self-loop or a two-state cycle, and the remaining rules only go forward
/// between blocks.
pub fn random_flat_system(rng: &mut impl Rng, p: &SystemParams) -> CounterSystem {
    let k = rng.gen_range(2..=p.max_states.max(2));
    let n = rng.gen_range(1..=p.max_dim.max(1));
    let mut b = SystemBuilder::new(n);
    for i in 0..k {
        let l = p
            .labels
            .choose(rng)
            .copied()
            .into_iter()
            .collect::<Vec<_>>();
        b = b.state(&format!("s{i}"), &l);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < k {
        if i + 1 < k && rng.gen_bool(0.25) {
            groups.push(vec![i, i + 1]);
            i += 2;
        } else {
            groups.push(vec![i]);
            i += 1;
        }
    }
    let mut r = 0;
    let mut rule = |b: SystemBuilder, from: usize, to: usize, rng: &mut ChaCha8Rng| {
        r += 1;
        b.rule(
            &format!("r{}", r - 1),
            &format!("s{from}"),
            &format!("s{to}"),
            random_guard(rng, n, p.coeff),
            random_update(rng, n, p.coeff),
        )
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    for g in &groups {
        match g.as_slice() {
            [s] if local.gen_bool(0.7) => b = rule(b, *s, *s, &mut local),
            [s, t] => {
                b = rule(b, *s, *t, &mut local);
                b = rule(b, *t, *s, &mut local);
            }
            _ => {}
        }
    }
    for (gi, g) in groups.iter().enumerate() {
        for (gj, h) in groups.iter().enumerate().skip(gi + 1) {
            let density = if gj == gi + 1 { 0.8 } else { 0.3 };
            let edges = if local.gen_bool(density) {
                local.gen_range(1..=2)
            } else {
                0
            };
            for _ in 0..edges {
                let from = *g.choose(&mut local).unwrap();
                let to = *h.choose(&mut local).unwrap();
                b = rule(b, from, to, &mut local);
            }
        }
    }
    b.build().expect("generated systems are well-formed")
}

pub fn random_init(rng: &mut impl Rng, system: &CounterSystem, bound: i64) -> Configuration {
    let v: Vec<i64> = (0..system.dimension())
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Configuration::new(StateId(0), int_vec(&v))
}

/// Unimodular matrix: a product of a few elementary row operations, with its inverse.
fn unimodular(rng: &mut impl Rng, n: usize) -> (IntMatrix, IntMatrix) {
    let mut u = IntMatrix::identity(n);
    let mut inv = IntMatrix::identity(n);
    if n < 2 {
        return (u, inv);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let k: i64 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let mut e = IntMatrix::identity(n);
        e.set(i, j, BigInt::from(k));
        let mut e_inv = IntMatrix::identity(n);
        e_inv.set(i, j, BigInt::from(-k));
        u = e.mul(&u).unwrap();
        inv = inv.mul(&e_inv).unwrap();
    }
    (u, inv)
}

/// Block matrix of permutations, nilpotent shifts and identities, conjugated
/// by a small unimodular matrix.
pub fn random_finite_monoid_matrix(rng: &mut impl Rng, n: usize) -> IntMatrix {
    let mut blocks = Vec::new();
    let mut left = n;
    while left > 0 {
        let size = rng.gen_range(1..=left);
        let mut b = IntMatrix::zeros(size, size);
        match rng.gen_range(0..3) {
            0 => b = IntMatrix::identity(size),
            1 => {
                let mut perm: Vec<usize> = (0..size).collect();
                perm.shuffle(rng);
                for (i, &j) in perm.iter().enumerate() {
                    b.set(i, j, BigInt::from(if rng.gen_bool(0.2) { -1 } else { 1 }));
                }
            }
            _ => {
                for i in 0..size.saturating_sub(1) {
                    b.set(i, i + 1, BigInt::from(1));
                }
            }
        }
        blocks.push(b);
        left -= size;
    }
    let d = IntMatrix::block_diagonal(&blocks).unwrap();
    let (u, inv) = unimodular(rng, n);
    u.mul(&d).unwrap().mul(&inv).unwrap()
}

/// One simple cycle of 1 to 3 rules through fresh states, with random
/// updates and guards, resampled until the cycle's monoid is finite.
pub fn random_cycle_system(rng: &mut impl Rng, n: usize, guarded: bool) -> CounterSystem {
    loop {
        let s = cycle_candidate(rng, n, guarded);
        if s.require_finite_monoid(10_000).is_ok() {
            return s;
        }
    }
}

fn cycle_candidate(rng: &mut impl Rng, n: usize, guarded: bool) -> CounterSystem {
    let k = rng.gen_range(1..=3);
    let mut b = SystemBuilder::new(n);
    for i in 0..k {
        b = b.state(&format!("c{i}"), &[]);
    }
    for i in 0..k {
        let matrix = if rng.gen_bool(0.3) {
            random_finite_monoid_matrix(rng, n)
        } else {
            signed_partial_permutation(rng, n)
        };
        let off: Vec<i64> = (0..n).map(|_| rng.gen_range(-2..=2)).collect();
        let guard = if guarded {
            let rows = rng.gen_range(1..=2);
            Guard::new(
                (0..rows)
                    .map(|_| {
                        let c: Vec<i64> = (0..n).map(|_| rng.gen_range(-2..=2)).collect();
                        GuardRow::from_i64(&c, rng.gen_range(0..=12))
                    })
                    .collect(),
            )
        } else {
            Guard::top()
        };
        b = b.rule(
            &format!("e{i}"),
            &format!("c{i}"),
            &format!("c{}", (i + 1) % k),
            guard,
            AffineUpdate::new(matrix, int_vec(&off)),
        );
    }
    b.build().unwrap()
}

pub fn random_qbf(
    rng: &mut impl Rng,
    max_p: usize,
    max_q: usize,
    max_clauses: usize,
    max_lits: usize,
) -> Sigma2Qbf {
    let p = rng.gen_range(1..=max_p);
    let q = rng.gen_range(1..=max_q);
    let clauses = (0..rng.gen_range(1..=max_clauses))
        .map(|_| {
            (0..rng.gen_range(1..=max_lits))
                .map(|_| Lit {
                    var: if rng.gen_bool(0.5) {
                        Var::Y(rng.gen_range(0..p))
                    } else {
                        Var::Z(rng.gen_range(0..q))
                    },
                    positive: rng.gen_bool(0.5),
                })
                .collect()
        })
        .collect();
    Sigma2Qbf::new(p, q, clauses).unwrap()
}

/// Every Σ₂-QBF with the given block sizes and clause shape, up to clause order.
pub fn all_qbfs(p: usize, q: usize, max_clauses: usize, max_lits: usize) -> Vec<Sigma2Qbf> {
    let lits: Vec<Lit> = (0..p)
        .map(Var::Y)
        .chain((0..q).map(Var::Z))
        .flat_map(|var| [true, false].map(|positive| Lit { var, positive }))
        .collect();
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    for size in 1..=max_lits {
        combos(&lits, size, 0, &mut Vec::new(), &mut clauses);
    }
    let mut out = Vec::new();
    for count in 1..=max_clauses {
        let mut pick = Vec::new();
        multiset(&clauses, count, 0, &mut pick, &mut |cs| {
            out.push(Sigma2Qbf::new(p, q, cs.to_vec()).unwrap())
        });
    }
    out
}

fn combos(items: &[Lit], size: usize, from: usize, cur: &mut Vec<Lit>, out: &mut Vec<Vec<Lit>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for i in from..items.len() {
        cur.push(items[i]);
        combos(items, size, i + 1, cur, out);
        cur.pop();
    }
}

fn multiset(
    items: &[Vec<Lit>],
    count: usize,
    from: usize,
    cur: &mut Vec<Vec<Lit>>,
    f: &mut dyn FnMut(&[Vec<Lit>]),
) {
    if cur.len() == count {
        f(cur);
        return;
    }
    for i in from..items.len() {
        cur.push(items[i].clone());
        multiset(items, count, i + 1, cur, f);
        cur.pop();
    }
}

pub fn random_pltl(rng: &mut impl Rng, atoms: &[&str], depth: usize) -> Pltl {
    let leaf = |rng: &mut dyn rand::RngCore| {
        if rng.gen_bool(0.1) {
            Pltl::True
        } else {
            Pltl::atom(atoms.choose(rng).unwrap())
        }
    };
    if depth == 0 {
        return match rng.gen_range(0..4) {
            0 => Pltl::not(leaf(rng)),
            1 => Pltl::and(leaf(rng), leaf(rng)),
            _ => leaf(rng),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| {
        let d = rng.gen_range(0..depth);
        random_pltl(rng, atoms, d)
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let r = &mut local;
    match r.gen_range(0..9) {
        0 => Pltl::Next(Box::new(sub(r))),
        1 => Pltl::Prev(Box::new(sub(r))),
        2 => Pltl::Until(Box::new(sub(r)), Box::new(sub(r))),
        3 => Pltl::Since(Box::new(sub(r)), Box::new(sub(r))),
        4 => Pltl::eventually(sub(r)),
        5 => Pltl::always(sub(r)),
        6 => Pltl::not(random_pltl(r, atoms, depth)),
        7 => Pltl::and(random_pltl(r, atoms, depth), sub(r)),
        _ => Pltl::or(sub(r), random_pltl(r, atoms, depth)),
    }
}

/// A closed formula of quantifier height at most `height`.
pub fn random_fo(rng: &mut impl Rng, atoms: &[&str], height: u32) -> Fo {
    let vars = ["x", "y", "z"];
    fo_body(rng, atoms, &vars[..0], &vars, height, 3)
}

fn fo_body(
    rng: &mut impl Rng,
    atoms: &[&str],
    bound: &[&str],
    pool: &[&str],
    height: u32,
    size: u32,
) -> Fo {
    let quantify = height > 0 && (bound.is_empty() || rng.gen_bool(0.5));
    if quantify {
        let z = pool[bound.len()];
        let mut inner = bound.to_vec();
        inner.push(z);
        let body = fo_body(rng, atoms, &inner, pool, height - 1, size);
        return if rng.gen_bool(0.5) {
            Fo::exists(z.into(), body)
        } else {
            Fo::forall(z.into(), body)
        };
    }
    let atom = |rng: &mut dyn rand::RngCore| -> Fo {
        if bound.is_empty() {
            return Fo::True;
        }
        if bound.len() >= 2 && rng.gen_bool(0.35) {
            let a = bound.choose(rng).unwrap();
            let b = bound.choose(rng).unwrap();
            Fo::Less(a.to_string(), b.to_string())
        } else {
            Fo::Atom(
                atoms.choose(rng).unwrap().to_string(),
                bound.choose(rng).unwrap().to_string(),
            )
        }
    };
    if size == 0 {
        return atom(rng);
    }
    match rng.gen_range(0..4) {
        0 => Fo::not(fo_body(rng, atoms, bound, pool, height, size - 1)),
        1 => Fo::and(
            atom(rng),
            fo_body(rng, atoms, bound, pool, height, size - 1),
        ),
        2 => Fo::or(
            atom(rng),
            fo_body(rng, atoms, bound, pool, height, size - 1),
        ),
        _ => atom(rng),
    }
}
