//! Integer feasibility of `A·x <= b` over natural-valued unknowns.
//!
//! Exact rational simplex (phase one only, Bland's rule) inside a
//! depth-first branch and bound. Every variable is boxed by the small
//! solution bound `m^(2n) · ||A||_max^n · ||b||_inf`, so the search space is
//! finite even when the relaxation is unbounded.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::exactmat::{self, IntMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub coeffs: Vec<BigInt>,
    pub rhs: BigInt,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<BigInt>, rhs: BigInt) -> Self {
        LinearConstraint { coeffs, rhs }
    }

    pub fn holds(&self, x: &[BigInt]) -> bool {
        exactmat::dot(&self.coeffs, x) <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IlpError {
    #[error("row {row} has {found} coefficients, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("branch and bound gave up after {0} nodes")]
    NodeLimit(usize),
}

/// `matrix · x <= rhs` with `x >= lower` componentwise (zero by default).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinSys {
    num_vars: usize,
    rows: Vec<LinearConstraint>,
    lower: Vec<BigInt>,
}

impl LinSys {
    pub fn new(num_vars: usize, rows: Vec<LinearConstraint>) -> Result<Self, IlpError> {
        for (i, r) in rows.iter().enumerate() {
            if r.coeffs.len() != num_vars {
                return Err(IlpError::RowLength {
                    row: i,
                    expected: num_vars,
                    found: r.coeffs.len(),
                });
            }
        }
        Ok(LinSys {
            num_vars,
            rows,
            lower: exactmat::zero_vec(num_vars),
        })
    }

    pub fn from_matrix(matrix: &IntMatrix, rhs: &[BigInt]) -> Result<Self, IlpError> {
        let rows = (0..matrix.rows())
            .map(|i| LinearConstraint::new(matrix.row(i).to_vec(), rhs[i].clone()))
            .collect();
        Self::new(matrix.cols(), rows)
    }

    pub fn from_i64(rows: &[(&[i64], i64)]) -> Self {
        let n = rows.first().map_or(0, |r| r.0.len());
        let rows = rows
            .iter()
            .map(|(c, b)| LinearConstraint::new(exactmat::int_vec(c), BigInt::from(*b)))
            .collect();
        Self::new(n, rows).expect("rectangular literal")
    }

    /// Raises the lower bound of each variable; bounds below zero are ignored.
    pub fn with_lower_bounds(mut self, lower: Vec<BigInt>) -> Self {
        assert_eq!(lower.len(), self.num_vars);
        self.lower = lower.into_iter().map(|l| l.max(BigInt::zero())).collect();
        self
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LinearConstraint] {
        &self.rows
    }

    pub fn lower(&self) -> &[BigInt] {
        &self.lower
    }

    pub fn matrix(&self) -> IntMatrix {
        if self.rows.is_empty() {
            return IntMatrix::zeros(0, self.num_vars);
        }
        IntMatrix::from_rows(self.rows.iter().map(|r| r.coeffs.clone()).collect())
            .expect("rectangular")
    }

    pub fn rhs(&self) -> Vec<BigInt> {
        self.rows.iter().map(|r| r.rhs.clone()).collect()
    }

    pub fn satisfied_by(&self, x: &[BigInt]) -> bool {
        x.len() == self.num_vars
            && x.iter().zip(&self.lower).all(|(v, l)| v >= l)
            && self.rows.iter().all(|r| r.holds(x))
    }

    /// The equivalent system over `x - lower >= 0`.
    pub fn shifted(&self) -> LinSys {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                LinearConstraint::new(
                    r.coeffs.clone(),
                    &r.rhs - exactmat::dot(&r.coeffs, &self.lower),
                )
            })
            .collect();
        LinSys {
            num_vars: self.num_vars,
            rows,
            lower: exactmat::zero_vec(self.num_vars),
        }
    }
}

/// `m^(2n) · ||A||_max^n · ||b||_inf` with `n` padded to at least 2.
///
/// Lower bounds are ignored; apply it to [`LinSys::shifted`] when they matter.
pub fn small_solution_bound(sys: &LinSys) -> BigInt {
    let m = BigInt::from(sys.num_rows());
    let n = sys.num_vars().max(2);
    let a_max = sys
        .rows
        .iter()
        .flat_map(|r| r.coeffs.iter())
        .map(|c| c.abs())
        .max()
        .unwrap_or_default();
    let b_inf = sys
        .rows
        .iter()
        .map(|r| r.rhs.abs())
        .max()
        .unwrap_or_default();
    num_traits::pow(m, 2 * n) * num_traits::pow(a_max, n) * b_inf
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Sat(Vec<BigInt>),
    Unsat,
}

impl Feasibility {
    pub fn is_sat(&self) -> bool {
        matches!(self, Feasibility::Sat(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IlpOptions {
    pub node_limit: usize,
}

impl Default for IlpOptions {
    fn default() -> Self {
        IlpOptions {
            node_limit: 200_000,
        }
    }
}

pub fn feasible(sys: &LinSys) -> Result<Feasibility, IlpError> {
    feasible_with(sys, IlpOptions::default())
}

pub fn feasible_with(sys: &LinSys, opts: IlpOptions) -> Result<Feasibility, IlpError> {
    let shifted = sys.shifted();
    let bound = small_solution_bound(&shifted);
    let n = sys.num_vars();
    let Some(pre) = presolve(&shifted, bound) else {
        return Ok(Feasibility::Unsat);
    };
    let result = match branch_and_bound(&pre, n, opts)? {
        Some(y) => y,
        None => return Ok(Feasibility::Unsat),
    };
    let x: Vec<BigInt> = result.iter().zip(&sys.lower).map(|(y, l)| y + l).collect();
    assert!(
        sys.satisfied_by(&x),
        "branch and bound produced a non-solution"
    );
    Ok(Feasibility::Sat(x))
}

/// Rows touching at least two variables plus a box for every variable.
struct Presolved {
    rows: Vec<LinearConstraint>,
    lo: Vec<BigInt>,
    hi: Vec<BigInt>,
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

fn presolve(sys: &LinSys, bound: BigInt) -> Option<Presolved> {
    let n = sys.num_vars();
    let mut lo = exactmat::zero_vec(n);
    let mut hi = vec![bound; n];
    let mut best: HashMap<Vec<BigInt>, BigInt> = HashMap::new();
    let mut order = Vec::new();
    for r in &sys.rows {
        let g = r.coeffs.iter().fold(BigInt::zero(), |g, c| g.gcd(c));
        if g.is_zero() {
            if r.rhs.is_negative() {
                return None;
            }
            continue;
        }
        // Integer normalisation: divide by the gcd and round the bound down.
        let coeffs: Vec<BigInt> = r.coeffs.iter().map(|c| c / &g).collect();
        let rhs = floor_div(&r.rhs, &g);
        let support: Vec<usize> = (0..n).filter(|&j| !coeffs[j].is_zero()).collect();
        if support.len() == 1 {
            let j = support[0];
            if coeffs[j].is_positive() {
                hi[j] = hi[j].clone().min(rhs);
            } else {
                lo[j] = lo[j].clone().max(-rhs);
            }
            continue;
        }
        match best.get_mut(&coeffs) {
            Some(b) => {
                if rhs < *b {
                    *b = rhs;
                }
            }
            None => {
                order.push(coeffs.clone());
                best.insert(coeffs, rhs);
            }
        }
    }
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return None;
    }
    let rows = order
        .into_iter()
        .map(|c| {
            let rhs = best[&c].clone();
            LinearConstraint::new(c, rhs)
        })
        .collect();
    Some(Presolved { rows, lo, hi })
}

fn branch_and_bound(
    pre: &Presolved,
    n: usize,
    opts: IlpOptions,
) -> Result<Option<Vec<BigInt>>, IlpError> {
    let mut stack = vec![(pre.lo.clone(), pre.hi.clone())];
    let mut nodes = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(IlpError::NodeLimit(opts.node_limit));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            continue;
        }
        if pre.rows.iter().all(|r| r.holds(&lo)) {
            return Ok(Some(lo));
        }
        let Some(point) = relaxation_point(&pre.rows, &lo, &hi, n) else {
            continue;
        };
        match point.iter().position(|v| !v.is_integer()) {
            None => {
                let x: Vec<BigInt> = point.iter().map(|v| v.to_integer()).collect();
                return Ok(Some(x));
            }
            Some(j) => {
                let f = point[j].floor().to_integer();
                let mut up_lo = lo.clone();
                up_lo[j] = &f + 1;
                let mut down_hi = hi.clone();
                down_hi[j] = f;
                // pushed last so explored first
                stack.push((up_lo, hi));
                stack.push((lo, down_hi));
            }
        }
    }
    Ok(None)
}

/// A rational point of `{rows, lo <= x <= hi}`, if one exists.
fn relaxation_point(
    rows: &[LinearConstraint],
    lo: &[BigInt],
    hi: &[BigInt],
    n: usize,
) -> Option<Vec<BigRational>> {
    // Only variables mentioned by some row need to move off their lower bound.
    let active: Vec<usize> = (0..n)
        .filter(|&j| rows.iter().any(|r| !r.coeffs[j].is_zero()))
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for r in rows {
        a.push(
            active
                .iter()
                .map(|&j| r.coeffs[j].clone())
                .collect::<Vec<_>>(),
        );
        b.push(&r.rhs - exactmat::dot(&r.coeffs, lo));
    }
    for (k, &j) in active.iter().enumerate() {
        let mut row = exactmat::zero_vec(active.len());
        row[k] = BigInt::one();
        a.push(row);
        b.push(&hi[j] - &lo[j]);
    }
    let t = phase_one(&a, &b, active.len())?;
    let mut x: Vec<BigRational> = lo.iter().cloned().map(BigRational::from_integer).collect();
    for (k, &j) in active.iter().enumerate() {
        x[j] += &t[k];
    }
    Some(x)
}

/// Feasibility of `a·t <= b, t >= 0` over the rationals.
fn phase_one(a: &[Vec<BigInt>], b: &[BigInt], n: usize) -> Option<Vec<BigRational>> {
    let m = a.len();
    let art_rows: Vec<usize> = (0..m).filter(|&i| b[i].is_negative()).collect();
    if art_rows.is_empty() {
        return Some(vec![BigRational::zero(); n]);
    }
    // columns: t (n) | slacks (m) | artificials | rhs
    let cols = n + m + art_rows.len();
    let zero = BigRational::zero();
    let mut tab: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_of_row = vec![None; m];
    for (k, &i) in art_rows.iter().enumerate() {
        art_of_row[i] = Some(n + m + k);
    }
    for i in 0..m {
        let sign = if b[i].is_negative() {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        let mut row = vec![zero.clone(); cols + 1];
        for j in 0..n {
            row[j] = BigRational::from_integer(&a[i][j] * &sign);
        }
        row[n + i] = BigRational::from_integer(sign.clone());
        row[cols] = BigRational::from_integer(&b[i] * &sign);
        match art_of_row[i] {
            Some(c) => {
                row[c] = BigRational::one();
                basis.push(c);
            }
            None => basis.push(n + i),
        }
        tab.push(row);
    }
    // reduced costs of `minimise Σ artificials`
    let mut cost = vec![zero.clone(); cols + 1];
    for &i in &art_rows {
        for j in 0..=cols {
            if j < n + m || j == cols {
                cost[j] -= &tab[i][j];
            }
        }
    }
    while let Some(enter) = (0..cols).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if !tab[i][enter].is_positive() {
                continue;
            }
            let ratio = &tab[i][cols] / &tab[i][enter];
            leave = match leave {
                None => Some(i),
                Some(l) => {
                    let best = &tab[l][cols] / &tab[l][enter];
                    if ratio < best || (ratio == best && basis[i] < basis[l]) {
                        Some(i)
                    } else {
                        Some(l)
                    }
                }
            };
        }
        let leave = leave.expect("phase one objective is bounded below");
        pivot(&mut tab, &mut cost, leave, enter);
        basis[leave] = enter;
    }
    if !cost[cols].is_zero() {
        // objective row holds -Σ artificials; nonzero means infeasible
        return None;
    }
    let mut t = vec![zero; n];
    for (i, &c) in basis.iter().enumerate() {
        if c < n {
            t[c] = tab[i][cols].clone();
        }
    }
    Some(t)
}

fn pivot(tab: &mut [Vec<BigRational>], cost: &mut [BigRational], r: usize, c: usize) {
    let p = tab[r][c].clone();
    for v in tab[r].iter_mut() {
        if !v.is_zero() {
            *v /= &p;
        }
    }
    let prow = tab[r].clone();
    let eliminate = |row: &mut Vec<BigRational>| {
        let f = row[c].clone();
        if f.is_zero() {
            return;
        }
        for (v, pv) in row.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    };
    for (i, row) in tab.iter_mut().enumerate() {
        if i != r {
            eliminate(row);
        }
    }
    let mut cost_row = cost.to_vec();
    eliminate(&mut cost_row);
    cost.clone_from_slice(&cost_row);
}
