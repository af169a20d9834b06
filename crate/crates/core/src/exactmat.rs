//! Exact arbitrary-precision integer matrices.
//!
//! Everything here is dense and row-major. Systems handled by this crate are
//! small (a handful of counters) so exactness matters far more than layout.
//! Rational numbers are re-exported as [`BigRational`]; they are only used by
//! the relaxation inside [`crate::ilp`] and never mix with [`IntMatrix`].

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatrixError {
    #[error(
        "shape mismatch: {left_rows}x{left_cols} cannot be multiplied by {right_rows}x{right_cols}"
    )]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("ragged matrix: row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector of length {found} does not match {expected} columns")]
    VectorLength { expected: usize, found: usize },
}

/// A dense `rows x cols` matrix over the integers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from explicit rows. An empty row list gives a `0 x cols`
    /// matrix, where `cols` is taken to be zero.
    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != c {
                return Err(MatrixError::Ragged {
                    row: i,
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(IntMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    /// Convenience constructor for small literal matrices.
    ///
    /// Panics on ragged input.
    pub fn from_i64<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let rows = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        Self::from_rows(rows).expect("literal matrix must be rectangular")
    }

    /// Block-diagonal matrix with the given square blocks along the diagonal.
    pub fn block_diagonal(blocks: &[IntMatrix]) -> Result<Self, MatrixError> {
        let mut n = 0;
        for b in blocks {
            if !b.is_square() {
                return Err(MatrixError::NotSquare {
                    rows: b.rows,
                    cols: b.cols,
                });
            }
            n += b.rows;
        }
        let mut m = Self::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m.data[(off + i) * n + off + j] = b.get(i, j).clone();
                }
            }
            off += b.rows;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BigInt> {
        self.data.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Self::identity(self.rows)
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(l, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Result<Vec<BigInt>, MatrixError> {
        if v.len() != self.cols {
            return Err(MatrixError::VectorLength {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Row vector times matrix: `c^T * self`.
    pub fn left_mul_vec(&self, c: &[BigInt]) -> Result<Vec<BigInt>, MatrixError> {
        if c.len() != self.rows {
            return Err(MatrixError::VectorLength {
                expected: self.rows,
                found: c.len(),
            });
        }
        let mut out = vec![BigInt::zero(); self.cols];
        for (i, ci) in c.iter().enumerate() {
            if ci.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += ci * self.get(i, j);
            }
        }
        Ok(out)
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, k: &BigUint) -> Result<IntMatrix, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        let bits = k.bits();
        for bit in 0..bits {
            if k.bit(bit) {
                result = result.mul(&base)?;
            }
            if bit + 1 < bits {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    pub fn pow_u64(&self, k: u64) -> Result<IntMatrix, MatrixError> {
        self.pow(&BigUint::from(k))
    }

    /// Induced infinity norm: maximum absolute row sum.
    pub fn inf_norm(&self) -> BigInt {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<BigInt>())
            .max()
            .unwrap_or_default()
    }

    /// Maximum absolute entry.
    pub fn max_norm(&self) -> BigInt {
        self.data.iter().map(|x| x.abs()).max().unwrap_or_default()
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> Result<IntMatrix, MatrixError> {
    a.mul(b)
}

pub fn mat_pow(a: &IntMatrix, k: &BigUint) -> Result<IntMatrix, MatrixError> {
    a.pow(k)
}

/// `(inf_norm, max_norm)`.
pub fn norms(a: &IntMatrix) -> (BigInt, BigInt) {
    (a.inf_norm(), a.max_norm())
}

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .map(|(x, y)| x * y)
        .sum()
}

pub fn vec_add(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_scale(a: &[BigInt], k: &BigInt) -> Vec<BigInt> {
    a.iter().map(|x| x * k).collect()
}

pub fn vec_inf_norm(a: &[BigInt]) -> BigInt {
    a.iter().map(|x| x.abs()).max().unwrap_or_default()
}

pub fn zero_vec(n: usize) -> Vec<BigInt> {
    vec![BigInt::zero(); n]
}

pub fn int_vec(values: &[i64]) -> Vec<BigInt> {
    values.iter().map(|&x| BigInt::from(x)).collect()
}

/// The k-fold composition of `v -> a*v + b`, returned as `(a^k, b_k)`.
///
/// Computed by squaring the `(n+1) x (n+1)` homogeneous matrix, so the cost
/// is logarithmic in `k`.
pub fn affine_pow(
    a: &IntMatrix,
    b: &[BigInt],
    k: &BigUint,
) -> Result<(IntMatrix, Vec<BigInt>), MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if b.len() != n {
        return Err(MatrixError::VectorLength {
            expected: n,
            found: b.len(),
        });
    }
    let mut h = IntMatrix::zeros(n + 1, n + 1);
    for (i, bi) in b.iter().enumerate() {
        for j in 0..n {
            h.set(i, j, a.get(i, j).clone());
        }
        h.set(i, n, bi.clone());
    }
    h.set(n, n, BigInt::one());
    let p = h.pow(k)?;
    let mut m = IntMatrix::zeros(n, n);
    let mut off = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, p.get(i, j).clone());
        }
        off.push(p.get(i, n).clone());
    }
    Ok((m, off))
}

/// Power sequence of a matrix with a finite monoid: `powers[k] = A^k` for
/// `k < index + period`, and `A^index = A^(index+period)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoidInfo {
    pub index: usize,
    pub period: usize,
    pub powers: Vec<IntMatrix>,
}

impl MonoidInfo {
    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Position in `powers` holding `A^k`.
    pub fn reduce_exponent(&self, k: &BigUint) -> usize {
        let alpha = BigUint::from(self.index);
        if *k < alpha {
            return k.to_usize().expect("below index");
        }
        let shifted = (k - &alpha) % BigUint::from(self.period);
        self.index + shifted.to_usize().expect("below period")
    }

    pub fn power(&self, k: &BigUint) -> &IntMatrix {
        &self.powers[self.reduce_exponent(k)]
    }

    pub fn power_usize(&self, k: usize) -> &IntMatrix {
        self.power(&BigUint::from(k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfiniteReason {
    /// Some power has an entry above the bound every finite monoid obeys.
    EntryBound { bound: BigInt, entry: BigInt },
    /// More distinct powers than any finite monoid of this dimension has.
    Cardinality { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonoidVerdict {
    Finite(MonoidInfo),
    Infinite {
        power: usize,
        reason: InfiniteReason,
    },
    /// The iteration cap ran out before a repeat or a bound breach.
    Capped {
        iterations: usize,
    },
}

impl MonoidVerdict {
    pub fn finite(&self) -> Option<&MonoidInfo> {
        match self {
            MonoidVerdict::Finite(m) => Some(m),
            _ => None,
        }
    }
}

pub const DEFAULT_MONOID_CAP: usize = 1_000_000;

fn padded_dimension(n: usize) -> usize {
    n.max(2)
}

/// `(n * ||A||_max)^(2 n^2)`, with `n` padded to at least 2.
///
/// Every positive power of a matrix with a finite monoid stays below this.
pub fn power_entry_bound(a: &IntMatrix) -> BigInt {
    let n = padded_dimension(a.rows());
    let base = BigInt::from(n) * a.max_norm();
    num_traits::pow(base, 2 * n * n)
}

/// `2^(n^3)` with `n` padded to at least 2, saturated to `usize::MAX`.
pub fn monoid_cardinality_bound(n: usize) -> usize {
    let n = padded_dimension(n);
    let e = n.saturating_mul(n).saturating_mul(n);
    if e >= usize::BITS as usize {
        usize::MAX
    } else {
        1usize << e
    }
}

/// Enumerates `A^0, A^1, ...` until the first repeat.
///
/// Stops with [`MonoidVerdict::Infinite`] as soon as a power breaks
/// [`power_entry_bound`] or more than [`monoid_cardinality_bound`] distinct
/// powers were seen, and with [`MonoidVerdict::Capped`] once `cap` powers
/// were produced without a decision.
pub fn monoid_of(a: &IntMatrix, cap: usize) -> Result<MonoidVerdict, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let entry_bound = power_entry_bound(a);
    let card_bound = monoid_cardinality_bound(a.rows());
    let mut powers = vec![IntMatrix::identity(a.rows())];
    let mut seen: HashMap<IntMatrix, usize> = HashMap::new();
    seen.insert(powers[0].clone(), 0);
    loop {
        let k = powers.len();
        let next = powers[k - 1].mul(a)?;
        if let Some(&j) = seen.get(&next) {
            return Ok(MonoidVerdict::Finite(MonoidInfo {
                index: j,
                period: k - j,
                powers,
            }));
        }
        let entry = next.max_norm();
        if entry > entry_bound {
            return Ok(MonoidVerdict::Infinite {
                power: k,
                reason: InfiniteReason::EntryBound {
                    bound: entry_bound,
                    entry,
                },
            });
        }
        if k + 1 > card_bound {
            return Ok(MonoidVerdict::Infinite {
                power: k,
                reason: InfiniteReason::Cardinality { limit: card_bound },
            });
        }
        if k + 1 > cap {
            return Ok(MonoidVerdict::Capped { iterations: k });
        }
        seen.insert(next.clone(), k);
        powers.push(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_i64(rows)
    }

    #[test]
    fn identity_is_neutral() {
        let x = m(&[&[1, -2, 3], &[0, 4, 5], &[7, 8, -9]]);
        assert_eq!(IntMatrix::identity(3).mul(&x).unwrap(), x);
        assert_eq!(x.mul(&IntMatrix::identity(3)).unwrap(), x);
    }

    #[test]
    fn swap_squares_to_identity() {
        let s = m(&[&[0, 1], &[1, 0]]);
        assert!(s.mul(&s).unwrap().is_identity());
    }

    #[test]
    fn transfer_matrix_squares_to_zero() {
        // x3 := x1, others reset
        let t = m(&[&[0, 0, 0], &[0, 0, 0], &[1, 0, 0]]);
        assert!(t.mul(&t).unwrap().is_zero());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = IntMatrix::zeros(2, 3);
        assert!(matches!(a.mul(&a), Err(MatrixError::ShapeMismatch { .. })));
        assert!(matches!(a.pow_u64(2), Err(MatrixError::NotSquare { .. })));
    }

    #[test]
    fn powers() {
        let a = m(&[&[1, 1], &[0, 1]]);
        assert!(a.pow_u64(0).unwrap().is_identity());
        assert_eq!(a.pow_u64(10).unwrap(), m(&[&[1, 10], &[0, 1]]));
        let mut rot = IntMatrix::zeros(5, 5);
        for i in 0..4 {
            rot.set(i, i + 1, BigInt::one());
        }
        rot.set(4, 0, BigInt::one());
        assert!(rot.pow_u64(5).unwrap().is_identity());
        assert!(!rot.pow_u64(3).unwrap().is_identity());
    }

    #[test]
    fn norm_values() {
        assert_eq!(
            norms(&m(&[&[1, -2], &[3, 1]])),
            (BigInt::from(4), BigInt::from(3))
        );
        assert_eq!(
            norms(&IntMatrix::zeros(2, 2)),
            (BigInt::zero(), BigInt::zero())
        );
        assert_eq!(
            norms(&IntMatrix::identity(4)),
            (BigInt::one(), BigInt::one())
        );
    }

    #[test]
    fn affine_pow_matches_iteration() {
        let a = m(&[&[0, 1], &[1, 0]]);
        let b = int_vec(&[1, -2]);
        let mut v = int_vec(&[3, 5]);
        let start = v.clone();
        for k in 0..9u64 {
            let (ak, bk) = affine_pow(&a, &b, &BigUint::from(k)).unwrap();
            assert_eq!(vec_add(&ak.mul_vec(&start).unwrap(), &bk), v);
            v = vec_add(&a.mul_vec(&v).unwrap(), &b);
        }
    }

    #[test]
    fn monoid_examples() {
        let id = monoid_of(&IntMatrix::identity(3), DEFAULT_MONOID_CAP).unwrap();
        let info = id.finite().unwrap();
        assert_eq!((info.index, info.period, info.len()), (0, 1, 1));

        let nil = m(&[&[0, 1], &[0, 0]]);
        let info = monoid_of(&nil, DEFAULT_MONOID_CAP).unwrap();
        let info = info.finite().unwrap();
        assert_eq!((info.index, info.period), (2, 1));
        assert_eq!(
            info.powers,
            vec![IntMatrix::identity(2), nil.clone(), IntMatrix::zeros(2, 2)]
        );

        let swap = m(&[&[0, 1], &[1, 0]]);
        let info = monoid_of(&swap, DEFAULT_MONOID_CAP).unwrap();
        let info = info.finite().unwrap();
        assert_eq!((info.index, info.period), (0, 2));

        assert!(matches!(
            monoid_of(&m(&[&[2]]), DEFAULT_MONOID_CAP).unwrap(),
            MonoidVerdict::Infinite { .. }
        ));
        assert!(matches!(
            monoid_of(&m(&[&[1, 1], &[0, 1]]), DEFAULT_MONOID_CAP).unwrap(),
            MonoidVerdict::Infinite { .. }
        ));
    }

    #[test]
    fn monoid_cap_is_distinct_verdict() {
        let mut rot = IntMatrix::zeros(4, 4);
        for i in 0..3 {
            rot.set(i, i + 1, BigInt::one());
        }
        rot.set(3, 0, BigInt::one());
        assert_eq!(
            monoid_of(&rot, 2).unwrap(),
            MonoidVerdict::Capped { iterations: 2 }
        );
        assert!(monoid_of(&rot, 10).unwrap().finite().is_some());
    }

    #[test]
    fn zero_dimensional_monoid() {
        let info = monoid_of(&IntMatrix::identity(0), 10).unwrap();
        let info = info.finite().unwrap();
        assert_eq!((info.index, info.period), (0, 1));
    }

    #[test]
    fn reduce_exponent_wraps_into_cycle() {
        let nil = m(&[&[0, 1], &[0, 0]]);
        let info = monoid_of(&nil, 100).unwrap().finite().unwrap().clone();
        assert_eq!(info.reduce_exponent(&BigUint::from(1u32)), 1);
        assert_eq!(info.reduce_exponent(&BigUint::from(1000u32)), 2);
    }

    #[test]
    fn padded_bounds() {
        assert_eq!(power_entry_bound(&m(&[&[3]])), BigInt::from(6).pow(8));
        assert_eq!(monoid_cardinality_bound(1), 256);
        assert_eq!(monoid_cardinality_bound(3), 1 << 27);
    }
}
