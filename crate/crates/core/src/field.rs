//! Prime-field arithmetic, Cauchy MDS matrices and exact linear solving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2^16 + 1.
pub const DEFAULT_PRIME: u64 = 65_537;

/// Arithmetic modulo a prime `p < 2^32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeField {
    p: u64,
}

impl Default for PrimeField {
    fn default() -> Self {
        PrimeField { p: DEFAULT_PRIME }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p >= 1 << 32 || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeField { p })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `a` must be non-zero.
    pub fn inv(&self, a: u64) -> u64 {
        assert!(a % self.p != 0, "inverse of zero");
        self.pow(a, self.p - 2)
    }

    /// Reduces an arbitrary signed integer into `[0, p)`.
    pub fn element(&self, v: i64) -> u64 {
        v.rem_euclid(self.p as i64) as u64
    }
}

/// Dense row-major matrix over a prime field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldMatrix {
    pub field: PrimeField,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        FieldMatrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(field: PrimeField, cols: usize, rows: Vec<Vec<u64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|&v| v % field.prime()));
        }
        Ok(FieldMatrix { field, rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut m = Self::zeros(self.field, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, self.get(r, c));
            }
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FieldMatrix { field: self.field, rows: rows.len(), cols: self.cols, data }
    }

    /// `[self; other]`.
    pub fn vstack(&self, other: &FieldMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FieldMatrix { field: self.field, rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Matrix times a stack of symbol vectors (`cols` vectors of equal length).
    pub fn apply(&self, vectors: &[&[u64]]) -> Vec<Vec<u64>> {
        assert_eq!(vectors.len(), self.cols, "operand count mismatch");
        let len = vectors.first().map_or(0, |v| v.len());
        let f = &self.field;
        (0..self.rows)
            .map(|r| {
                let mut acc = vec![0u64; len];
                for (c, v) in vectors.iter().enumerate() {
                    let coef = self.get(r, c);
                    if coef == 0 {
                        continue;
                    }
                    for (a, &x) in acc.iter_mut().zip(v.iter()) {
                        *a = f.add(*a, f.mul(coef, x));
                    }
                }
                acc
            })
            .collect()
    }

    pub fn determinant(&self) -> Result<u64> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("determinant of a non-square matrix".into()));
        }
        let f = self.field;
        let n = self.rows;
        let mut m = self.data.clone();
        let mut det = 1u64;
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| m[r * n + col] != 0) else {
                return Ok(0);
            };
            if piv != col {
                for c in 0..n {
                    m.swap(piv * n + c, col * n + c);
                }
                det = f.neg(det);
            }
            let pv = m[col * n + col];
            det = f.mul(det, pv);
            let inv = f.inv(pv);
            for r in col + 1..n {
                let factor = f.mul(m[r * n + col], inv);
                if factor == 0 {
                    continue;
                }
                for c in col..n {
                    let v = f.mul(factor, m[col * n + c]);
                    m[r * n + c] = f.sub(m[r * n + c], v);
                }
            }
        }
        Ok(det)
    }
}

/// Cauchy matrix `1 / (x_i - y_j)` with `x_i = i`, `y_j = rows + j`.
///
/// Every square submatrix of a Cauchy matrix is itself Cauchy and hence
/// invertible, so any `rows` columns span the full row space.
pub fn mds_cauchy(rows: usize, cols: usize, field: PrimeField) -> Result<FieldMatrix> {
    if rows > cols {
        return Err(Error::InvalidArgument(format!(
            "MDS matrix needs rows <= cols, got {rows} x {cols}"
        )));
    }
    let needed = (rows + cols) as u64;
    if needed > field.prime() {
        return Err(Error::FieldTooSmall { needed, prime: field.prime() });
    }
    let mut m = FieldMatrix::zeros(field, rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let x = i as u64;
            let y = (rows + j) as u64;
            m.set(i, j, field.inv(field.sub(x, y)));
        }
    }
    Ok(m)
}

/// Row-reduces `[a | b]` in place and returns the pivot columns of `a`.
fn row_reduce(a: &mut FieldMatrix, b: &mut [Vec<u64>]) -> Vec<usize> {
    let f = a.field;
    let (rows, cols) = (a.rows, a.cols);
    let mut pivots = Vec::new();
    let mut prow = 0;
    for col in 0..cols {
        if prow == rows {
            break;
        }
        let Some(piv) = (prow..rows).find(|&r| a.get(r, col) != 0) else {
            continue;
        };
        if piv != prow {
            for c in 0..cols {
                a.data.swap(piv * cols + c, prow * cols + c);
            }
            if !b.is_empty() {
                b.swap(piv, prow);
            }
        }
        let inv = f.inv(a.get(prow, col));
        for c in col..cols {
            let v = f.mul(a.get(prow, c), inv);
            a.set(prow, c, v);
        }
        if !b.is_empty() {
            for x in b[prow].iter_mut() {
                *x = f.mul(*x, inv);
            }
        }
        for r in 0..rows {
            if r == prow {
                continue;
            }
            let factor = a.get(r, col);
            if factor == 0 {
                continue;
            }
            for c in col..cols {
                let v = f.mul(factor, a.get(prow, c));
                let cur = a.get(r, c);
                a.set(r, c, f.sub(cur, v));
            }
            if !b.is_empty() {
                let (src, dst) = if r < prow {
                    let (lo, hi) = b.split_at_mut(prow);
                    (&hi[0], &mut lo[r])
                } else {
                    let (lo, hi) = b.split_at_mut(r);
                    (&lo[prow], &mut hi[0])
                };
                for (d, &s) in dst.iter_mut().zip(src.iter()) {
                    *d = f.sub(*d, f.mul(factor, s));
                }
            }
        }
        pivots.push(col);
        prow += 1;
    }
    pivots
}

/// Exact rank over the field.
pub fn rank(m: &FieldMatrix) -> usize {
    let mut a = m.clone();
    row_reduce(&mut a, &mut []).len()
}

/// Solves `a · x = rhs` for a full-column-rank `a` (square or tall).
///
/// `rhs` holds one symbol vector per row of `a`; the result holds one symbol
/// vector per column. Extra rows must be consistent with the solution.
pub fn solve(a: &FieldMatrix, rhs: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    if rhs.len() != a.rows {
        return Err(Error::DimensionMismatch(format!(
            "{} right-hand sides for {} equations",
            rhs.len(),
            a.rows
        )));
    }
    if a.cols > a.rows {
        return Err(Error::Singular(format!(
            "{} unknowns but only {} equations",
            a.cols, a.rows
        )));
    }
    let mut m = a.clone();
    let mut b: Vec<Vec<u64>> = rhs.to_vec();
    let pivots = row_reduce(&mut m, &mut b);
    if pivots.len() < a.cols {
        return Err(Error::Singular(format!(
            "rank {} < {} unknowns",
            pivots.len(),
            a.cols
        )));
    }
    if b[a.cols..].iter().any(|row| row.iter().any(|&v| v != 0)) {
        return Err(Error::Inconsistent(format!(
            "{} surplus equations disagree with the solution",
            a.rows - a.cols
        )));
    }
    b.truncate(a.cols);
    Ok(b)
}

/// Drops the `known` columns of `c`, then solves for the remaining unknowns.
///
/// `rhs_adjusted` must already have the known columns' contribution
/// subtracted. Unknowns come back in increasing column order.
pub fn solve_after_drop(
    c: &FieldMatrix,
    known: &[usize],
    rhs_adjusted: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    let mut is_known = vec![false; c.cols];
    for &k in known {
        if k >= c.cols {
            return Err(Error::OutOfRange { index: k as u64, limit: c.cols as u64 });
        }
        is_known[k] = true;
    }
    let unknown: Vec<usize> = (0..c.cols).filter(|&j| !is_known[j]).collect();
    if unknown.len() > c.rows {
        return Err(Error::Singular(format!(
            "{} unknown columns exceed {} rows",
            unknown.len(),
            c.rows
        )));
    }
    solve(&c.select_columns(&unknown), rhs_adjusted)
}
