//! Exact linear algebra: Gauss–Jordan over ℚ and ℚ(i), fraction-free
//! elimination over the Gaussian integers, and inversion of matrices whose
//! entries are truncated series.
//!
//! Pivots are always taken from the lowest-index eligible row, so every
//! decomposition is deterministic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{CScalar, Rational};
use crate::series::TruncatedSeries;

/// Exact field operations needed by elimination.
pub trait Field: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// Multiplicative inverse of a nonzero element.
    fn inv(&self) -> Self;
}

impl Field for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn inv(&self) -> Self {
        num_traits::Inv::inv(self)
    }
}

impl Field for CScalar {
    fn zero() -> Self {
        CScalar::zero()
    }
    fn one() -> Self {
        CScalar::one()
    }
    fn is_zero(&self) -> bool {
        CScalar::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn inv(&self) -> Self {
        CScalar::inv(self).expect("inverse of zero")
    }
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref<F: Field>(rows: &mut [Vec<F>]) -> Vec<usize> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].inv();
        for x in rows[r].iter_mut().skip(c) {
            *x = x.mul(&inv);
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row).skip(c) {
                *x = x.sub(&f.mul(p));
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<F: Field>(rows: &[Vec<F>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Basis of `{x : A x = 0}` for `A` with `ncols` columns.
///
/// Basis vector `j` has a one in the `j`-th free column and zeros in the
/// other free columns.
pub fn nullspace<F: Field>(rows: &[Vec<F>], ncols: usize) -> Vec<Vec<F>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![F::zero(); ncols];
            v[f] = F::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = F::zero().sub(&m[r][f]);
            }
            v
        })
        .collect()
}

/// Some solution of `A x = b` (free variables set to zero).
pub fn solve<F: Field>(rows: &[Vec<F>], b: &[F]) -> Result<Vec<F>> {
    if rows.len() != b.len() {
        return Err(Error::Invalid(format!("{} equations, {} right-hand sides", rows.len(), b.len())));
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<F>> = rows
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut r = r.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.last() == Some(&ncols) {
        return Err(Error::Inconsistent("right-hand side outside the column span".into()));
    }
    let mut x = vec![F::zero(); ncols];
    for (r, &pc) in pivots.iter().enumerate() {
        x[pc] = aug[r][ncols].clone();
    }
    Ok(x)
}

pub fn mat_vec<F: Field>(rows: &[Vec<F>], x: &[F]) -> Vec<F> {
    rows.iter()
        .map(|r| r.iter().zip(x).fold(F::zero(), |acc, (a, b)| acc.add(&a.mul(b))))
        .collect()
}

/// Gaussian integer used by fraction-free elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GaussInt {
    re: BigInt,
    im: BigInt,
}

impl GaussInt {
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn mul(&self, o: &GaussInt) -> GaussInt {
        GaussInt { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }

    fn sub(&self, o: &GaussInt) -> GaussInt {
        GaussInt { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    /// Exact quotient; the divisor must divide `self`.
    fn div_exact(&self, d: &GaussInt) -> GaussInt {
        let norm = &d.re * &d.re + &d.im * &d.im;
        let num = GaussInt { re: &self.re * &d.re + &self.im * &d.im, im: &self.im * &d.re - &self.re * &d.im };
        let (qr, rr) = num.re.div_rem(&norm);
        let (qi, ri) = num.im.div_rem(&norm);
        debug_assert!(rr.is_zero() && ri.is_zero(), "inexact Bareiss division");
        GaussInt { re: qr, im: qi }
    }
}

/// Scales a row of ℚ(i) entries by the lcm of its denominators.
fn to_gauss_row(row: &[CScalar]) -> Vec<GaussInt> {
    let mut l = BigInt::one();
    for c in row {
        l = l.lcm(c.re.denom());
        l = l.lcm(c.im.denom());
    }
    row.iter()
        .map(|c| GaussInt {
            re: (&c.re * Rational::from_integer(l.clone())).to_integer(),
            im: (&c.im * Rational::from_integer(l.clone())).to_integer(),
        })
        .collect()
}

/// Rank by fraction-free (Bareiss) elimination over ℤ[i].
///
/// Each row is cleared of denominators first, which does not change the rank.
/// Used for every span decision; [`rank`] serves as an independent check.
pub fn bareiss_rank(rows: &[Vec<CScalar>]) -> usize {
    let mut m: Vec<Vec<GaussInt>> = rows.iter().map(|r| to_gauss_row(r)).collect();
    let nrows = m.len();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut prev = GaussInt { re: BigInt::one(), im: BigInt::zero() };
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in r + 1..nrows {
            let lead = m[i][c].clone();
            for j in c..ncols {
                let v = pivot.mul(&m[i][j]).sub(&lead.mul(&m[r][j]));
                m[i][j] = v.div_exact(&prev);
            }
        }
        prev = pivot;
        r += 1;
    }
    r
}

/// Inverse of a square matrix of series whose constant-term matrix is invertible.
pub fn invert_series_matrix(m: &[Vec<TruncatedSeries>]) -> Result<Vec<Vec<TruncatedSeries>>> {
    let n = m.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let nvars = m[0][0].nvars();
    let order = m.iter().flatten().map(|s| s.order()).min().expect("nonempty");
    let mut a: Vec<Vec<TruncatedSeries>> = m.to_vec();
    let mut inv: Vec<Vec<TruncatedSeries>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        TruncatedSeries::one(nvars, order)
                    } else {
                        TruncatedSeries::zero(nvars, order)
                    }
                })
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .find(|&i| !a[i][c].constant_term().is_zero())
            .ok_or_else(|| Error::Singular(format!("no unit pivot in column {c}")))?;
        a.swap(c, p);
        inv.swap(c, p);
        let pinv = a[c][c].truncate(order).invert_unit()?;
        for j in 0..n {
            a[c][j] = &a[c][j] * &pinv;
            inv[c][j] = &inv[c][j] * &pinv;
        }
        for i in 0..n {
            if i == c || a[i][c].is_zero() {
                continue;
            }
            let f = a[i][c].clone();
            for j in 0..n {
                a[i][j] = &a[i][j] - &(&f * &a[c][j]);
                inv[i][j] = &inv[i][j] - &(&f * &inv[c][j]);
            }
        }
    }
    Ok(inv)
}
