//! Exponent vectors for monomials and differential operators.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

/// Upper bound on the number of variables of a single series.
pub const MAX_VARS: usize = 16;

/// Exponent vector `α`, one entry per variable.
///
/// Ordered graded-lexicographically: first by `|α|`, then by the exponent
/// tuple compared lexicographically. The order is total and stable, so
/// sorted maps iterate degree by degree.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    len: u8,
    exps: [u8; MAX_VARS],
}

impl MultiIndex {
    pub fn zero(len: usize) -> Self {
        assert!(len <= MAX_VARS, "at most {MAX_VARS} variables supported");
        MultiIndex { len: len as u8, exps: [0; MAX_VARS] }
    }

    pub fn unit(len: usize, var: usize) -> Self {
        let mut m = Self::zero(len);
        m.exps[var] = 1;
        m
    }

    pub fn from_slice(exps: &[u32]) -> Self {
        let mut m = Self::zero(exps.len());
        for (slot, &e) in m.exps.iter_mut().zip(exps) {
            *slot = u8::try_from(e).expect("exponent exceeds 255");
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn degree(&self) -> u32 {
        self.exps[..self.len()].iter().map(|&e| e as u32).sum()
    }

    pub fn get(&self, var: usize) -> u32 {
        self.exps[var] as u32
    }

    pub fn set(&mut self, var: usize, e: u32) {
        self.exps[var] = u8::try_from(e).expect("exponent exceeds 255");
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exps[..self.len()]
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.exponents().iter().map(|&e| e as u32).collect()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len, other.len);
        let mut out = *self;
        for i in 0..self.len() {
            out.exps[i] = self.exps[i].checked_add(other.exps[i]).expect("exponent overflow");
        }
        out
    }

    /// `self − other`, or `None` when some component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = *self;
        for i in 0..self.len() {
            out.exps[i] = self.exps[i].checked_sub(other.exps[i])?;
        }
        Some(out)
    }

    pub fn bump(&self, var: usize) -> MultiIndex {
        let mut out = *self;
        out.exps[var] += 1;
        out
    }

    /// Componentwise `self ≤ other`.
    pub fn divides(&self, other: &MultiIndex) -> bool {
        (0..self.len()).all(|i| self.exps[i] <= other.exps[i])
    }

    /// `α!` as a big integer.
    pub fn factorial(&self) -> BigInt {
        let mut acc = BigInt::one();
        for &e in self.exponents() {
            for k in 2..=e as u32 {
                acc *= k;
            }
        }
        acc
    }

    /// Multinomial-style product of binomials `Π binom(α_i, γ_i)`.
    pub fn binomial(&self, lower: &MultiIndex) -> BigInt {
        let mut acc = BigInt::one();
        for i in 0..self.len() {
            acc *= binomial(self.exps[i] as u64, lower.exps[i] as u64);
        }
        acc
    }

    /// Permutes exponents: new slot `pairing[i]` receives old slot `i`.
    pub fn permuted(&self, pairing: &[usize]) -> MultiIndex {
        let mut out = Self::zero(self.len());
        for (i, &j) in pairing.iter().enumerate() {
            out.exps[j] = self.exps[i];
        }
        out
    }

    /// Every multi-index of `len` variables with `|α| = degree`, ascending.
    pub fn all_of_degree(len: usize, degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; len];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(MultiIndex::from_slice(cur));
                return;
            }
            for e in 0..=left {
                cur[pos] = e;
                rec(pos + 1, left - e, cur, out);
            }
        }
        if len == 0 {
            if degree == 0 {
                out.push(MultiIndex::zero(0));
            }
            return out;
        }
        rec(0, degree, &mut cur, &mut out);
        out.sort();
        out
    }

    /// Every multi-index with `|α| ≤ max_degree`, in graded order.
    pub fn all_up_to(len: usize, max_degree: u32) -> Vec<MultiIndex> {
        (0..=max_degree).flat_map(|d| Self::all_of_degree(len, d)).collect()
    }
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.len.cmp(&other.len))
            .then_with(|| self.exponents().cmp(other.exponents()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.exponents())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.exponents().iter().map(|e| e.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}
