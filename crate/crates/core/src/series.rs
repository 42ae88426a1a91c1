//! Truncated multivariate formal power series with exact complex-rational coefficients.
//!
//! A series carries its own truncation order: coefficients of total degree
//! above the order are unknown, not zero. The special order [`Order::Exact`]
//! marks a polynomial known exactly (no unknown tail); it is what the input
//! grammar produces, and it is the only kind of series that may be recentered
//! or composed with substitutions that do not vanish at the origin.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::multiindex::{MultiIndex, MAX_VARS};
use crate::scalar::{CScalar, Rational};

/// Truncation order of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    /// Terms of total degree `> n` are unknown.
    Finite(u32),
    /// Exact polynomial.
    Exact,
}

impl Order {
    pub fn admits(self, degree: u32) -> bool {
        match self {
            Order::Finite(n) => degree <= n,
            Order::Exact => true,
        }
    }

    /// Order after `k` differentiations.
    pub fn lowered(self, k: u32) -> Option<Order> {
        match self {
            Order::Finite(n) => n.checked_sub(k).map(Order::Finite),
            Order::Exact => Some(Order::Exact),
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Order::Finite(n) => Some(n),
            Order::Exact => None,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Order::Exact)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(n) => write!(f, "{n}"),
            Order::Exact => write!(f, "exact"),
        }
    }
}

/// Involution on variable indices used by [`TruncatedSeries::conjugate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing(Vec<usize>);

impl Pairing {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if map.iter().enumerate().all(|(i, &j)| j < n && map[j] == i) {
            Ok(Pairing(map))
        } else {
            Err(Error::NotAnInvolution(n))
        }
    }

    /// `(z₁…zₙ, z̄₁…z̄ₙ, s)`: `z_j ↔ z̄_j`, `s` fixed.
    pub fn intrinsic(n: usize) -> Self {
        let mut map: Vec<usize> = (0..n).map(|j| n + j).collect();
        map.extend(0..n);
        map.push(2 * n);
        Pairing(map)
    }

    /// `(z₁…z_{N−1}, w, z̄₁…z̄_{N−1}, w̄)`: holomorphic slot `j ↔ N + j`.
    pub fn ambient(big_n: usize) -> Self {
        let mut map: Vec<usize> = (0..big_n).map(|j| big_n + j).collect();
        map.extend(0..big_n);
        Pairing(map)
    }

    /// Variables untouched by conjugation.
    pub fn identity(nvars: usize) -> Self {
        Pairing((0..nvars).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self, var: usize) -> usize {
        self.0[var]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Exact truncated power series in `nvars` variables.
///
/// Invariants: no stored coefficient is zero and no stored monomial exceeds
/// the truncation order. Equality compares orders and coefficient maps.
#[derive(Clone, PartialEq, Eq)]
pub struct TruncatedSeries {
    nvars: usize,
    order: Order,
    coeffs: BTreeMap<MultiIndex, CScalar>,
}

impl TruncatedSeries {
    pub fn zero(nvars: usize, order: Order) -> Self {
        assert!(nvars <= MAX_VARS, "at most {MAX_VARS} variables supported");
        TruncatedSeries { nvars, order, coeffs: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: CScalar, order: Order) -> Self {
        Self::monomial(nvars, MultiIndex::zero(nvars), c, order)
    }

    pub fn one(nvars: usize, order: Order) -> Self {
        Self::constant(nvars, CScalar::one(), order)
    }

    /// The coordinate function `x_var`.
    pub fn var(nvars: usize, var: usize, order: Order) -> Self {
        Self::monomial(nvars, MultiIndex::unit(nvars, var), CScalar::one(), order)
    }

    pub fn monomial(nvars: usize, exps: MultiIndex, c: CScalar, order: Order) -> Self {
        let mut s = Self::zero(nvars, order);
        debug_assert_eq!(exps.len(), nvars);
        if !c.is_zero() && order.admits(exps.degree()) {
            s.coeffs.insert(exps, c);
        }
        s
    }

    /// Sums duplicate monomials, drops zeros and terms above the order.
    pub fn from_terms<I>(nvars: usize, order: Order, terms: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, CScalar)>,
    {
        let mut acc: BTreeMap<MultiIndex, CScalar> = BTreeMap::new();
        for (m, c) in terms {
            debug_assert_eq!(m.len(), nvars);
            if !order.admits(m.degree()) {
                continue;
            }
            *acc.entry(m).or_default() += &c;
        }
        acc.retain(|_, c| !c.is_zero());
        TruncatedSeries { nvars, order, coeffs: acc }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CScalar)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, m: &MultiIndex) -> CScalar {
        self.coeffs.get(m).cloned().unwrap_or_default()
    }

    pub fn coeff_of(&self, exps: &[u32]) -> CScalar {
        self.coeff(&MultiIndex::from_slice(exps))
    }

    pub fn constant_term(&self) -> CScalar {
        self.coeff(&MultiIndex::zero(self.nvars))
    }

    /// True when every known coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|m| m.degree()).max()
    }

    /// Lowest total degree carrying a nonzero coefficient.
    pub fn valuation(&self) -> Option<u32> {
        self.coeffs.keys().next().map(|m| m.degree())
    }

    /// Drops everything above `order`; the result order is the smaller of the two.
    pub fn truncate(&self, order: Order) -> Self {
        let order = order.min(self.order);
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(m, _)| order.admits(m.degree()))
            .map(|(m, c)| (*m, c.clone()))
            .collect();
        TruncatedSeries { nvars: self.nvars, order, coeffs }
    }

    /// Same coefficients with a (possibly larger) declared order. Only valid
    /// when the caller knows the coefficients are correct at that order.
    pub fn with_order_unchecked(mut self, order: Order) -> Self {
        self.order = order;
        self.coeffs.retain(|m, _| order.admits(m.degree()));
        self
    }

    fn check_nvars(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::NvarsMismatch { left: self.nvars, right: other.nvars });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_nvars(other)?;
        let order = self.order.min(other.order);
        let mut out = self.truncate(order);
        for (m, c) in &other.coeffs {
            if !order.admits(m.degree()) {
                continue;
            }
            let slot = out.coeffs.entry(*m).or_default();
            *slot += c;
            if slot.is_zero() {
                out.coeffs.remove(m);
            }
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.neg())
    }

    /// Cauchy product truncated at the smaller order.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_nvars(other)?;
        let order = self.order.min(other.order);
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Ok(Self::zero(self.nvars, order));
        }
        let mut acc: HashMap<MultiIndex, CScalar> = HashMap::new();
        for (ma, ca) in &self.coeffs {
            let da = ma.degree();
            if !order.admits(da) {
                break;
            }
            for (mb, cb) in &other.coeffs {
                // keys iterate by ascending degree
                if !order.admits(da + mb.degree()) {
                    break;
                }
                let prod = ca * cb;
                match acc.entry(ma.add(mb)) {
                    std::collections::hash_map::Entry::Occupied(mut e) => *e.get_mut() += &prod,
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(prod);
                    }
                }
            }
        }
        let coeffs = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Ok(TruncatedSeries { nvars: self.nvars, order, coeffs })
    }

    pub fn scale(&self, c: &CScalar) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars, self.order);
        }
        let coeffs = self.coeffs.iter().map(|(m, v)| (*m, v * c)).collect();
        TruncatedSeries { nvars: self.nvars, order: self.order, coeffs }
    }

    pub fn scale_rational(&self, r: &Rational) -> Self {
        self.scale(&CScalar::real(r.clone()))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(self.nvars, self.order);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative in `var`; the order drops by one.
    pub fn derive(&self, var: usize) -> Result<Self> {
        if var >= self.nvars {
            return Err(Error::VariableOutOfRange { index: var, nvars: self.nvars });
        }
        let order = self
            .order
            .lowered(1)
            .ok_or_else(|| Error::OrderExhausted(format!("derivative in x{var} of an order-0 series")))?;
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(m, _)| m.get(var) > 0)
            .map(|(m, c)| {
                let e = m.get(var);
                let mut m2 = *m;
                m2.set(var, e - 1);
                (m2, c.scale(&Rational::from_integer(BigInt::from(e))))
            })
            .collect();
        Ok(TruncatedSeries { nvars: self.nvars, order, coeffs })
    }

    /// `∂^α`, applying [`derive`](Self::derive) componentwise.
    pub fn derive_multi(&self, alpha: &MultiIndex) -> Result<Self> {
        let mut out = self.clone();
        for var in 0..alpha.len() {
            for _ in 0..alpha.get(var) {
                out = out.derive(var)?;
            }
        }
        Ok(out)
    }

    /// Conjugates coefficients and swaps exponents along `pairing`.
    pub fn conjugate(&self, pairing: &Pairing) -> Result<Self> {
        if pairing.len() != self.nvars {
            return Err(Error::NvarsMismatch { left: self.nvars, right: pairing.len() });
        }
        let coeffs =
            self.coeffs.iter().map(|(m, c)| (m.permuted(pairing.as_slice()), c.conj())).collect();
        Ok(TruncatedSeries { nvars: self.nvars, order: self.order, coeffs })
    }

    /// True when `conjugate(self) == self`.
    pub fn is_real(&self, pairing: &Pairing) -> bool {
        self.conjugate(pairing).map(|c| &c == self).unwrap_or(false)
    }

    /// Substitutes `x_i ↦ subs[i]`.
    ///
    /// Substitutions must vanish at the origin unless `self` is an exact
    /// polynomial. The result order is the minimum of `self.order` and every
    /// substitution order.
    pub fn compose(&self, subs: &[TruncatedSeries]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(Error::SubstitutionArity { expected: self.nvars, got: subs.len() });
        }
        let target_nvars = match subs.first() {
            Some(s) => s.nvars,
            None => return Ok(TruncatedSeries::constant(0, self.constant_term(), self.order)),
        };
        for s in subs {
            if s.nvars != target_nvars {
                return Err(Error::NvarsMismatch { left: target_nvars, right: s.nvars });
            }
        }
        let mut order = self.order;
        for s in subs {
            order = order.min(s.order);
        }
        let all_vanish = subs.iter().all(|s| s.constant_term().is_zero());
        if !all_vanish && !self.order.is_exact() {
            return Err(Error::NonzeroConstantSubstitution);
        }
        let mut powers: Vec<Vec<TruncatedSeries>> = subs
            .iter()
            .map(|s| vec![TruncatedSeries::one(target_nvars, order), s.truncate(order)])
            .collect();
        let mut acc: BTreeMap<MultiIndex, CScalar> = BTreeMap::new();
        for (m, c) in &self.coeffs {
            if all_vanish && !order.admits(m.degree()) {
                // every factor has valuation ≥ 1
                break;
            }
            let mut term = TruncatedSeries::constant(target_nvars, c.clone(), order);
            for var in 0..self.nvars {
                let e = m.get(var) as usize;
                if e == 0 {
                    continue;
                }
                while powers[var].len() <= e {
                    let next = &powers[var][powers[var].len() - 1] * &powers[var][1];
                    powers[var].push(next);
                }
                term = &term * &powers[var][e];
                if term.is_zero() {
                    break;
                }
            }
            for (tm, tc) in term.coeffs {
                *acc.entry(tm).or_default() += &tc;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(TruncatedSeries { nvars: target_nvars, order, coeffs: acc })
    }

    /// Multiplicative inverse of a series with nonzero constant term.
    pub fn invert_unit(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let c0_inv = c0.inv().ok_or(Error::NotAUnit)?;
        if self.order.is_exact() {
            if self.coeffs.len() == 1 {
                return Ok(Self::constant(self.nvars, c0_inv, Order::Exact));
            }
            return Err(Error::UnboundedInverse);
        }
        // 1/a = c0⁻¹ Σ_k (−u)^k with u = a/c0 − 1 of valuation ≥ 1
        let order = self.order;
        let n = order.finite().expect("finite order");
        let mut u = self.scale(&c0_inv);
        u.coeffs.remove(&MultiIndex::zero(self.nvars));
        let neg_u = u.neg();
        let mut acc = Self::one(self.nvars, order);
        let mut p = Self::one(self.nvars, order);
        for _ in 0..n {
            p = &p * &neg_u;
            if p.is_zero() {
                break;
            }
            acc = &acc + &p;
        }
        Ok(acc.scale(&c0_inv))
    }

    /// Taylor expansion of the same polynomial about `point`.
    pub fn recenter(&self, point: &[CScalar]) -> Result<Self> {
        if !self.order.is_exact() {
            return Err(Error::NotPolynomial);
        }
        if point.len() != self.nvars {
            return Err(Error::SubstitutionArity { expected: self.nvars, got: point.len() });
        }
        let subs: Vec<TruncatedSeries> = (0..self.nvars)
            .map(|v| {
                let mut s = TruncatedSeries::var(self.nvars, v, Order::Exact);
                if !point[v].is_zero() {
                    s.coeffs.insert(MultiIndex::zero(self.nvars), point[v].clone());
                }
                s
            })
            .collect();
        self.compose(&subs)
    }

    /// Value of an exact polynomial at a point.
    pub fn evaluate(&self, point: &[CScalar]) -> Result<CScalar> {
        if !self.order.is_exact() {
            return Err(Error::NotPolynomial);
        }
        if point.len() != self.nvars {
            return Err(Error::SubstitutionArity { expected: self.nvars, got: point.len() });
        }
        let mut acc = CScalar::zero();
        for (m, c) in &self.coeffs {
            let mut term = c.clone();
            for (v, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    term = &term * &point[v].pow(e as u32);
                }
            }
            acc += &term;
        }
        Ok(acc)
    }

    /// Renames variable `i` to `map[i]` in a series of `new_nvars` variables.
    pub fn embed(&self, new_nvars: usize, map: &[usize]) -> Self {
        assert_eq!(map.len(), self.nvars);
        let coeffs = self
            .coeffs
            .iter()
            .map(|(m, c)| {
                let mut out = MultiIndex::zero(new_nvars);
                for (i, &j) in map.iter().enumerate() {
                    out.set(j, out.get(j) + m.get(i));
                }
                (out, c.clone())
            })
            .collect::<Vec<_>>();
        Self::from_terms(new_nvars, self.order, coeffs)
    }

    /// Lossy numeric evaluation (real and imaginary parts) at a real point.
    pub fn eval_f64(&self, point: &[f64]) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (m, c) in &self.coeffs {
            let mut mono = 1.0;
            for (v, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    mono *= point[v].powi(e as i32);
                }
            }
            let (cr, ci) = c.to_f64_pair();
            re += cr * mono;
            im += ci * mono;
        }
        (re, im)
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            write!(f, "0")?;
        }
        let mut first = true;
        for (m, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (v, &e) in m.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{v}")?,
                    _ => write!(f, "*x{v}^{e}")?,
                }
            }
        }
        match self.order {
            Order::Finite(n) => write!(f, " + O({})", n + 1),
            Order::Exact => Ok(()),
        }
    }
}

// Operator forms panic on a variable-count mismatch, which is a programming
// error inside this crate; fallible entry points use `try_*`.
impl<'a> Add<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
        self.try_add(rhs).expect("series variable mismatch")
    }
}

impl<'a> Sub<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
        self.try_sub(rhs).expect("series variable mismatch")
    }
}

impl<'a> Mul<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
        self.try_mul(rhs).expect("series variable mismatch")
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        let coeffs = self.coeffs.iter().map(|(m, c)| (*m, -c)).collect();
        TruncatedSeries { nvars: self.nvars, order: self.order, coeffs }
    }
}

impl TruncatedSeries {
    #[allow(clippy::should_implement_trait)]
    pub fn neg(&self) -> TruncatedSeries {
        -self
    }
}
