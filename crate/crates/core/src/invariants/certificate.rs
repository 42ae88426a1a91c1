//! Linear differential operators in normal form and the commutator
//! certificates expressing `L^J T` through commutators `[L_{E₁}…L_{E_m}, L_F̄]`.
//!
//! For `ell0 = 1` and an index `F` with `h_{F̄1}(0) ≠ 0` the commutator
//! `C_{E,F̄} = [L_{E₁}…L_{E_m}, L_F̄]` decomposes exactly as
//!
//! ```text
//! C_{E,F̄} = Σ_l h_{F̄E_l} L^{E∖E_l} T + Σ_{|K| ≤ m−2} d_K L^K T,
//! ```
//!
//! and solving these relations recursively gives
//! `(h_{F̄1})^p L^J T = Σ_E b_E C_{E,F̄}` with `p = |J| − |J|₁ + 2`.
//! Every identity is checked twice: once in operator normal form and once by
//! applying both sides field by field to every monomial up to a fixed degree.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hypersurface::{Frame, VectorFieldOp};
use crate::multiindex::MultiIndex;
use crate::scalar::{CScalar, Rational};
use crate::series::{Order, TruncatedSeries};

/// `Σ_α c_α ∂^α` with series coefficients written to the left.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOperator {
    nvars: usize,
    terms: BTreeMap<MultiIndex, TruncatedSeries>,
}

fn sub_indices(alpha: &MultiIndex) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex::zero(alpha.len())];
    for var in 0..alpha.len() {
        let top = alpha.get(var);
        if top == 0 {
            continue;
        }
        out = out
            .into_iter()
            .flat_map(|g| {
                (0..=top).map(move |e| {
                    let mut h = g;
                    h.set(var, e);
                    h
                })
            })
            .collect();
    }
    out
}

impl DiffOperator {
    pub fn zero(nvars: usize) -> Self {
        DiffOperator { nvars, terms: BTreeMap::new() }
    }

    /// Multiplication by `f`.
    pub fn multiplication(f: &TruncatedSeries) -> Self {
        let mut op = Self::zero(f.nvars());
        if !f.is_zero() {
            op.terms.insert(MultiIndex::zero(f.nvars()), f.clone());
        }
        op
    }

    pub fn from_field(x: &VectorFieldOp) -> Self {
        let mut op = Self::zero(x.nvars());
        for (var, c) in x.coeffs().iter().enumerate() {
            if !c.is_zero() {
                op.terms.insert(MultiIndex::unit(x.nvars(), var), c.clone());
            }
        }
        op
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &TruncatedSeries)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<&TruncatedSeries> {
        self.terms.get(alpha)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }

    /// Highest derivative order present.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.degree()).max().unwrap_or(0)
    }

    fn accumulate(&mut self, alpha: MultiIndex, c: TruncatedSeries) -> Result<()> {
        match self.terms.remove(&alpha) {
            Some(prev) => {
                let sum = prev.try_add(&c)?;
                if !sum.is_zero() {
                    self.terms.insert(alpha, sum);
                }
            }
            None => {
                if !c.is_zero() {
                    self.terms.insert(alpha, c);
                }
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &DiffOperator) -> Result<DiffOperator> {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.accumulate(*a, c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DiffOperator) -> Result<DiffOperator> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffOperator {
        DiffOperator { nvars: self.nvars, terms: self.terms.iter().map(|(a, c)| (*a, c.neg())).collect() }
    }

    /// `f · self`.
    pub fn mul_series(&self, f: &TruncatedSeries) -> Result<DiffOperator> {
        let mut out = Self::zero(self.nvars);
        for (a, c) in &self.terms {
            out.accumulate(*a, f.try_mul(c)?)?;
        }
        Ok(out)
    }

    /// `self ∘ other` via `p ∂^α ∘ q ∂^β = Σ_{γ≤α} binom(α,γ) p (∂^γ q) ∂^{α−γ+β}`.
    pub fn compose(&self, other: &DiffOperator) -> Result<DiffOperator> {
        if self.nvars != other.nvars {
            return Err(Error::NvarsMismatch { left: self.nvars, right: other.nvars });
        }
        let mut out = Self::zero(self.nvars);
        for (alpha, p) in &self.terms {
            let gammas = sub_indices(alpha);
            for (beta, q) in &other.terms {
                for gamma in &gammas {
                    let dq = q.derive_multi(gamma)?;
                    if dq.is_zero() {
                        continue;
                    }
                    let binom = Rational::from_integer(alpha.binomial(gamma));
                    let c = p.try_mul(&dq)?.scale_rational(&binom);
                    let idx = alpha.checked_sub(gamma).expect("γ ≤ α").add(beta);
                    out.accumulate(idx, c)?;
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &DiffOperator) -> Result<DiffOperator> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    pub fn apply(&self, f: &TruncatedSeries) -> Result<TruncatedSeries> {
        let mut acc: Option<TruncatedSeries> = None;
        for (a, c) in &self.terms {
            let term = c.try_mul(&f.derive_multi(a)?)?;
            acc = Some(match acc {
                Some(s) => s.try_add(&term)?,
                None => term,
            });
        }
        Ok(acc.unwrap_or_else(|| TruncatedSeries::zero(self.nvars, f.order())))
    }
}

impl fmt::Display for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(a, c)| format!("({c})·∂^{:?}", a.to_vec())).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Printed form of `L^K T`, e.g. `L1^2 L2 T`.
pub fn operator_label(k: &[u32]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in k.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(format!("L{}", i + 1)),
            _ => parts.push(format!("L{}^{e}", i + 1)),
        }
    }
    parts.push("T".into());
    parts.join(" ")
}

fn commutator_label(e: &[usize], f: usize) -> String {
    let es: Vec<String> = e.iter().map(|a| format!("L{}", a + 1)).collect();
    format!("[{}, L{}bar]", es.join(" "), f + 1)
}

fn counts(e: &[usize], n: usize) -> Vec<u32> {
    let mut k = vec![0u32; n];
    for &a in e {
        k[a] += 1;
    }
    k
}

fn tuple_of(k: &[u32]) -> Vec<usize> {
    k.iter().enumerate().flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize)).collect()
}

fn all_counts(n: usize, degree: u32) -> Vec<Vec<u32>> {
    MultiIndex::all_of_degree(n, degree).into_iter().map(|m| m.to_vec()).collect()
}

fn agree(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<bool> {
    Ok(a.try_sub(b)?.is_zero())
}

/// Leading and lower coefficients of one commutator, checked against
/// `Σ_l h_{F̄E_l} L^{E∖E_l} T`.
#[derive(Clone, Debug)]
pub struct ExpansionCheck {
    pub target: String,
    /// `(K, expected, computed)` for `|K| = m − 1`.
    pub top: Vec<(Vec<u32>, TruncatedSeries, TruncatedSeries)>,
    /// `c_K = −d_K` for `|K| ≤ m − 2`, nonzero entries only.
    pub lower: Vec<(Vec<u32>, TruncatedSeries)>,
    pub monomials_checked: usize,
    pub violations: Vec<String>,
}

/// `(h_{F̄1})^p L^J T = Σ_E b_E C_{E,F̄}` for one `J`.
#[derive(Clone, Debug)]
pub struct WeightedCheck {
    pub j: Vec<u32>,
    pub p: u32,
    pub target: String,
    pub coefficients: Vec<(Vec<usize>, TruncatedSeries)>,
    pub monomials_checked: usize,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CommutatorCertificate {
    pub e: Vec<usize>,
    pub f: usize,
    pub order: u32,
    pub max_degree: u32,
    pub expansion: ExpansionCheck,
    pub weighted: Vec<WeightedCheck>,
}

impl CommutatorCertificate {
    pub fn m(&self) -> usize {
        self.e.len()
    }

    pub fn passed(&self) -> bool {
        self.expansion.violations.is_empty() && self.weighted.iter().all(|w| w.violations.is_empty())
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.expansion.violations.clone();
        for w in &self.weighted {
            out.extend(w.violations.iter().map(|v| format!("{}: {v}", w.target)));
        }
        out
    }

    pub fn checked(&self) -> usize {
        self.expansion.top.len()
            + self.expansion.monomials_checked
            + self.weighted.iter().map(|w| w.monomials_checked).sum::<usize>()
    }
}

struct Builder {
    f: usize,
    n: usize,
    nvars: usize,
    lops: Vec<DiffOperator>,
    lbar_f: DiffOperator,
    t: DiffOperator,
    powers: BTreeMap<Vec<u32>, DiffOperator>,
    commutators: BTreeMap<Vec<usize>, DiffOperator>,
    decompositions: BTreeMap<Vec<usize>, BTreeMap<Vec<u32>, TruncatedSeries>>,
    solutions: BTreeMap<Vec<u32>, BTreeMap<Vec<usize>, TruncatedSeries>>,
}

impl Builder {
    fn new(frame: &Frame, f: usize) -> Self {
        Builder {
            f,
            n: frame.n(),
            nvars: frame.nvars(),
            lops: frame.l().iter().map(DiffOperator::from_field).collect(),
            lbar_f: DiffOperator::from_field(&frame.lbar()[f]),
            t: DiffOperator::from_field(frame.t()),
            powers: BTreeMap::new(),
            commutators: BTreeMap::new(),
            decompositions: BTreeMap::new(),
            solutions: BTreeMap::new(),
        }
    }

    /// `L^K T` in normal form.
    fn power(&mut self, k: &[u32]) -> Result<DiffOperator> {
        if let Some(op) = self.powers.get(k) {
            return Ok(op.clone());
        }
        let op = match tuple_of(k).first() {
            None => self.t.clone(),
            Some(&a) => {
                let mut lower = k.to_vec();
                lower[a] -= 1;
                let inner = self.power(&lower)?;
                self.lops[a].compose(&inner)?
            }
        };
        self.powers.insert(k.to_vec(), op.clone());
        Ok(op)
    }

    /// `[L_{E₁}…L_{E_m}, L_F̄]` in normal form; `e` sorted.
    fn commutator(&mut self, e: &[usize]) -> Result<DiffOperator> {
        if let Some(op) = self.commutators.get(e) {
            return Ok(op.clone());
        }
        let mut prod = self.lops[e[0]].clone();
        for &a in &e[1..] {
            prod = prod.compose(&self.lops[a])?;
        }
        let op = prod.commutator(&self.lbar_f)?;
        self.commutators.insert(e.to_vec(), op.clone());
        Ok(op)
    }

    /// `∂_z^K ∂_s` multi-index.
    fn symbol(&self, k: &[u32]) -> MultiIndex {
        let mut exps = vec![0u32; self.nvars];
        exps[..self.n].copy_from_slice(k);
        exps[2 * self.n] = 1;
        MultiIndex::from_slice(&exps)
    }

    /// `C_E = Σ_K d_K L^K T`, peeled off from the highest `|K|` down; errors if
    /// anything remains.
    fn decompose(&mut self, e: &[usize]) -> Result<BTreeMap<Vec<u32>, TruncatedSeries>> {
        if let Some(d) = self.decompositions.get(e) {
            return Ok(d.clone());
        }
        let mut rem = self.commutator(e)?;
        let mut out = BTreeMap::new();
        for deg in (0..e.len() as u32).rev() {
            for k in all_counts(self.n, deg) {
                let Some(d) = rem.coefficient(&self.symbol(&k)).cloned() else {
                    continue;
                };
                let piece = self.power(&k)?.mul_series(&d)?;
                rem = rem.sub(&piece)?;
                out.insert(k, d);
            }
        }
        if !rem.is_zero() {
            return Err(Error::Inconsistent(format!(
                "{} is not a combination of L^K T: remainder {rem}",
                commutator_label(e, self.f)
            )));
        }
        self.decompositions.insert(e.to_vec(), out.clone());
        Ok(out)
    }

    /// `L^K T = Σ_E b_E C_E`, solving through `E = K + e₁`.
    fn solve(&mut self, k: &[u32]) -> Result<BTreeMap<Vec<usize>, TruncatedSeries>> {
        if let Some(s) = self.solutions.get(k) {
            return Ok(s.clone());
        }
        let mut e = tuple_of(k);
        e.insert(0, 0);
        let dec = self.decompose(&e)?;
        let lead = dec
            .get(k)
            .ok_or_else(|| Error::Inconsistent(format!("no leading {} in the commutator", operator_label(k))))?;
        let inv = lead.invert_unit()?;
        let mut sol: BTreeMap<Vec<usize>, TruncatedSeries> = BTreeMap::new();
        sol.insert(e.clone(), inv.clone());
        for (other, d) in &dec {
            if other.as_slice() == k {
                continue;
            }
            let coef = d.try_mul(&inv)?.neg();
            for (ee, b) in self.solve(other)? {
                let term = coef.try_mul(&b)?;
                let slot = match sol.remove(&ee) {
                    Some(prev) => prev.try_add(&term)?,
                    None => term,
                };
                sol.insert(ee, slot);
            }
        }
        self.solutions.insert(k.to_vec(), sol.clone());
        Ok(sol)
    }
}

/// `L^K T f` applied field by field.
fn apply_power(frame: &Frame, k: &[u32], f: &TruncatedSeries) -> Result<TruncatedSeries> {
    let mut out = frame.t().apply(f)?;
    for a in tuple_of(k).into_iter().rev() {
        out = frame.l()[a].apply(&out)?;
    }
    Ok(out)
}

/// `[L_{E₁}…L_{E_m}, L_F̄] f` applied field by field.
fn apply_commutator(frame: &Frame, e: &[usize], fi: usize, f: &TruncatedSeries) -> Result<TruncatedSeries> {
    let prod = |g: &TruncatedSeries| -> Result<TruncatedSeries> {
        let mut out = g.clone();
        for &a in e.iter().rev() {
            out = frame.l()[a].apply(&out)?;
        }
        Ok(out)
    };
    let lbar = &frame.lbar()[fi];
    prod(&lbar.apply(f)?)?.try_sub(&lbar.apply(&prod(f)?)?)
}

fn monomials(nvars: usize, max_degree: u32) -> Vec<TruncatedSeries> {
    MultiIndex::all_up_to(nvars, max_degree)
        .into_iter()
        .map(|m| TruncatedSeries::monomial(nvars, m, CScalar::one(), Order::Exact))
        .collect()
}

/// Index `F` with `h_{F̄1}(0) ≠ 0`, smallest first.
pub fn pairing_index(frame: &Frame) -> Result<usize> {
    let h = super::h_tensor_with(frame, 1, Exec::Sequential)?;
    let nonzero = |f: usize, d: usize| {
        h.get(&[f], super::Slot::D(d)).is_some_and(|v| !v.constant_term().is_zero())
    };
    let n = frame.n();
    if !(0..n).any(|f| (0..n).any(|d| nonzero(f, d))) {
        return Err(Error::Unsupported("commutator certificates need ell0 = 1".into()));
    }
    (0..n).find(|&f| nonzero(f, 0)).ok_or_else(|| {
        Error::Unsupported("h_{F̄1}(0) = 0 for every F; adapt the frame first".into())
    })
}

/// Certificate for `[L_{E₁}…L_{E_m}, L_F̄]` and the weighted solutions of
/// every `L^J T` with `|J| = m − 1`, checked on monomials of degree `≤ max_degree`.
pub fn commutator_certificate(
    frame: &Frame,
    e: &[usize],
    max_degree: u32,
    exec: Exec,
) -> Result<CommutatorCertificate> {
    let n = frame.n();
    if e.is_empty() || e.iter().any(|&a| a >= n) {
        return Err(Error::Invalid(format!("bad index tuple {:?}", e.iter().map(|a| a + 1).collect::<Vec<_>>())));
    }
    let f = pairing_index(frame)?;
    let m = e.len();
    let mut sorted = e.to_vec();
    sorted.sort_unstable();
    let h: Vec<TruncatedSeries> =
        (0..n).map(|d| super::lie_chain(frame, &[f])?.pair(&frame.l()[d])).collect::<Result<_>>()?;
    let mut b = Builder::new(frame, f);
    let dec = b.decompose(&sorted)?;
    let mono = monomials(frame.nvars(), max_degree);

    // Expected leading part Σ_l h_{F̄E_l} L^{E∖E_l} T.
    let mut expected: BTreeMap<Vec<u32>, TruncatedSeries> = BTreeMap::new();
    for l in 0..m {
        let mut rest = e.to_vec();
        let a = rest.remove(l);
        let k = counts(&rest, n);
        let slot = match expected.remove(&k) {
            Some(prev) => prev.try_add(&h[a])?,
            None => h[a].clone(),
        };
        expected.insert(k, slot);
    }
    let mut violations = Vec::new();
    let mut top = Vec::new();
    let zero = TruncatedSeries::zero(frame.nvars(), Order::Exact);
    for k in all_counts(n, m as u32 - 1) {
        let want = expected.get(&k).cloned().unwrap_or_else(|| zero.clone());
        let got = dec.get(&k).cloned().unwrap_or_else(|| zero.clone());
        if !agree(&want, &got)? {
            violations.push(format!("coefficient of {}: expected {want}, got {got}", operator_label(&k)));
        }
        if !(want.is_zero() && got.is_zero()) {
            top.push((k, want, got));
        }
    }
    let lower: Vec<(Vec<u32>, TruncatedSeries)> = dec
        .iter()
        .filter(|(k, _)| k.iter().sum::<u32>() + 1 < m as u32)
        .map(|(k, d)| (k.clone(), d.neg()))
        .collect();
    let target_parts: Vec<String> = top
        .iter()
        .map(|(k, _, _)| format!("h·{}", operator_label(k)))
        .collect();
    let target = format!("{} = {} + Σ c_K L^K T", target_parts.join(" + "), commutator_label(e, f));

    // Σ top − C − Σ c_K L^K T applied to monomials must vanish.
    let results = exec.try_map(&mono, |g| {
        let mut residual = apply_commutator(frame, e, f, g)?.neg();
        for (k, want, _) in &top {
            residual = residual.try_add(&want.try_mul(&apply_power(frame, k, g)?)?)?;
        }
        for (k, c) in &lower {
            residual = residual.try_sub(&c.try_mul(&apply_power(frame, k, g)?)?)?;
        }
        Ok::<_, Error>((!residual.is_zero()).then(|| format!("on {g}: residual {residual}")))
    })?;
    violations.extend(results.into_iter().flatten());
    let expansion = ExpansionCheck { target, top, lower, monomials_checked: mono.len(), violations };

    let mut weighted = Vec::new();
    for j in all_counts(n, m as u32 - 1) {
        let sol = b.solve(&j)?;
        let p = j.iter().sum::<u32>() - j[0] + 2;
        let hp = h[0].pow(p);
        let coefficients: Vec<(Vec<usize>, TruncatedSeries)> =
            sol.into_iter().map(|(ee, c)| Ok((ee, hp.try_mul(&c)?))).collect::<Result<_>>()?;
        let mut wv = Vec::new();
        // normal-form check
        let mut rhs = DiffOperator::zero(frame.nvars());
        for (ee, c) in &coefficients {
            rhs = rhs.add(&b.commutator(ee)?.mul_series(c)?)?;
        }
        let lhs = b.power(&j)?.mul_series(&hp)?;
        let diff = lhs.sub(&rhs)?;
        if !diff.is_zero() {
            wv.push(format!("normal forms differ by {diff}"));
        }
        let results = exec.try_map(&mono, |g| {
            let mut residual = hp.try_mul(&apply_power(frame, &j, g)?)?;
            for (ee, c) in &coefficients {
                residual = residual.try_sub(&c.try_mul(&apply_commutator(frame, ee, f, g)?)?)?;
            }
            Ok::<_, Error>((!residual.is_zero()).then(|| format!("on {g}: residual {residual}")))
        })?;
        wv.extend(results.into_iter().flatten());
        weighted.push(WeightedCheck {
            target: format!("h^{p}·{}", operator_label(&j)),
            j,
            p,
            coefficients,
            monomials_checked: mono.len(),
            violations: wv,
        });
    }
    Ok(CommutatorCertificate { e: e.to_vec(), f, order: frame.order(), max_degree, expansion, weighted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::build_frame;
    use crate::models;

    #[test]
    fn compose_matches_sequential_application() {
        let m = models::cubic(8).unwrap();
        let f = build_frame(&m).unwrap();
        let l = DiffOperator::from_field(&f.l()[0]);
        let lb = DiffOperator::from_field(&f.lbar()[0]);
        let comp = l.compose(&lb).unwrap();
        for g in monomials(3, 3) {
            let a = comp.apply(&g).unwrap();
            let b = f.l()[0].apply(&f.lbar()[0].apply(&g).unwrap()).unwrap();
            assert!(agree(&a, &b).unwrap());
        }
        let br = DiffOperator::from_field(&f.l()[0].bracket(&f.lbar()[0]).unwrap());
        assert!(l.commutator(&lb).unwrap().sub(&br).unwrap().is_zero());
    }

    #[test]
    fn heisenberg_single_commutator_is_h_t() {
        let m = models::heisenberg(2, 8).unwrap();
        let f = build_frame(&m).unwrap();
        let cert = commutator_certificate(&f, &[0], 3, Exec::Sequential).unwrap();
        assert!(cert.passed(), "{:?}", cert.violations());
        let (_, want, got) = &cert.expansion.top[0];
        assert_eq!(want.constant_term(), CScalar::from_ratios((0, 1), (-2, 1)));
        assert_eq!(got, want);
    }

    #[test]
    fn levi_zero_is_unsupported() {
        let m = models::m2(8).unwrap();
        let f = build_frame(&m).unwrap();
        assert!(matches!(commutator_certificate(&f, &[0, 0], 2, Exec::Sequential), Err(Error::Unsupported(_))));
    }
}
