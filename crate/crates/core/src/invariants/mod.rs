//! Invariant tensors of a hypersurface, its nondegeneracy filtration and the
//! identities relating tensors, frame derivatives and commutators.
//!
//! Conventions: `θ` is the characteristic form of the graph frame
//! (`⟨θ, T⟩ = 1`). For a tuple `(A₁…A_k)` the chain form is
//! `𝓛_{Ā_k}…𝓛_{Ā₁}θ` and
//!
//! ```text
//! h_{Ā₁…Ā_k D} = ⟨𝓛_{Ā_k}…𝓛_{Ā₁}θ, L_D⟩,     h_{Ā₁…Ā_k} = ⟨𝓛_{Ā_k}…𝓛_{Ā₁}θ, T⟩.
//! ```
//!
//! Indices are zero-based in code and one-based in printed labels.

mod certificate;

pub use certificate::{
    commutator_certificate, CommutatorCertificate, DiffOperator, ExpansionCheck, WeightedCheck,
};

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hypersurface::{build_frame, Frame, Hypersurface, OneForm, VectorFieldOp};
use crate::linalg;
use crate::scalar::{CScalar, Rational};
use crate::series::{Order, TruncatedSeries};

/// An integer invariant or an explicit marker that none was found up to `bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bounded {
    Finite(u32),
    Infinite { bound: u32 },
}

impl Bounded {
    pub fn finite(self) -> Option<u32> {
        match self {
            Bounded::Finite(v) => Some(v),
            Bounded::Infinite { .. } => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bounded::Finite(_))
    }
}

impl fmt::Display for Bounded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bounded::Finite(v) => write!(f, "{v}"),
            Bounded::Infinite { bound } => write!(f, "∞@{bound}"),
        }
    }
}

/// Slot of an `h` entry: a frame direction `L_D` or the transversal field `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    D(usize),
    T,
}

/// `h` entries for all tuples of one length.
#[derive(Clone, Debug)]
pub struct HTensor {
    pub k: usize,
    pub entries: BTreeMap<(Vec<usize>, Slot), TruncatedSeries>,
}

impl HTensor {
    pub fn get(&self, tuple: &[usize], slot: Slot) -> Option<&TruncatedSeries> {
        self.entries.get(&(tuple.to_vec(), slot))
    }

    /// Pairs of tuples related by a permutation whose contractions with `basis`
    /// (coordinates in the `L_D(0)`) differ at the origin.
    pub fn symmetry_violations(&self, basis: &[Vec<CScalar>]) -> Vec<String> {
        let n = basis.first().map_or(0, |b| b.len());
        let mut out = Vec::new();
        let contract = |tuple: &[usize], v: &[CScalar]| -> CScalar {
            let mut acc = CScalar::zero();
            for (d, c) in v.iter().enumerate().take(n) {
                if let Some(h) = self.get(tuple, Slot::D(d)) {
                    acc += &(&h.constant_term() * c);
                }
            }
            acc
        };
        let tuples: Vec<Vec<usize>> =
            self.entries.keys().filter(|(_, s)| *s == Slot::D(0)).map(|(t, _)| t.clone()).collect();
        for t in &tuples {
            let mut sorted = t.clone();
            sorted.sort_unstable();
            if &sorted == t {
                continue;
            }
            for (bi, v) in basis.iter().enumerate() {
                let a = contract(t, v);
                let b = contract(&sorted, v);
                if a != b {
                    out.push(format!("{} vs {} on kernel vector {}: {a} ≠ {b}", label(t), label(&sorted), bi + 1));
                }
            }
        }
        out
    }
}

/// Printed label of a tuple of barred indices, e.g. `(1bar,2bar)`.
pub fn label(tuple: &[usize]) -> String {
    let parts: Vec<String> = tuple.iter().map(|a| format!("{}bar", a + 1)).collect();
    format!("({})", parts.join(","))
}

/// `𝓛_{Ā_k}…𝓛_{Ā₁}θ` for `tuple = (A₁…A_k)`.
pub fn lie_chain(frame: &Frame, tuple: &[usize]) -> Result<OneForm> {
    let mut form = frame.theta().clone();
    for (step, &a) in tuple.iter().enumerate() {
        if a >= frame.n() {
            return Err(Error::Invalid(format!("index {} out of range", a + 1)));
        }
        form = form.interior_d(&frame.lbar()[a]).map_err(|e| match e {
            Error::OrderExhausted(_) => {
                Error::OrderExhausted(format!("chain {} exhausted at step {}", label(tuple), step + 1))
            }
            other => other,
        })?;
    }
    Ok(form)
}

/// All chain forms of lengths `0..=k`, level by level in lexicographic tuple order.
pub fn lie_chains(frame: &Frame, k: usize, exec: Exec) -> Result<Vec<Vec<(Vec<usize>, OneForm)>>> {
    let n = frame.n();
    let mut levels = vec![vec![(Vec::new(), frame.theta().clone())]];
    for _ in 0..k {
        let prev = levels.last().expect("level 0");
        let work: Vec<(usize, usize)> =
            (0..prev.len()).flat_map(|i| (0..n).map(move |a| (i, a))).collect();
        let next = exec.try_map(&work, |&(i, a)| {
            let (tuple, form) = &prev[i];
            let mut t = tuple.clone();
            t.push(a);
            form.interior_d(&frame.lbar()[a]).map(|f| (t, f))
        })?;
        levels.push(next);
    }
    Ok(levels)
}

/// `h` values of one chain form: `(h_T, [h_D])`.
pub fn chain_values(frame: &Frame, form: &OneForm) -> Result<(TruncatedSeries, Vec<TruncatedSeries>)> {
    let ht = form.pair(frame.t())?;
    let hd = frame.l().iter().map(|l| form.pair(l)).collect::<Result<Vec<_>>>()?;
    Ok((ht, hd))
}

/// Every `h` entry with a tuple of length `k`.
pub fn h_tensor(frame: &Frame, k: usize) -> Result<HTensor> {
    h_tensor_with(frame, k, Exec::default())
}

pub fn h_tensor_with(frame: &Frame, k: usize, exec: Exec) -> Result<HTensor> {
    let levels = lie_chains(frame, k, exec)?;
    tensor_from_level(frame, k, &levels[k], exec)
}

fn tensor_from_level(
    frame: &Frame,
    k: usize,
    level: &[(Vec<usize>, OneForm)],
    exec: Exec,
) -> Result<HTensor> {
    let values = exec.try_map(level, |(_, form)| chain_values(frame, form))?;
    let mut entries = BTreeMap::new();
    for ((tuple, _), (ht, hd)) in level.iter().zip(values) {
        entries.insert((tuple.clone(), Slot::T), ht);
        for (d, v) in hd.into_iter().enumerate() {
            entries.insert((tuple.clone(), Slot::D(d)), v);
        }
    }
    Ok(HTensor { k, entries })
}

/// Stopping rules for the filtration computation.
#[derive(Clone, Copy, Debug)]
pub struct FiltrationOptions {
    pub kmax: u32,
    pub lmax: u32,
    pub typemax: u32,
    pub exec: Exec,
}

impl FiltrationOptions {
    /// `kmax = N − 1`, `lmax = typemax = kmax + 1`.
    pub fn defaults(big_n: usize) -> Self {
        let kmax = big_n as u32 - 1;
        FiltrationOptions { kmax, lmax: kmax + 1, typemax: kmax + 1, exec: Exec::default() }
    }

    pub fn with_kmax(kmax: u32) -> Self {
        FiltrationOptions { kmax, lmax: kmax + 1, typemax: kmax + 1, exec: Exec::default() }
    }
}

/// Default working order `2(kmax + 2)`.
pub fn default_order(kmax: u32) -> u32 {
    2 * (kmax + 2)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiltrationReport {
    pub kmax: u32,
    pub lmax: u32,
    pub typemax: u32,
    /// `dim E_k(0)` for `k = 0..=kmax`.
    pub ek_dims: Vec<usize>,
    /// `dim F_k(0)` for `k = 0..=kmax`.
    pub fk_dims: Vec<usize>,
    /// `r_k = n − dim F_k(0)`.
    pub rk: Vec<usize>,
    /// Basis of `F_k(0)` in coordinates relative to `L_1(0)…L_n(0)`.
    pub fk_bases: Vec<Vec<Vec<CScalar>>>,
    pub k0: Bounded,
    pub levi_rank: usize,
    pub ell0: Bounded,
    /// Tuple and `D` realising `ell0`, first in lexicographic order.
    pub ell0_witness: Option<(Vec<usize>, usize)>,
    pub ell1: Bounded,
    pub ell1_witness: Option<(Vec<usize>, usize)>,
    pub m0: Bounded,
}

impl FiltrationReport {
    /// Structural invariants every report must satisfy.
    pub fn consistency_violations(&self, big_n: usize) -> Vec<String> {
        let mut out = Vec::new();
        for w in self.ek_dims.windows(2) {
            if w[0] > w[1] {
                out.push("E_k not increasing".into());
            }
        }
        for w in self.fk_dims.windows(2) {
            if w[0] < w[1] {
                out.push("F_k not decreasing".into());
            }
        }
        for (e, f) in self.ek_dims.iter().zip(&self.fk_dims) {
            if e + f != big_n {
                out.push(format!("dim E_k + dim F_k = {} ≠ {big_n}", e + f));
            }
        }
        if let (Some(k0), Some(m0)) = (self.k0.finite(), self.m0.finite()) {
            if m0 > k0 + 1 {
                out.push(format!("type {m0} exceeds k0 + 1 = {}", k0 + 1));
            }
        }
        if (self.ell0.is_finite() || self.ell1.is_finite()) && self.ell0 != self.ell1 {
            out.push(format!("ell0 = {} but ell1 = {}", self.ell0, self.ell1));
        }
        out
    }
}

fn is_zero_row(row: &[CScalar]) -> bool {
    row.iter().all(|c| c.is_zero())
}

/// Dimensions of `E_k(0)`, `F_k(0)` and the integers `k0, ell0, ell1, m0`.
pub fn intrinsic_filtration(frame: &Frame, opts: FiltrationOptions) -> Result<FiltrationReport> {
    let n = frame.n();
    let depth = opts.kmax.max(opts.lmax) as usize;
    let levels = lie_chains(frame, depth, opts.exec)?;
    // rows[k] = [(tuple, h_T(0), [h_D(0)])] for chains of length k
    let mut rows: Vec<Vec<(Vec<usize>, CScalar, Vec<CScalar>)>> = Vec::new();
    for level in &levels {
        let vals = opts.exec.try_map(level, |(tuple, form)| {
            let (ht, hd) = chain_values(frame, form)?;
            Ok::<_, Error>((tuple.clone(), ht.constant_term(), hd.iter().map(|h| h.constant_term()).collect()))
        })?;
        rows.push(vals);
    }

    let mut ek_dims = Vec::new();
    let mut fk_dims = Vec::new();
    let mut fk_bases = Vec::new();
    let mut e_rows: Vec<Vec<CScalar>> = vec![{
        let mut r = vec![CScalar::one()];
        r.extend(std::iter::repeat_n(CScalar::zero(), n));
        r
    }];
    let mut d_rows: Vec<Vec<CScalar>> = Vec::new();
    let mut k0 = Bounded::Infinite { bound: opts.kmax };
    for k in 0..=opts.kmax as usize {
        if k > 0 {
            for (_, ht, hd) in &rows[k] {
                let mut r = vec![ht.clone()];
                r.extend(hd.iter().cloned());
                e_rows.push(r);
                d_rows.push(hd.clone());
            }
        }
        let e = linalg::bareiss_rank(&e_rows);
        let kernel = if d_rows.is_empty() {
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { CScalar::one() } else { CScalar::zero() }).collect())
                .collect()
        } else {
            linalg::nullspace(&d_rows, n)
        };
        if e == n + 1 && !k0.is_finite() {
            k0 = Bounded::Finite(k as u32);
        }
        ek_dims.push(e);
        fk_dims.push(kernel.len());
        fk_bases.push(kernel);
    }
    let rk = fk_dims.iter().map(|f| n - f).collect();
    let levi_rows: Vec<Vec<CScalar>> = rows.get(1).map(|r| r.iter().map(|(_, _, hd)| hd.clone()).collect()).unwrap_or_default();
    let levi_rank = linalg::bareiss_rank(&levi_rows);

    let mut ell0 = Bounded::Infinite { bound: opts.lmax };
    let mut ell0_witness = None;
    'outer: for (l, level) in rows.iter().enumerate().take(opts.lmax as usize + 1).skip(1) {
        for (tuple, _, hd) in level {
            if let Some(d) = hd.iter().position(|h| !h.is_zero()) {
                ell0 = Bounded::Finite(l as u32);
                ell0_witness = Some((tuple.clone(), d));
                break 'outer;
            }
        }
    }

    let (ell1, ell1_witness) = first_bracket_depth(frame, opts.lmax, opts.exec)?;
    let m0 = finite_type(frame, opts.typemax, opts.exec)?;
    Ok(FiltrationReport {
        kmax: opts.kmax,
        lmax: opts.lmax,
        typemax: opts.typemax,
        ek_dims,
        fk_dims,
        rk,
        fk_bases,
        k0,
        levi_rank,
        ell0,
        ell0_witness,
        ell1,
        ell1_witness,
        m0,
    })
}

/// Nested brackets `[L_{Ā_r}, …[L_{Ā₁}, L_D]…]` for `r = 1..=depth`, lexicographic order.
pub fn nested_brackets(
    frame: &Frame,
    depth: u32,
    exec: Exec,
) -> Result<Vec<Vec<(Vec<usize>, usize, VectorFieldOp)>>> {
    let n = frame.n();
    let mut levels: Vec<Vec<(Vec<usize>, usize, VectorFieldOp)>> = Vec::new();
    if depth == 0 {
        return Ok(levels);
    }
    let first: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |d| (a, d))).collect();
    let level1 = exec.try_map(&first, |&(a, d)| {
        frame.lbar()[a].bracket(&frame.l()[d]).map(|b| (vec![a], d, b))
    })?;
    levels.push(level1);
    for _ in 1..depth {
        let prev = levels.last().expect("level 1");
        let work: Vec<(usize, usize)> =
            (0..prev.len()).flat_map(|i| (0..n).map(move |a| (i, a))).collect();
        let mut next = exec.try_map(&work, |&(i, a)| {
            let (tuple, d, field) = &prev[i];
            let mut t = tuple.clone();
            t.push(a);
            frame.lbar()[a].bracket(field).map(|b| (t, *d, b))
        })?;
        next.sort_by(|x, y| (&x.0, x.1).cmp(&(&y.0, y.1)));
        levels.push(next);
    }
    Ok(levels)
}

fn first_bracket_depth(
    frame: &Frame,
    lmax: u32,
    exec: Exec,
) -> Result<(Bounded, Option<(Vec<usize>, usize)>)> {
    let n = frame.n();
    let mut level: Vec<(Vec<usize>, usize, VectorFieldOp)> = Vec::new();
    for r in 1..=lmax {
        level = if r == 1 {
            let first: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |d| (a, d))).collect();
            exec.try_map(&first, |&(a, d)| frame.lbar()[a].bracket(&frame.l()[d]).map(|b| (vec![a], d, b)))?
        } else {
            let work: Vec<(usize, usize)> =
                (0..level.len()).flat_map(|i| (0..n).map(move |a| (i, a))).collect();
            let mut next = exec.try_map(&work, |&(i, a)| {
                let (tuple, d, field) = &level[i];
                let mut t = tuple.clone();
                t.push(a);
                frame.lbar()[a].bracket(field).map(|b| (t, *d, b))
            })?;
            next.sort_by(|x, y| (&x.0, x.1).cmp(&(&y.0, y.1)));
            next
        };
        let values = exec.try_map(&level, |(_, _, b)| frame.theta().pair(b).map(|v| v.constant_term()))?;
        if let Some(pos) = values.iter().position(|v| !v.is_zero()) {
            let (tuple, d, _) = &level[pos];
            return Ok((Bounded::Finite(r), Some((tuple.clone(), *d))));
        }
    }
    Ok((Bounded::Infinite { bound: lmax }, None))
}

/// Smallest `m ≤ typemax` with commutators of length `≤ m` spanning `ℂT_0M`.
pub fn finite_type(frame: &Frame, typemax: u32, exec: Exec) -> Result<Bounded> {
    let target = frame.nvars();
    let gens: Vec<VectorFieldOp> = frame.l().iter().chain(frame.lbar()).cloned().collect();
    let mut span: Vec<Vec<CScalar>> = gens.iter().map(|g| g.at_origin()).collect();
    if typemax >= 1 && linalg::bareiss_rank(&span) == target {
        return Ok(Bounded::Finite(1));
    }
    let mut level = gens.clone();
    for m in 2..=typemax {
        let work: Vec<(usize, usize)> =
            (0..gens.len()).flat_map(|g| (0..level.len()).map(move |c| (g, c))).collect();
        let next = exec.try_map(&work, |&(g, c)| gens[g].bracket(&level[c]))?;
        let mut dedup: Vec<VectorFieldOp> = Vec::new();
        for f in next {
            if !f.is_zero() && !dedup.contains(&f) {
                dedup.push(f);
            }
        }
        span.extend(dedup.iter().map(|f| f.at_origin()).filter(|v| !is_zero_row(v)));
        if linalg::bareiss_rank(&span) == target {
            return Ok(Bounded::Finite(m));
        }
        if dedup.is_empty() {
            break;
        }
        level = dedup;
    }
    Ok(Bounded::Infinite { bound: typemax })
}

/// Ambient `(0,1)` fields `L̄_j = ∂_{z̄_j} − (ρ_{z̄_j}/ρ_{w̄}) ∂_{w̄}` tangent to `M`.
pub fn ambient_cr_fields(m: &Hypersurface) -> Result<Vec<VectorFieldOp>> {
    let big_n = m.big_n();
    let n = m.n();
    let nv = 2 * big_n;
    let order = Order::Finite(m.order());
    let rho = m.rho().truncate(order);
    let rho_wbar = rho.derive(big_n + n)?;
    let inv = rho_wbar.invert_unit().map_err(|_| Error::NotAHypersurfacePoint("ρ_w̄(0) = 0".into()))?;
    (0..n)
        .map(|j| {
            let coef = rho.derive(big_n + j)?.try_mul(&inv)?.neg();
            let mut coeffs = vec![TruncatedSeries::zero(nv, coef.order()); nv];
            coeffs[big_n + j] = TruncatedSeries::one(nv, coef.order());
            coeffs[big_n + n] = coef;
            VectorFieldOp::new(coeffs)
        })
        .collect()
}

/// Ranks of `span{L̄^α ρ_z(0) : |α| ≤ k}` and the first `k` reaching `ℂ^N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtrinsicReport {
    pub ranks: Vec<usize>,
    pub k0: Bounded,
}

pub fn extrinsic_k0(m: &Hypersurface, kmax: u32) -> Result<ExtrinsicReport> {
    let big_n = m.big_n();
    let n = m.n();
    let order = Order::Finite(m.order());
    let rho = m.rho().truncate(order);
    let fields = ambient_cr_fields(m)?;
    let grad: Vec<TruncatedSeries> = (0..big_n).map(|j| rho.derive(j)).collect::<Result<_>>()?;
    // Current level: multisets α as nondecreasing tuples, with L̄^α ρ_z.
    let mut level: Vec<(Vec<usize>, Vec<TruncatedSeries>)> = vec![(Vec::new(), grad)];
    let mut rows: Vec<Vec<CScalar>> = Vec::new();
    let mut ranks = Vec::new();
    let mut k0 = Bounded::Infinite { bound: kmax };
    for k in 0..=kmax {
        if k > 0 {
            let mut next = Vec::new();
            for (alpha, vals) in &level {
                let start = alpha.last().copied().unwrap_or(0);
                for (j, field) in fields.iter().enumerate().skip(start) {
                    let applied = vals.iter().map(|v| field.apply(v)).collect::<Result<Vec<_>>>()?;
                    let mut a = alpha.clone();
                    a.push(j);
                    next.push((a, applied));
                }
            }
            level = next;
        }
        rows.extend(level.iter().map(|(_, vals)| vals.iter().map(|v| v.constant_term()).collect::<Vec<_>>()));
        let r = linalg::bareiss_rank(&rows);
        ranks.push(r);
        if r == big_n {
            k0 = Bounded::Finite(k);
            break;
        }
        if n == 0 {
            break;
        }
    }
    Ok(ExtrinsicReport { ranks, k0 })
}

/// Outcome of an identity check: how many instances were tested and which failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityReport {
    pub name: String,
    pub checked: usize,
    pub vacuous: bool,
    pub note: String,
    pub violations: Vec<String>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn new(name: &str) -> Self {
        IdentityReport { name: name.into(), checked: 0, vacuous: false, note: String::new(), violations: Vec::new() }
    }
}

/// `h_{Ā₁…Ā_k C̄ D} = L_C̄ h_{Ā₁…Ā_k D} + h_{Ā₁…Ā_k} h_{C̄ D}` as series, for tuples of length `≤ k`.
///
/// The structure-function term of the general identity is absent because it
/// vanishes for the graph frame; [`Frame::structure_functions`] checks that.
pub fn verify_chain_recursion(frame: &Frame, k: usize, exec: Exec) -> Result<IdentityReport> {
    let n = frame.n();
    let levels = lie_chains(frame, k + 1, exec)?;
    let values: Vec<Vec<(TruncatedSeries, Vec<TruncatedSeries>)>> = levels
        .iter()
        .map(|lvl| exec.try_map(lvl, |(_, form)| chain_values(frame, form)))
        .collect::<Result<_>>()?;
    let levi = &values[1];
    let mut report = IdentityReport::new("chain recursion");
    for j in 0..=k {
        let work: Vec<(usize, usize, usize)> = (0..levels[j].len())
            .flat_map(|i| (0..n).flat_map(move |c| (0..n).map(move |d| (i, c, d))))
            .collect();
        let results = exec.try_map(&work, |&(i, c, d)| {
            let (ht, hd) = &values[j][i];
            let lhs = &values[j + 1][i * n + c].1[d];
            let rhs = frame.lbar()[c].apply(&hd[d])?.try_add(&ht.try_mul(&levi[c].1[d])?)?;
            let residual = lhs.try_sub(&rhs)?;
            Ok::<_, Error>(if residual.is_zero() {
                None
            } else {
                let mut t = levels[j][i].0.clone();
                t.push(c);
                Some(format!("tuple {} D={}: residual {residual}", label(&t), d + 1))
            })
        })?;
        report.checked += results.len();
        report.violations.extend(results.into_iter().flatten());
    }
    Ok(report)
}

fn apply_chain(fields: &[VectorFieldOp], indices: &[usize], f: &TruncatedSeries) -> Result<TruncatedSeries> {
    // L_{C₁}…L_{C_j} f: the last index acts first
    let mut out = f.clone();
    for &c in indices.iter().rev() {
        out = fields[c].apply(&out)?;
    }
    Ok(out)
}

fn tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |a| {
                    let mut t2 = t.clone();
                    t2.push(a);
                    t2
                })
            })
            .collect();
    }
    out
}

fn ell0_of(frame: &Frame, lmax: u32, exec: Exec) -> Result<(Bounded, Vec<Vec<(Vec<usize>, OneForm)>>)> {
    let levels = lie_chains(frame, lmax as usize, exec)?;
    for (l, level) in levels.iter().enumerate().skip(1) {
        let vals = exec.try_map(level, |(_, form)| chain_values(frame, form))?;
        if vals.iter().any(|(_, hd)| hd.iter().any(|h| !h.constant_term().is_zero())) {
            return Ok((Bounded::Finite(l as u32), levels));
        }
    }
    Ok((Bounded::Infinite { bound: lmax }, levels))
}

/// Derivatives of lower tensors reproduce higher tensors at the origin up to
/// total depth `ell0`:
/// `(L_{C̄₁}…L_{C̄_j} h_{Ā₁…Ā_r D})(0) = (L_{C̄₁}…L_{C̄_j} L_{Ā_r} h_{Ā₁…Ā_{r−1} D})(0)` for
/// `r ≥ 2`, `j + r ≤ ell0`, and `h_{Ā₁…Ā_ℓ D}(0) = (L_{Ā_ℓ}…L_{Ā₂} h_{Ā₁ D})(0)` at `ℓ = ell0`.
pub fn verify_leading_tensor_derivatives(frame: &Frame, lmax: u32, exec: Exec) -> Result<IdentityReport> {
    let n = frame.n();
    let (ell0, levels) = ell0_of(frame, lmax, exec)?;
    let mut report = IdentityReport::new("leading tensor derivatives");
    let Some(ell0) = ell0.finite() else {
        report.vacuous = true;
        report.note = format!("ell0 = ∞@{lmax}: nothing to check");
        return Ok(report);
    };
    let ell0 = ell0 as usize;
    let hd = |tuple: &[usize], d: usize| -> Result<TruncatedSeries> {
        let level = &levels[tuple.len()];
        let idx = tuple.iter().fold(0, |acc, &a| acc * n + a);
        frame.l()[d].pipe_pair(&level[idx].1)
    };
    let mut cases: Vec<(Vec<usize>, Vec<usize>, usize)> = Vec::new();
    for r in 2..=ell0 {
        for j in 0..=(ell0 - r) {
            for a in tuples(n, r) {
                for c in tuples(n, j) {
                    for d in 0..n {
                        cases.push((a.clone(), c.clone(), d));
                    }
                }
            }
        }
    }
    let results = exec.try_map(&cases, |(a, c, d)| {
        let lhs = apply_chain(frame.lbar(), c, &hd(a, *d)?)?.constant_term();
        let mut inner = c.clone();
        inner.push(*a.last().expect("r ≥ 2"));
        let rhs = apply_chain(frame.lbar(), &inner, &hd(&a[..a.len() - 1], *d)?)?.constant_term();
        Ok::<_, Error>((lhs != rhs).then(|| {
            format!("A={} C={} D={}: {lhs} ≠ {rhs}", label(a), label(c), d + 1)
        }))
    })?;
    report.checked += results.len();
    report.violations.extend(results.into_iter().flatten());

    let top: Vec<(Vec<usize>, usize)> =
        tuples(n, ell0).into_iter().flat_map(|a| (0..n).map(move |d| (a.clone(), d))).collect();
    let results = exec.try_map(&top, |(a, d)| {
        let lhs = hd(a, *d)?.constant_term();
        let rhs = apply_chain(frame.lbar(), &a[1..].iter().rev().copied().collect::<Vec<_>>(), &hd(&a[..1], *d)?)?
            .constant_term();
        Ok::<_, Error>((lhs != rhs).then(|| format!("top A={} D={}: {lhs} ≠ {rhs}", label(a), d + 1)))
    })?;
    report.checked += results.len();
    report.violations.extend(results.into_iter().flatten());
    report.note = format!("ell0 = {ell0}");
    Ok(report)
}

trait PipePair {
    fn pipe_pair(&self, form: &OneForm) -> Result<TruncatedSeries>;
}

impl PipePair for VectorFieldOp {
    fn pipe_pair(&self, form: &OneForm) -> Result<TruncatedSeries> {
        form.pair(self)
    }
}

/// `⟨θ, [L_{Ā_r}, …[L_{Ā₁}, L_D]…]⟩(0) = −h_{Ā₁…Ā_r D}(0)` for `r ≤ min(ell0, lmax)`,
/// together with `ell0 = ell1` whenever either is finite.
pub fn verify_commutator_tensor_relation(frame: &Frame, lmax: u32, exec: Exec) -> Result<IdentityReport> {
    let n = frame.n();
    let (ell0, levels) = ell0_of(frame, lmax, exec)?;
    let depth = ell0.finite().unwrap_or(lmax);
    let brackets = nested_brackets(frame, depth, exec)?;
    let mut report = IdentityReport::new("commutator-tensor relation");
    for r in 1..=depth as usize {
        let level = &brackets[r - 1];
        let results = exec.try_map(level, |(tuple, d, b)| {
            let lhs = frame.theta().pair(b)?.constant_term();
            let idx = tuple.iter().fold(0, |acc, &a| acc * n + a);
            let h = levels[r][idx].1.pair(&frame.l()[*d])?.constant_term();
            let rhs = -h;
            Ok::<_, Error>((lhs != rhs).then(|| format!("A={} D={}: {lhs} ≠ {rhs}", label(tuple), d + 1)))
        })?;
        report.checked += results.len();
        report.violations.extend(results.into_iter().flatten());
    }
    let (ell1, _) = first_bracket_depth(frame, lmax, exec)?;
    if (ell0.is_finite() || ell1.is_finite()) && ell0 != ell1 {
        report.violations.push(format!("ell0 = {ell0} but ell1 = {ell1}"));
    }
    report.note = format!("ell0 = {ell0}, ell1 = {ell1}");
    Ok(report)
}

/// Frame checks: duality, reality and vanishing structure functions.
pub fn verify_frame(frame: &Frame) -> Result<IdentityReport> {
    let mut report = IdentityReport::new("frame structure");
    let n = frame.n();
    let nfields = 2 * n + 1;
    report.checked = nfields * nfields + 2 * n + 2 + n * (2 * n * n + 2 * n);
    report.violations = frame.violations()?;
    Ok(report)
}

/// One sample point of a nondegeneracy scan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanPoint {
    pub z: Vec<CScalar>,
    pub s: Rational,
    /// Ambient point `(z, w)` on `M`.
    pub point: Vec<CScalar>,
    pub k0: Bounded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanReport {
    pub k: u32,
    pub points: Vec<ScanPoint>,
}

impl ScanReport {
    /// Number of points that are `j`-nondegenerate for some `j ≤ k`.
    pub fn nondegenerate_count(&self) -> usize {
        self.points.iter().filter(|p| p.k0.finite().is_some_and(|v| v <= self.k)).count()
    }
}

/// Cartesian grid of sample parameters: every `z_j` ranges over `zs`, `s` over `ss`.
pub fn scan_grid(n: usize, zs: &[CScalar], ss: &[Rational]) -> Vec<(Vec<CScalar>, Rational)> {
    let mut zpts: Vec<Vec<CScalar>> = vec![Vec::new()];
    for _ in 0..n {
        zpts = zpts
            .into_iter()
            .flat_map(|p| {
                zs.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    zpts.into_iter().flat_map(|z| ss.iter().map(move |s| (z.clone(), s.clone()))).collect()
}

/// Extrinsic nondegeneracy order at each sample point of a polynomial hypersurface.
pub fn nondegeneracy_scan(
    m: &Hypersurface,
    samples: &[(Vec<CScalar>, Rational)],
    k: u32,
    exec: Exec,
) -> Result<ScanReport> {
    if !m.is_polynomial() {
        return Err(Error::NotPolynomial);
    }
    let points = exec.try_map(samples, |(z, s)| {
        let point = m.point_on(z, s)?;
        let local = m.recenter(&point)?;
        let ext = extrinsic_k0(&local, k)?;
        Ok::<_, Error>(ScanPoint { z: z.clone(), s: s.clone(), point, k0: ext.k0 })
    })?;
    Ok(ScanReport { k, points })
}

/// Both nondegeneracy computations plus the filtration for one hypersurface.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub filtration: FiltrationReport,
    pub extrinsic: ExtrinsicReport,
}

impl Analysis {
    pub fn k0_agree(&self) -> bool {
        self.filtration.k0 == self.extrinsic.k0
    }
}

pub fn analyze(m: &Hypersurface, opts: FiltrationOptions) -> Result<Analysis> {
    let frame = build_frame(m)?;
    let filtration = intrinsic_filtration(&frame, opts)?;
    let extrinsic = extrinsic_k0(m, opts.kmax)?;
    Ok(Analysis { filtration, extrinsic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::exterior_derivative;
    use crate::models;

    fn minus_2i() -> CScalar {
        CScalar::from_ratios((0, 1), (-2, 1))
    }

    #[test]
    fn heisenberg_chain_and_tensor() {
        let m = models::heisenberg(2, 6).unwrap();
        let f = build_frame(&m).unwrap();
        assert_eq!(lie_chain(&f, &[]).unwrap(), *f.theta());
        let chain = lie_chain(&f, &[0]).unwrap();
        let oracle = exterior_derivative(f.theta()).eval(&f.lbar()[0], &f.l()[0]).unwrap();
        assert_eq!(chain.pair(&f.l()[0]).unwrap().constant_term(), oracle.constant_term());
        assert_eq!(oracle.constant_term(), minus_2i());
        assert!(chain.pair(&f.lbar()[0]).unwrap().is_zero());
        let h = h_tensor(&f, 1).unwrap();
        assert_eq!(h.get(&[0], Slot::D(0)).unwrap().constant_term(), minus_2i());
    }

    #[test]
    fn heisenberg_filtration() {
        let m = models::heisenberg(2, 6).unwrap();
        let a = analyze(&m, FiltrationOptions::defaults(2)).unwrap();
        let r = &a.filtration;
        assert_eq!(r.ek_dims, vec![1, 2]);
        assert_eq!(r.k0, Bounded::Finite(1));
        assert_eq!(r.ell0, Bounded::Finite(1));
        assert_eq!(r.ell1, Bounded::Finite(1));
        assert_eq!(r.m0, Bounded::Finite(2));
        assert_eq!(r.levi_rank, 1);
        assert_eq!(a.extrinsic.k0, Bounded::Finite(1));
        assert!(r.consistency_violations(2).is_empty());
    }

    #[test]
    fn m2_markers() {
        let m = models::m2(16).unwrap();
        let a = analyze(&m, FiltrationOptions::with_kmax(6)).unwrap();
        assert_eq!(a.filtration.k0, Bounded::Infinite { bound: 6 });
        assert_eq!(a.extrinsic.k0, Bounded::Infinite { bound: 6 });
        assert_eq!(a.filtration.ell0, Bounded::Infinite { bound: 7 });
        assert_eq!(a.filtration.ell1, Bounded::Infinite { bound: 7 });
        assert_eq!(a.filtration.m0, Bounded::Finite(4));
        assert_eq!(a.filtration.ell0.to_string(), "∞@7");
    }

    #[test]
    fn heisenberg_identities() {
        let m = models::heisenberg(2, 6).unwrap();
        let f = build_frame(&m).unwrap();
        for k in 0..=2 {
            assert!(verify_chain_recursion(&f, k, Exec::Sequential).unwrap().passed());
        }
        let r = verify_commutator_tensor_relation(&f, 2, Exec::Sequential).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        let l = verify_leading_tensor_derivatives(&f, 2, Exec::Sequential).unwrap();
        assert!(l.passed());
    }
}
