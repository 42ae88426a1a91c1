//! Formal holomorphic vector fields tangent to a hypersurface: holomorphic
//! degeneracy, truncated infinitesimal automorphisms and the dimension bound
//! `(2N − 1)·binom(4N − 3, 2N − 2)`.
//!
//! Divisibility of a series by `ρ` is tested in graph coordinates: a series
//! `g(Z, Z̄)` vanishes on `M` exactly when `g(z, s + iφ, z̄, s − iφ) = 0`.
//! All computations happen in the normalized coordinates of the hypersurface
//! (see [`Hypersurface::rho`]).

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hypersurface::{graph_embedding, Hypersurface};
use crate::linalg;
use crate::multiindex::{binomial, MultiIndex};
use crate::scalar::{CScalar, Rational};
use crate::series::{Order, Pairing, TruncatedSeries};

/// `(2N − 1)·binom(4N − 3, 2N − 2)`.
pub fn aut_bound(big_n: usize) -> Result<BigInt> {
    if big_n < 2 {
        return Err(Error::Invalid(format!("the bound needs N ≥ 2, got {big_n}")));
    }
    let n = big_n as u64;
    Ok(BigInt::from(2 * n - 1) * binomial(4 * n - 3, 2 * n - 2))
}

/// How the degree of a candidate field is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Grading {
    /// Total degree of every coefficient `a_j`.
    Standard,
    /// Weights `z_j ↦ 1`, `w ↦ 2`; the field `Z^μ ∂_{Z_j}` has weight
    /// `wt(μ) − wt(Z_j)`.
    Weighted,
}

impl fmt::Display for Grading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grading::Standard => write!(f, "standard"),
            Grading::Weighted => write!(f, "weighted"),
        }
    }
}

fn weight(m: &MultiIndex, big_n: usize) -> u32 {
    (0..big_n).map(|v| m.get(v) * if v == big_n - 1 { 2 } else { 1 }).sum()
}

/// Monomials `Z^μ` allowed in the coefficient of `∂_{Z_j}`.
fn candidate_monomials(big_n: usize, j: usize, d: u32, grading: Grading) -> Vec<MultiIndex> {
    match grading {
        Grading::Standard => MultiIndex::all_up_to(big_n, d),
        Grading::Weighted => {
            let wj = if j == big_n - 1 { 2 } else { 1 };
            MultiIndex::all_up_to(big_n, d + wj).into_iter().filter(|m| weight(m, big_n) <= d + wj).collect()
        }
    }
}

/// Ambient monomial `Z^μ` as a series in `(Z, Z̄)`.
fn ambient_monomial(big_n: usize, mu: &MultiIndex, c: CScalar) -> TruncatedSeries {
    let mut e = vec![0u32; 2 * big_n];
    for (v, slot) in e.iter_mut().enumerate().take(big_n) {
        *slot = mu.get(v);
    }
    TruncatedSeries::monomial(2 * big_n, MultiIndex::from_slice(&e), c, Order::Exact)
}

/// `Y = Σ a_j(Z) ∂_{Z_j}` with polynomial coefficients in the holomorphic
/// ambient variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalVectorField {
    /// Coefficients as series in `(Z, Z̄)` not involving `Z̄`.
    pub coeffs: Vec<TruncatedSeries>,
    pub degree: u32,
    pub grading: Grading,
}

impl FormalVectorField {
    pub fn big_n(&self) -> usize {
        self.coeffs.len()
    }

    /// `Y f = Σ a_j ∂f/∂Z_j`.
    pub fn apply(&self, f: &TruncatedSeries) -> Result<TruncatedSeries> {
        let mut acc = TruncatedSeries::zero(f.nvars(), Order::Exact);
        for (j, a) in self.coeffs.iter().enumerate() {
            if !a.is_zero() {
                acc = acc.try_add(&a.try_mul(&f.derive(j)?)?)?;
            }
        }
        Ok(acc)
    }

    /// `(Y + Ȳ) f = Y f + conj(Y conj f)`; for real `f`, `2 Re(Y f)`.
    pub fn apply_real_part(&self, f: &TruncatedSeries) -> Result<TruncatedSeries> {
        let p = Pairing::ambient(self.big_n());
        let yf = self.apply(f)?;
        let ybar_f = self.apply(&f.conjugate(&p)?)?.conjugate(&p)?;
        yf.try_add(&ybar_f)
    }
}

impl fmt::Display for FormalVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.big_n();
        let mut first = true;
        for (j, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let name = if j == n - 1 { "w".to_string() } else { format!("z{}", j + 1) };
            write!(f, "({a}) d/d{name}")?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tangency {
    /// `Y ρ ≡ 0` on `M`: complex-linear conditions on complex unknowns.
    Holomorphic,
    /// `Re(Y ρ) ≡ 0` on `M`: real-linear conditions on real and imaginary parts.
    RealPart,
}

/// Exact linear system for fields of bounded degree tangent to `M` up to an order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangencySystem {
    pub tangency: Tangency,
    pub degree: u32,
    pub grading: Grading,
    pub order: u32,
    /// Scalar unknowns: complex for holomorphic tangency, real otherwise.
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
    pub solution_dim: usize,
    pub basis: Vec<FormalVectorField>,
    /// Basis fields whose residual fails an independent re-check.
    pub residual_violations: Vec<String>,
}

impl TangencySystem {
    /// Whether every basis field re-checked to zero residual.
    pub fn verified(&self) -> bool {
        self.residual_violations.is_empty()
    }

    /// Human-readable conclusion; truncated systems never certify degeneracy.
    pub fn verdict(&self) -> String {
        match (self.tangency, self.solution_dim) {
            (Tangency::Holomorphic, 0) => format!(
                "holomorphically nondegenerate: no tangent field of {} degree ≤ {} survives order {}",
                self.grading, self.degree, self.order
            ),
            (Tangency::Holomorphic, d) => {
                format!("no obstruction found up to order {} ({d} candidate fields remain)", self.order)
            }
            (Tangency::RealPart, d) => format!(
                "{d} real dimensions of infinitesimal automorphisms of {} degree ≤ {} up to order {}",
                self.grading, self.degree, self.order
            ),
        }
    }
}

/// Everything on `M` restricted to graph coordinates, truncated at `order`.
struct Restriction {
    embed: Vec<TruncatedSeries>,
    order: Order,
    pairing: Pairing,
}

impl Restriction {
    fn new(m: &Hypersurface, order: u32) -> Self {
        let ord = Order::Finite(order);
        let phi = if m.phi().order().is_exact() { m.phi().clone() } else { m.phi().truncate(ord) };
        Restriction { embed: graph_embedding(m.n(), &phi, Order::Exact), order: ord, pairing: Pairing::intrinsic(m.n()) }
    }

    fn apply(&self, g: &TruncatedSeries) -> Result<TruncatedSeries> {
        // the embedding may be exact while φ is truncated; cut everything at the order
        let g = if g.order().is_exact() && self.embed.iter().all(|e| e.order().is_exact()) {
            g.compose(&self.embed)?
        } else {
            g.truncate(self.order).compose(&self.embed.iter().map(|e| e.truncate(self.order)).collect::<Vec<_>>())?
        };
        Ok(g.truncate(self.order))
    }
}

fn build(
    m: &Hypersurface,
    d: u32,
    order: u32,
    grading: Grading,
    tangency: Tangency,
    exec: Exec,
) -> Result<TangencySystem> {
    let big_n = m.big_n();
    let rho = m.rho();
    let cands: Vec<(usize, MultiIndex)> = (0..big_n)
        .flat_map(|j| candidate_monomials(big_n, j, d, grading).into_iter().map(move |mu| (j, mu)))
        .collect();
    let max_deg = cands.iter().map(|(_, mu)| mu.degree()).max().unwrap_or(0);
    if order <= max_deg {
        return Err(Error::Invalid(format!(
            "order {order} leaves degree-{max_deg} coefficients unconstrained; use order ≥ {}",
            max_deg + 1
        )));
    }
    let res = Restriction::new(m, order);
    let drho: Vec<TruncatedSeries> = (0..big_n).map(|j| rho.derive(j)).collect::<Result<_>>()?;
    // column series: restriction of Z^μ ∂_j ρ
    let cols: Vec<TruncatedSeries> = exec.try_map(&cands, |(j, mu)| {
        res.apply(&ambient_monomial(big_n, mu, CScalar::one()).try_mul(&drho[*j])?)
    })?;
    let mut support: BTreeSet<MultiIndex> = BTreeSet::new();
    let columns: Vec<TruncatedSeries> = match tangency {
        Tangency::Holomorphic => cols,
        Tangency::RealPart => {
            let mut out = Vec::with_capacity(2 * cols.len());
            for g in &cols {
                let gbar = g.conjugate(&res.pairing)?;
                out.push(g.try_add(&gbar)?);
                out.push(g.try_sub(&gbar)?.scale(&CScalar::i()));
            }
            out
        }
    };
    for c in &columns {
        support.extend(c.terms().map(|(mono, _)| *mono));
    }
    let unknowns = columns.len();
    let (rank, null): (usize, Vec<Vec<CScalar>>) = match tangency {
        Tangency::Holomorphic => {
            let rows: Vec<Vec<CScalar>> =
                support.iter().map(|mono| columns.iter().map(|c| c.coeff(mono)).collect()).collect();
            (linalg::rank(&rows), linalg::nullspace(&rows, unknowns))
        }
        Tangency::RealPart => {
            let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(2 * support.len());
            for mono in &support {
                let coeffs: Vec<CScalar> = columns.iter().map(|c| c.coeff(mono)).collect();
                rows.push(coeffs.iter().map(|c| c.re.clone()).collect());
                rows.push(coeffs.iter().map(|c| c.im.clone()).collect());
            }
            rows.retain(|r| r.iter().any(|v| !num_traits::Zero::is_zero(v)));
            let null = linalg::nullspace(&rows, unknowns);
            let null = null
                .into_iter()
                .map(|v| {
                    v.chunks(2).map(|p| CScalar::new(p[0].clone(), p[1].clone())).collect::<Vec<CScalar>>()
                })
                .collect();
            (linalg::rank(&rows), null)
        }
    };
    let equations = match tangency {
        Tangency::Holomorphic => support.len(),
        Tangency::RealPart => 2 * support.len(),
    };
    let basis: Vec<FormalVectorField> = null
        .iter()
        .map(|v| {
            let mut coeffs = vec![TruncatedSeries::zero(2 * big_n, Order::Exact); big_n];
            for ((j, mu), c) in cands.iter().zip(v) {
                if !c.is_zero() {
                    coeffs[*j] = coeffs[*j].try_add(&ambient_monomial(big_n, mu, c.clone()))?;
                }
            }
            Ok(FormalVectorField { coeffs, degree: d, grading })
        })
        .collect::<Result<_>>()?;
    let checks = exec.try_map(&basis, |y| {
        let g = match tangency {
            Tangency::Holomorphic => y.apply(rho)?,
            Tangency::RealPart => y.apply_real_part(rho)?,
        };
        Ok::<_, Error>(res.apply(&g)?.is_zero())
    })?;
    let residual_violations = checks
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| format!("basis field {i}: {}", basis[i]))
        .collect();
    Ok(TangencySystem {
        tangency,
        degree: d,
        grading,
        order,
        unknowns,
        equations,
        rank,
        solution_dim: basis.len(),
        basis,
        residual_violations,
    })
}

/// Holomorphic fields `Y` of degree `≤ d` with `Y ρ ≡ 0` on `M` to `order`.
///
/// `solution_dim` counts complex dimensions. Zero certifies that no such
/// field of this degree exists; a positive count is evidence, not proof, of
/// holomorphic degeneracy.
pub fn holomorphic_degeneracy_test(
    m: &Hypersurface,
    d: u32,
    order: u32,
    grading: Grading,
    exec: Exec,
) -> Result<TangencySystem> {
    build(m, d, order, grading, Tangency::Holomorphic, exec)
}

/// Real dimension of the holomorphic fields `Y` of degree `≤ d` whose real
/// part is tangent to `M`, i.e. `Re(Y ρ) ≡ 0` on `M` to `order`.
pub fn infinitesimal_aut_dim(
    m: &Hypersurface,
    d: u32,
    order: u32,
    grading: Grading,
    exec: Exec,
) -> Result<TangencySystem> {
    build(m, d, order, grading, Tangency::RealPart, exec)
}
