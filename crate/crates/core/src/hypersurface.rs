//! Real hypersurfaces in graph form and their adapted frames.
//!
//! A hypersurface `M ⊂ ℂ^N` is given by a real defining function `ρ` in the
//! ambient variables `(z₁…zₙ, w, z̄₁…z̄ₙ, w̄)`. After a linear change making
//! `ρ = Im w + O(2)`, `M` is the graph `Im w = φ(z, z̄, Re w)` and every
//! intrinsic computation uses the coordinates `(z₁…zₙ, z̄₁…z̄ₙ, s)` with
//! `s = Re w`. In those coordinates
//!
//! ```text
//! T = ∂_s,   L̄_j = ∂_{z̄_j} + a_j ∂_s,   a_j = −i φ_{z̄_j} / (1 + i φ_s),   L_j = conj(L̄_j)
//! ```
//!
//! The fields `L_j` commute, and every bracket among frame fields is a
//! multiple of `∂_s`; with `θ^A = dz_A` this makes every structure function
//! of the frame vanish identically.

use std::fmt;

use crate::error::{Error, Result};
use crate::invariants::FiltrationReport;
use crate::linalg::{self, invert_series_matrix};
use crate::multiindex::MultiIndex;
use crate::scalar::{CScalar, Rational};
use crate::series::{Order, Pairing, TruncatedSeries};

/// First-order differential operator `Σ X^i ∂_i` with series coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorFieldOp {
    coeffs: Vec<TruncatedSeries>,
}

impl VectorFieldOp {
    pub fn new(coeffs: Vec<TruncatedSeries>) -> Result<Self> {
        if let Some(first) = coeffs.first() {
            let nvars = first.nvars();
            if coeffs.len() != nvars {
                return Err(Error::NvarsMismatch { left: coeffs.len(), right: nvars });
            }
            for c in &coeffs {
                if c.nvars() != nvars {
                    return Err(Error::NvarsMismatch { left: nvars, right: c.nvars() });
                }
            }
        }
        Ok(VectorFieldOp { coeffs })
    }

    pub fn zero(nvars: usize, order: Order) -> Self {
        VectorFieldOp { coeffs: vec![TruncatedSeries::zero(nvars, order); nvars] }
    }

    /// The coordinate field `∂_var`.
    pub fn coordinate(nvars: usize, var: usize, order: Order) -> Self {
        let mut x = Self::zero(nvars, order);
        x.coeffs[var] = TruncatedSeries::one(nvars, order);
        x
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[TruncatedSeries] {
        &self.coeffs
    }

    pub fn coeff(&self, var: usize) -> &TruncatedSeries {
        &self.coeffs[var]
    }

    /// Smallest coefficient order.
    pub fn order(&self) -> Order {
        self.coeffs.iter().map(|c| c.order()).min().unwrap_or(Order::Exact)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// `X f = Σ X^i ∂_i f`.
    pub fn apply(&self, f: &TruncatedSeries) -> Result<TruncatedSeries> {
        let mut acc: Option<TruncatedSeries> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() && acc.is_some() {
                let a = acc.take().unwrap();
                acc = Some(a.truncate(c.order()));
                continue;
            }
            let term = c.try_mul(&f.derive(i)?)?;
            acc = Some(match acc {
                None => term,
                Some(a) => a.try_add(&term)?,
            });
        }
        acc.ok_or_else(|| Error::Invalid("vector field in zero variables".into()))
    }

    /// `[X, Y] = XY − YX`.
    pub fn bracket(&self, other: &VectorFieldOp) -> Result<VectorFieldOp> {
        if self.nvars() != other.nvars() {
            return Err(Error::NvarsMismatch { left: self.nvars(), right: other.nvars() });
        }
        let coeffs = (0..self.nvars())
            .map(|j| self.apply(&other.coeffs[j])?.try_sub(&other.apply(&self.coeffs[j])?))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorFieldOp { coeffs })
    }

    /// `conj(X) = Σ conj(X^i) ∂_{pairing(i)}`.
    pub fn conjugate(&self, pairing: &Pairing) -> Result<VectorFieldOp> {
        let mut coeffs = self.coeffs.clone();
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[pairing.image(i)] = c.conjugate(pairing)?;
        }
        Ok(VectorFieldOp { coeffs })
    }

    pub fn add(&self, other: &VectorFieldOp) -> Result<VectorFieldOp> {
        let coeffs =
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.try_add(b)).collect::<Result<_>>()?;
        Ok(VectorFieldOp { coeffs })
    }

    pub fn scale(&self, c: &CScalar) -> VectorFieldOp {
        VectorFieldOp { coeffs: self.coeffs.iter().map(|s| s.scale(c)).collect() }
    }

    pub fn mul_series(&self, f: &TruncatedSeries) -> Result<VectorFieldOp> {
        let coeffs = self.coeffs.iter().map(|s| s.try_mul(f)).collect::<Result<_>>()?;
        Ok(VectorFieldOp { coeffs })
    }

    /// Constant linear combination `Σ c_k X_k`.
    pub fn combination(fields: &[VectorFieldOp], weights: &[CScalar]) -> Result<VectorFieldOp> {
        let first = fields.first().ok_or_else(|| Error::Invalid("empty combination".into()))?;
        let mut acc = VectorFieldOp::zero(first.nvars(), first.order());
        for (x, w) in fields.iter().zip(weights) {
            if !w.is_zero() {
                acc = acc.add(&x.scale(w))?;
            }
        }
        Ok(acc)
    }

    pub fn at_origin(&self) -> Vec<CScalar> {
        self.coeffs.iter().map(|c| c.constant_term()).collect()
    }

    pub fn truncate(&self, order: Order) -> VectorFieldOp {
        VectorFieldOp { coeffs: self.coeffs.iter().map(|c| c.truncate(order)).collect() }
    }
}

pub fn bracket(x: &VectorFieldOp, y: &VectorFieldOp) -> Result<VectorFieldOp> {
    x.bracket(y)
}

/// One-form `Σ ω_i dx_i` with series coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneForm {
    coeffs: Vec<TruncatedSeries>,
}

impl OneForm {
    pub fn new(coeffs: Vec<TruncatedSeries>) -> Result<Self> {
        if let Some(first) = coeffs.first() {
            if coeffs.len() != first.nvars() || coeffs.iter().any(|c| c.nvars() != first.nvars()) {
                return Err(Error::NvarsMismatch { left: coeffs.len(), right: first.nvars() });
            }
        }
        Ok(OneForm { coeffs })
    }

    /// The differential `dx_var`.
    pub fn differential(nvars: usize, var: usize, order: Order) -> Self {
        let mut coeffs = vec![TruncatedSeries::zero(nvars, order); nvars];
        coeffs[var] = TruncatedSeries::one(nvars, order);
        OneForm { coeffs }
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[TruncatedSeries] {
        &self.coeffs
    }

    pub fn order(&self) -> Order {
        self.coeffs.iter().map(|c| c.order()).min().unwrap_or(Order::Exact)
    }

    /// `⟨ω, X⟩ = Σ ω_i X^i`.
    pub fn pair(&self, x: &VectorFieldOp) -> Result<TruncatedSeries> {
        if self.nvars() != x.nvars() {
            return Err(Error::NvarsMismatch { left: self.nvars(), right: x.nvars() });
        }
        let mut acc = TruncatedSeries::zero(self.nvars(), Order::Exact);
        for (w, c) in self.coeffs.iter().zip(x.coeffs()) {
            acc = acc.try_add(&w.try_mul(c)?)?;
        }
        Ok(acc)
    }

    /// Interior product `X ⌟ dω`, with `(X ⌟ dω)_j = Σ_i X^i (∂_i ω_j − ∂_j ω_i)`.
    ///
    /// For a form annihilating the CR fields and a CR field `X` this is the
    /// Lie derivative `𝓛_X ω`.
    pub fn interior_d(&self, x: &VectorFieldOp) -> Result<OneForm> {
        let n = self.nvars();
        // derivatives[i][j] = ∂_i ω_j
        let derivatives: Vec<Vec<TruncatedSeries>> = (0..n)
            .map(|i| self.coeffs.iter().map(|w| w.derive(i)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let coeffs = (0..n)
            .map(|j| {
                let mut acc = TruncatedSeries::zero(n, Order::Exact);
                for i in 0..n {
                    if i == j || x.coeff(i).is_zero() {
                        acc = acc.truncate(x.coeff(i).order().min(derivatives[i][j].order()));
                        continue;
                    }
                    let curl = derivatives[i][j].try_sub(&derivatives[j][i])?;
                    acc = acc.try_add(&x.coeff(i).try_mul(&curl)?)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OneForm { coeffs })
    }

    pub fn conjugate(&self, pairing: &Pairing) -> Result<OneForm> {
        let mut coeffs = self.coeffs.clone();
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[pairing.image(i)] = c.conjugate(pairing)?;
        }
        Ok(OneForm { coeffs })
    }

    pub fn scale(&self, c: &CScalar) -> OneForm {
        OneForm { coeffs: self.coeffs.iter().map(|s| s.scale(c)).collect() }
    }

    pub fn add(&self, other: &OneForm) -> Result<OneForm> {
        let coeffs =
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.try_add(b)).collect::<Result<_>>()?;
        Ok(OneForm { coeffs })
    }
}

/// Evaluator for `dω(X, Y)`.
pub struct ExteriorDerivative<'a> {
    omega: &'a OneForm,
}

pub fn exterior_derivative(omega: &OneForm) -> ExteriorDerivative<'_> {
    ExteriorDerivative { omega }
}

impl ExteriorDerivative<'_> {
    /// `dω(X,Y) = X⟨ω,Y⟩ − Y⟨ω,X⟩ − ⟨ω,[X,Y]⟩`.
    pub fn eval(&self, x: &VectorFieldOp, y: &VectorFieldOp) -> Result<TruncatedSeries> {
        let a = x.apply(&self.omega.pair(y)?)?;
        let b = y.apply(&self.omega.pair(x)?)?;
        let c = self.omega.pair(&x.bracket(y)?)?;
        a.try_sub(&b)?.try_sub(&c)
    }

    /// Same value from the coordinate expression `Σ X^i Y^j (∂_i ω_j − ∂_j ω_i)`.
    pub fn eval_components(&self, x: &VectorFieldOp, y: &VectorFieldOp) -> Result<TruncatedSeries> {
        self.omega.interior_d(x)?.pair(y)
    }
}

/// Holomorphic linear change `u = A z` of the ambient coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearChange {
    /// Row `k` expresses new coordinate `u_k` in the old coordinates.
    pub matrix: Vec<Vec<CScalar>>,
}

impl LinearChange {
    pub fn identity(big_n: usize) -> Self {
        let matrix = (0..big_n)
            .map(|i| (0..big_n).map(|j| if i == j { CScalar::one() } else { CScalar::zero() }).collect())
            .collect();
        LinearChange { matrix }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.matrix.len())
    }

    /// Inverse matrix (old coordinates in terms of new ones).
    pub fn inverse(&self) -> Result<Vec<Vec<CScalar>>> {
        let n = self.matrix.len();
        let mut cols = Vec::with_capacity(n);
        for k in 0..n {
            let e: Vec<CScalar> =
                (0..n).map(|i| if i == k { CScalar::one() } else { CScalar::zero() }).collect();
            cols.push(linalg::solve(&self.matrix, &e)?);
        }
        Ok((0..n).map(|i| (0..n).map(|k| cols[k][i].clone()).collect()).collect())
    }
}

/// Ambient holomorphic variables plus their conjugates, `2N` in total.
pub fn ambient_var(big_n: usize, var: usize, order: Order) -> TruncatedSeries {
    TruncatedSeries::var(2 * big_n, var, order)
}

/// Substitutions realising the linear change `old = inv · new` on `(z, z̄)`.
pub(crate) fn linear_substitution(big_n: usize, inv: &[Vec<CScalar>]) -> Result<Vec<TruncatedSeries>> {
    let pairing = Pairing::ambient(big_n);
    let mut subs = Vec::with_capacity(2 * big_n);
    for row in inv {
        let terms = row
            .iter()
            .enumerate()
            .map(|(j, c)| (MultiIndex::unit(2 * big_n, j), c.clone()))
            .collect::<Vec<_>>();
        subs.push(TruncatedSeries::from_terms(2 * big_n, Order::Exact, terms));
    }
    for k in 0..big_n {
        let c = subs[k].conjugate(&pairing)?;
        subs.push(c);
    }
    Ok(subs)
}

/// Real hypersurface through the origin, normalized to graph form.
#[derive(Clone, Debug)]
pub struct Hypersurface {
    big_n: usize,
    order: u32,
    rho_input: TruncatedSeries,
    change: LinearChange,
    rho: TruncatedSeries,
    phi: TruncatedSeries,
}

impl Hypersurface {
    /// Normalizes a real defining function and solves `ρ = 0` for `t = Im w`.
    ///
    /// `order` is the working truncation order of every derived quantity.
    pub fn from_defining(rho: &TruncatedSeries, big_n: usize, order: u32) -> Result<Self> {
        if big_n < 2 {
            return Err(Error::Invalid(format!("ambient dimension must be at least 2, got {big_n}")));
        }
        if rho.nvars() != 2 * big_n {
            return Err(Error::NvarsMismatch { left: rho.nvars(), right: 2 * big_n });
        }
        if !rho.is_real(&Pairing::ambient(big_n)) {
            return Err(Error::NotReal);
        }
        if !rho.constant_term().is_zero() {
            return Err(Error::NotAHypersurfacePoint("ρ(0) ≠ 0".into()));
        }
        let c: Vec<CScalar> = (0..big_n).map(|j| rho.coeff(&MultiIndex::unit(2 * big_n, j))).collect();
        let mut star = None;
        let mut best = Rational::from_integer(0.into());
        for (j, cj) in c.iter().enumerate() {
            let m = cj.norm_sqr();
            if m > best {
                best = m;
                star = Some(j);
            }
        }
        let star = star.ok_or_else(|| Error::NotAHypersurfacePoint("dρ(0) = 0".into()))?;

        // New coordinates: old z_k (k ≠ star) in order, then w' = 2i Σ c_j z_j.
        let mut matrix = Vec::with_capacity(big_n);
        for k in (0..big_n).filter(|&k| k != star) {
            matrix.push((0..big_n).map(|j| if j == k { CScalar::one() } else { CScalar::zero() }).collect());
        }
        let two_i = CScalar::from_ratios((0, 1), (2, 1));
        matrix.push(c.iter().map(|cj| &two_i * cj).collect());
        let change = LinearChange { matrix };
        let normalized = if change.is_identity() {
            rho.clone()
        } else {
            let subs = linear_substitution(big_n, &change.inverse()?)?;
            rho.compose(&subs)?
        };
        let phi = solve_graph(&normalized, big_n, order)?;
        Ok(Hypersurface { big_n, order, rho_input: rho.clone(), change, rho: normalized, phi })
    }

    /// Builds `ρ = Im w − φ(z, z̄, Re w)` from a real graph function.
    pub fn from_graph(phi: &TruncatedSeries, big_n: usize, order: u32) -> Result<Self> {
        let rho = graph_defining_function(phi, big_n)?;
        Self::from_defining(&rho, big_n, order)
    }

    /// Dimension of the ambient space.
    pub fn big_n(&self) -> usize {
        self.big_n
    }

    /// CR dimension `n = N − 1`.
    pub fn n(&self) -> usize {
        self.big_n - 1
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Defining function in normalized coordinates.
    pub fn rho(&self) -> &TruncatedSeries {
        &self.rho
    }

    pub fn rho_input(&self) -> &TruncatedSeries {
        &self.rho_input
    }

    pub fn change(&self) -> &LinearChange {
        &self.change
    }

    /// Graph function `φ(z, z̄, s)`; exact when the defining function is.
    pub fn phi(&self) -> &TruncatedSeries {
        &self.phi
    }

    pub fn is_polynomial(&self) -> bool {
        self.phi.order().is_exact() && self.rho.order().is_exact()
    }

    /// Same hypersurface at another working order.
    pub fn with_order(&self, order: u32) -> Result<Self> {
        Self::from_defining(&self.rho_input, self.big_n, order)
    }

    /// `ρ(z, s + iφ, z̄, s − iφ)` in intrinsic variables; zero to the working order.
    pub fn graph_residual(&self) -> Result<TruncatedSeries> {
        let n = self.n();
        let order = Order::Finite(self.order);
        let phi = self.phi.truncate(order);
        let subs = graph_embedding(n, &phi, order);
        self.rho.truncate(order).compose(&subs)
    }

    /// Ambient point `(z, s + iφ(z, z̄, s))` of a polynomial hypersurface.
    pub fn point_on(&self, z: &[CScalar], s: &Rational) -> Result<Vec<CScalar>> {
        let n = self.n();
        if z.len() != n {
            return Err(Error::SubstitutionArity { expected: n, got: z.len() });
        }
        let mut intrinsic: Vec<CScalar> = z.to_vec();
        intrinsic.extend(z.iter().map(|v| v.conj()));
        intrinsic.push(CScalar::real(s.clone()));
        let t = self.phi.evaluate(&intrinsic)?;
        if !t.is_real() {
            return Err(Error::NotReal);
        }
        let mut p = z.to_vec();
        p.push(&CScalar::real(s.clone()) + &(&CScalar::i() * &t));
        Ok(p)
    }

    /// The same (polynomial) hypersurface with `point` moved to the origin.
    pub fn recenter(&self, point: &[CScalar]) -> Result<Hypersurface> {
        if !self.rho.order().is_exact() {
            return Err(Error::NotPolynomial);
        }
        let mut full = point.to_vec();
        full.extend(point.iter().map(|v| v.conj()));
        let shifted = self.rho.recenter(&full)?;
        if !shifted.constant_term().is_zero() {
            return Err(Error::NotAHypersurfacePoint("point is not on M".into()));
        }
        Hypersurface::from_defining(&shifted, self.big_n, self.order)
    }
}

/// `ρ = (w − w̄)/(2i) − φ(z, z̄, (w + w̄)/2)` in ambient variables.
pub fn graph_defining_function(phi: &TruncatedSeries, big_n: usize) -> Result<TruncatedSeries> {
    let n = big_n - 1;
    if phi.nvars() != 2 * n + 1 {
        return Err(Error::NvarsMismatch { left: phi.nvars(), right: 2 * n + 1 });
    }
    let nv = 2 * big_n;
    let half = CScalar::real(crate::scalar::rat(1, 2));
    let w = ambient_var(big_n, n, Order::Exact);
    let wbar = ambient_var(big_n, big_n + n, Order::Exact);
    let mut subs: Vec<TruncatedSeries> = (0..n).map(|j| ambient_var(big_n, j, Order::Exact)).collect();
    subs.extend((0..n).map(|j| ambient_var(big_n, big_n + j, Order::Exact)));
    subs.push((&w + &wbar).scale(&half));
    let phi_amb = phi.compose(&subs)?;
    let im_w = (&w - &wbar).scale(&CScalar::from_ratios((0, 1), (-1, 2)));
    debug_assert_eq!(im_w.nvars(), nv);
    im_w.try_sub(&phi_amb)
}

/// Substitutions `(z, w, z̄, w̄) ↦ (z, s + i t, z̄, s − i t)` into intrinsic variables
/// where `t` is the given series.
pub fn graph_embedding(n: usize, t: &TruncatedSeries, order: Order) -> Vec<TruncatedSeries> {
    let nv = 2 * n + 1;
    let s = TruncatedSeries::var(nv, 2 * n, order);
    let it = t.scale(&CScalar::i());
    let mut subs: Vec<TruncatedSeries> = (0..n).map(|j| TruncatedSeries::var(nv, j, order)).collect();
    subs.push(&s + &it);
    subs.extend((n..2 * n).map(|j| TruncatedSeries::var(nv, j, order)));
    subs.push(&s - &it);
    subs
}

/// Solves `ρ(z, s + it, z̄, s − it) = 0` for `t = φ(z, z̄, s)`.
fn solve_graph(rho: &TruncatedSeries, big_n: usize, order: u32) -> Result<TruncatedSeries> {
    let n = big_n - 1;
    let nv = 2 * n + 2;
    let t_var = 2 * n + 1;
    // r(z, z̄, s, t)
    let s = TruncatedSeries::var(nv, 2 * n, Order::Exact);
    let it = TruncatedSeries::var(nv, t_var, Order::Exact).scale(&CScalar::i());
    let mut subs: Vec<TruncatedSeries> = (0..n).map(|j| TruncatedSeries::var(nv, j, Order::Exact)).collect();
    subs.push(&s + &it);
    subs.extend((n..2 * n).map(|j| TruncatedSeries::var(nv, j, Order::Exact)));
    subs.push(&s - &it);
    let r = rho.compose(&subs)?;

    let t_unit = MultiIndex::unit(nv, t_var);
    let linear_in_t = r.order().is_exact()
        && r.terms().all(|(m, _)| m.get(t_var) == 0 || *m == t_unit)
        && !r.coeff(&t_unit).is_zero();
    if linear_in_t {
        let c = r.coeff(&t_unit);
        let rest = TruncatedSeries::from_terms(
            nv - 1,
            Order::Exact,
            r.terms()
                .filter(|(m, _)| m.get(t_var) == 0)
                .map(|(m, v)| (MultiIndex::from_slice(&m.to_vec()[..nv - 1]), v.clone())),
        );
        let inv = c.inv().ok_or_else(|| Error::NotAHypersurfacePoint("ρ_t(0) = 0".into()))?;
        return Ok(rest.scale(&-inv));
    }

    let ord = Order::Finite(order);
    let r = r.truncate(ord);
    let r_t = r.derive(t_var)?;
    let mut phi = TruncatedSeries::zero(nv - 1, ord);
    let vars: Vec<TruncatedSeries> = (0..nv - 1).map(|j| TruncatedSeries::var(nv - 1, j, ord)).collect();
    // ⌈log₂(order + 1)⌉ steps: the error valuation doubles with each step
    let mut steps = 0;
    while (1u64 << steps) < order as u64 + 1 {
        steps += 1;
    }
    for _ in 0..steps {
        let mut sub = vars.clone();
        sub.push(phi.clone());
        let value = r.compose(&sub)?;
        let slope = r_t.compose(&sub)?;
        phi = phi.try_sub(&value.try_mul(&slope.invert_unit()?)?)?;
    }
    let mut sub = vars;
    sub.push(phi.clone());
    let residual = r.compose(&sub)?.truncate(phi.order());
    if !residual.is_zero() {
        return Err(Error::Inconsistent(format!("graph equation residual {residual}")));
    }
    Ok(phi)
}

/// Frame `T, L_A, L_Ā` and dual coframe `θ, θ^A, θ^Ā` on `M` in intrinsic coordinates.
#[derive(Clone, Debug)]
pub struct Frame {
    n: usize,
    order: u32,
    t: VectorFieldOp,
    l: Vec<VectorFieldOp>,
    lbar: Vec<VectorFieldOp>,
    theta: OneForm,
    theta_a: Vec<OneForm>,
    theta_abar: Vec<OneForm>,
}

/// Index into the frame `T, L_1…L_n, L_1̄…L_n̄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameIndex {
    T,
    L(usize),
    Lbar(usize),
}

impl fmt::Display for FrameIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameIndex::T => write!(f, "T"),
            FrameIndex::L(a) => write!(f, "L{}", a + 1),
            FrameIndex::Lbar(a) => write!(f, "L{}bar", a + 1),
        }
    }
}

/// Constructs the graph frame; the coframe comes from inverting the frame matrix.
pub fn build_frame(m: &Hypersurface) -> Result<Frame> {
    build_frame_at(m, Order::Finite(m.order))
}

/// Graph frame with exact polynomial coefficients. Needs a polynomial `φ`
/// without `s` dependence in `φ_s`, so that `1 + iφ_s` is constant.
pub fn build_exact_frame(m: &Hypersurface) -> Result<Frame> {
    if !m.phi.order().is_exact() {
        return Err(Error::NotPolynomial);
    }
    build_frame_at(m, Order::Exact).map_err(|e| match e {
        Error::UnboundedInverse => Error::Unsupported("φ_s is not constant; no exact frame".into()),
        other => other,
    })
}

fn build_frame_at(m: &Hypersurface, order: Order) -> Result<Frame> {
    let n = m.n();
    let nv = 2 * n + 1;
    let phi = m.phi.truncate(order);
    let unit = TruncatedSeries::one(nv, order).try_add(&phi.derive(2 * n)?.scale(&CScalar::i()))?;
    let unit_inv = unit.invert_unit().map_err(|e| match e {
        Error::NotAUnit => Error::Invalid("1 + iφ_s is not a unit; φ has a linear term".into()),
        other => other,
    })?;
    let minus_i = -CScalar::i();
    let pairing = Pairing::intrinsic(n);
    let mut lbar = Vec::with_capacity(n);
    for j in 0..n {
        let a = phi.derive(n + j)?.scale(&minus_i).try_mul(&unit_inv)?;
        let mut x = VectorFieldOp::coordinate(nv, n + j, a.order());
        x.coeffs[2 * n] = a;
        lbar.push(x);
    }
    let l = lbar.iter().map(|x| x.conjugate(&pairing)).collect::<Result<Vec<_>>>()?;
    let field_order = lbar.first().map(|x| x.order()).unwrap_or(order);
    let t = VectorFieldOp::coordinate(nv, 2 * n, field_order);
    let (theta, theta_a, theta_abar) = dual_coframe(&t, &l, &lbar)?;
    Ok(Frame { n, order: m.order, t, l, lbar, theta, theta_a, theta_abar })
}

/// Coframe dual to `(T, L, L̄)` by inverting the transposed frame matrix.
fn dual_coframe(
    t: &VectorFieldOp,
    l: &[VectorFieldOp],
    lbar: &[VectorFieldOp],
) -> Result<(OneForm, Vec<OneForm>, Vec<OneForm>)> {
    let n = l.len();
    let nv = t.nvars();
    let rows: Vec<&VectorFieldOp> = std::iter::once(t).chain(l).chain(lbar).collect();
    // transposed[i][a] = component i of frame vector a
    let transposed: Vec<Vec<TruncatedSeries>> =
        (0..nv).map(|i| rows.iter().map(|x| x.coeff(i).clone()).collect()).collect();
    let inv = invert_series_matrix(&transposed)?;
    let forms: Vec<OneForm> =
        inv.into_iter().map(OneForm::new).collect::<Result<Vec<_>>>()?;
    let mut it = forms.into_iter();
    let theta = it.next().expect("frame has T");
    let theta_a: Vec<OneForm> = it.by_ref().take(n).collect();
    let theta_abar: Vec<OneForm> = it.collect();
    Ok((theta, theta_a, theta_abar))
}

impl Frame {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nvars(&self) -> usize {
        2 * self.n + 1
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn t(&self) -> &VectorFieldOp {
        &self.t
    }

    pub fn l(&self) -> &[VectorFieldOp] {
        &self.l
    }

    pub fn lbar(&self) -> &[VectorFieldOp] {
        &self.lbar
    }

    pub fn theta(&self) -> &OneForm {
        &self.theta
    }

    pub fn theta_a(&self) -> &[OneForm] {
        &self.theta_a
    }

    pub fn theta_abar(&self) -> &[OneForm] {
        &self.theta_abar
    }

    pub fn pairing(&self) -> Pairing {
        Pairing::intrinsic(self.n)
    }

    pub fn field(&self, idx: FrameIndex) -> &VectorFieldOp {
        match idx {
            FrameIndex::T => &self.t,
            FrameIndex::L(a) => &self.l[a],
            FrameIndex::Lbar(a) => &self.lbar[a],
        }
    }

    pub fn indices(&self) -> Vec<FrameIndex> {
        std::iter::once(FrameIndex::T)
            .chain((0..self.n).map(FrameIndex::L))
            .chain((0..self.n).map(FrameIndex::Lbar))
            .collect()
    }

    pub fn form(&self, idx: FrameIndex) -> &OneForm {
        match idx {
            FrameIndex::T => &self.theta,
            FrameIndex::L(a) => &self.theta_a[a],
            FrameIndex::Lbar(a) => &self.theta_abar[a],
        }
    }

    /// Entries of `⟨form(a), field(b)⟩ − δ_ab` that are not the zero series.
    pub fn duality_violations(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for a in self.indices() {
            for b in self.indices() {
                let mut p = self.form(a).pair(self.field(b))?;
                if a == b {
                    p = p.try_sub(&TruncatedSeries::one(self.nvars(), p.order()))?;
                }
                if !p.is_zero() {
                    out.push(format!("<θ[{a}], {b}> residual {p}"));
                }
            }
        }
        Ok(out)
    }

    /// Structure functions `dθ^C(X, Y)` for the four families that must vanish.
    pub fn structure_functions(&self) -> Result<Vec<(String, TruncatedSeries)>> {
        let mut out = Vec::new();
        for c in 0..self.n {
            let d = exterior_derivative(&self.theta_a[c]);
            for a in 0..self.n {
                for b in 0..self.n {
                    out.push((format!("R^{}_{{{}bar {}}}", c + 1, a + 1, b + 1), d.eval(&self.lbar[a], &self.l[b])?));
                    out.push((format!("R^{}_{{{} {}}}", c + 1, a + 1, b + 1), d.eval(&self.l[a], &self.l[b])?));
                }
                out.push((format!("R^{}_{{{}bar}}", c + 1, a + 1), d.eval(&self.lbar[a], &self.t)?));
                out.push((format!("R^{}_{{{}}}", c + 1, a + 1), d.eval(&self.t, &self.l[a])?));
            }
        }
        Ok(out)
    }

    /// Conjugation must map `T ↦ T`, `L_A ↔ L_Ā`, `θ ↦ θ`, `θ^A ↔ θ^Ā`.
    pub fn reality_violations(&self) -> Result<Vec<String>> {
        let p = self.pairing();
        let mut out = Vec::new();
        if self.t.conjugate(&p)? != self.t {
            out.push("T not real".into());
        }
        if self.theta.conjugate(&p)? != self.theta {
            out.push("θ not real".into());
        }
        for a in 0..self.n {
            if self.l[a].conjugate(&p)? != self.lbar[a] {
                out.push(format!("conj(L{}) ≠ L{}bar", a + 1, a + 1));
            }
            if self.theta_a[a].conjugate(&p)? != self.theta_abar[a] {
                out.push(format!("conj(θ^{}) ≠ θ^{}bar", a + 1, a + 1));
            }
        }
        Ok(out)
    }

    /// Every check a constructed frame must pass, as human-readable violations.
    pub fn violations(&self) -> Result<Vec<String>> {
        let mut out = self.duality_violations()?;
        out.extend(self.reality_violations()?);
        for (label, r) in self.structure_functions()? {
            if !r.is_zero() {
                out.push(format!("{label} = {r}"));
            }
        }
        Ok(out)
    }

    /// Replaces `L_A` by `Σ_B C_{AB} L_B` (constant `C`), keeping duality.
    pub fn with_linear_change(&self, c: &[Vec<CScalar>]) -> Result<Frame> {
        let n = self.n;
        if c.len() != n || c.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("change matrix has the wrong shape".into()));
        }
        let inv = LinearChange { matrix: c.to_vec() }.inverse()?;
        let p = self.pairing();
        let l = (0..n)
            .map(|a| VectorFieldOp::combination(&self.l, &c[a]))
            .collect::<Result<Vec<_>>>()?;
        let lbar = l.iter().map(|x| x.conjugate(&p)).collect::<Result<Vec<_>>>()?;
        let theta_a = (0..n)
            .map(|a| {
                let mut acc = self.theta_a[0].scale(&CScalar::zero());
                for b in 0..n {
                    acc = acc.add(&self.theta_a[b].scale(&inv[b][a]))?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let theta_abar = theta_a.iter().map(|f| f.conjugate(&p)).collect::<Result<Vec<_>>>()?;
        Ok(Frame { n, order: self.order, t: self.t.clone(), l, lbar, theta: self.theta.clone(), theta_a, theta_abar })
    }

    /// Frame with `θ ↦ cθ` and `T ↦ T / c` for a nonzero real `c`.
    pub fn with_scaled_theta(&self, c: &Rational) -> Result<Frame> {
        let cs = CScalar::real(c.clone());
        let inv = cs.inv().ok_or_else(|| Error::Invalid("zero scale".into()))?;
        Ok(Frame { t: self.t.scale(&inv), theta: self.theta.scale(&cs), ..self.clone() })
    }
}

/// Constant change of the `L_A` so that the last `dim F_k(0)` fields span `F_k(0)`.
pub fn adapt_frame(m: &Hypersurface, frame: &Frame, filtration: &FiltrationReport) -> Result<Frame> {
    let n = frame.n();
    if m.n() != n || filtration.fk_bases.first().map(|b| b.len()) != Some(n) {
        return Err(Error::Invalid("filtration does not match the frame dimension".into()));
    }
    // Build an adapted basis of ℂⁿ from the deepest subspace outwards.
    let mut chosen: Vec<Vec<CScalar>> = Vec::new();
    let mut layers: Vec<Vec<Vec<CScalar>>> = Vec::new();
    for basis in filtration.fk_bases.iter().rev() {
        let mut layer = Vec::new();
        for v in basis {
            let mut trial = chosen.clone();
            trial.push(v.clone());
            if linalg::bareiss_rank(&trial) == trial.len() {
                chosen = trial;
                layer.push(v.clone());
            }
        }
        layers.push(layer);
    }
    if chosen.len() != n {
        return Err(Error::Invalid("filtration bases do not span the CR directions".into()));
    }
    let rows: Vec<Vec<CScalar>> = layers.into_iter().rev().flatten().collect();
    frame.with_linear_change(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn heisenberg_frame_closed_form() {
        let m = models::heisenberg(2, 6).unwrap();
        let f = build_frame(&m).unwrap();
        let nv = 3;
        let o = Order::Finite(5);
        let z = TruncatedSeries::var(nv, 0, o);
        let zb = TruncatedSeries::var(nv, 1, o);
        // L̄ = ∂_z̄ − iz ∂_s
        assert_eq!(f.lbar()[0].coeff(1), &TruncatedSeries::one(nv, o));
        assert_eq!(f.lbar()[0].coeff(2), &z.scale(&-CScalar::i()));
        // θ = ds − i z̄ dz + i z dz̄
        assert_eq!(f.theta().coeffs()[0], zb.scale(&-CScalar::i()));
        assert_eq!(f.theta().coeffs()[1], z.scale(&CScalar::i()));
        assert!(f.theta().coeffs()[2].try_sub(&TruncatedSeries::one(nv, o)).unwrap().is_zero());
        assert!(f.violations().unwrap().is_empty());
    }

    #[test]
    fn heisenberg_bracket_and_dtheta() {
        let m = models::heisenberg(2, 6).unwrap();
        let f = build_frame(&m).unwrap();
        let b = f.lbar()[0].bracket(&f.l()[0]).unwrap();
        let expected = VectorFieldOp::coordinate(3, 2, b.order()).scale(&CScalar::from_ratios((0, 1), (2, 1)));
        assert_eq!(b, expected);
        let back = f.l()[0].bracket(&f.lbar()[0]).unwrap();
        assert_eq!(back, expected.scale(&-CScalar::one()));
        let d = exterior_derivative(f.theta());
        let v = d.eval(&f.lbar()[0], &f.l()[0]).unwrap();
        assert_eq!(v.constant_term(), CScalar::from_ratios((0, 1), (-2, 1)));
        assert_eq!(v, d.eval_components(&f.lbar()[0], &f.l()[0]).unwrap());
        let ds = OneForm::differential(3, 2, Order::Finite(5));
        assert!(exterior_derivative(&ds).eval(&f.lbar()[0], &f.l()[0]).unwrap().is_zero());
    }

    #[test]
    fn graph_examples() {
        let h = models::heisenberg(2, 6).unwrap();
        assert_eq!(h.phi().to_string(), "(1)*x0*x1");
        let m3 = models::m3(6).unwrap();
        let half = CScalar::real(crate::scalar::rat(1, 2));
        assert_eq!(m3.phi().coeff_of(&[1, 0, 1, 0, 0]), CScalar::one());
        assert_eq!(m3.phi().coeff_of(&[2, 0, 0, 1, 0]), half);
        assert_eq!(m3.phi().coeff_of(&[0, 1, 2, 0, 0]), half);
        assert_eq!(m3.phi().num_terms(), 3);
    }

    #[test]
    fn newton_graph_solution() {
        // ρ = (Im w)(1 + Re w) − z z̄; the exact graph is t = z z̄ / (1 + s)
        let m = models::newton_example(6).unwrap();
        assert!(m.graph_residual().unwrap().is_zero());
        let phi = m.phi();
        assert_eq!(phi.coeff_of(&[1, 1, 0]), CScalar::one());
        assert_eq!(phi.coeff_of(&[1, 1, 1]), -CScalar::one());
        assert_eq!(phi.coeff_of(&[1, 1, 2]), CScalar::one());
        assert_eq!(phi.coeff_of(&[2, 2, 0]), CScalar::zero());
    }

    #[test]
    fn defining_function_errors() {
        let z = ambient_var(2, 0, Order::Exact);
        assert!(matches!(Hypersurface::from_defining(&z, 2, 4), Err(Error::NotReal)));
        let zzb = &z * &ambient_var(2, 2, Order::Exact);
        assert!(matches!(Hypersurface::from_defining(&zzb, 2, 4), Err(Error::NotAHypersurfacePoint(_))));
        let one = TruncatedSeries::one(4, Order::Exact);
        assert!(matches!(Hypersurface::from_defining(&one, 2, 4), Err(Error::NotAHypersurfacePoint(_))));
    }

    #[test]
    fn linear_change_moves_normal_direction_last() {
        // ρ = Re z₁ ... expressed as Im w after swapping roles: ρ = (z + z̄)/2 − |w|²
        let z = ambient_var(2, 0, Order::Exact);
        let w = ambient_var(2, 1, Order::Exact);
        let zb = ambient_var(2, 2, Order::Exact);
        let wb = ambient_var(2, 3, Order::Exact);
        let half = CScalar::real(crate::scalar::rat(1, 2));
        let rho = (&z + &zb).scale(&half).try_sub(&(&w * &wb)).unwrap();
        let m = Hypersurface::from_defining(&rho, 2, 6).unwrap();
        assert!(!m.change().is_identity());
        assert!(m.graph_residual().unwrap().is_zero());
        assert_eq!(m.phi().coeff_of(&[1, 1, 0]), CScalar::one());
        let f = build_frame(&m).unwrap();
        assert!(f.violations().unwrap().is_empty());
    }
}
