//! Jets of real maps `ℝ^q → ℝ^m`, complete systems of PDE and the
//! reconstruction of solutions from their jets at the origin.
//!
//! Jet coordinates `λ^β_i = ∂^β f_i(0)` are enumerated unknown-major: for
//! each `i` in turn, every `β` with `|β| ≤ k` in graded order (see
//! [`MultiIndex::all_up_to`]). A polynomial right-hand side is a series in
//! the variables `(x_1, …, x_q, λ)` with this enumeration. Reduction to first
//! order keeps the variable layout: the new unknown number `j` is the old
//! jet coordinate number `j`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mappings::{heisenberg, AmbientMap};
use crate::multiindex::{MultiIndex, MAX_VARS};
use crate::scalar::{rat, rational_to_f64, CScalar, Rational};
use crate::series::{Order, TruncatedSeries};
use crate::Hypersurface;

/// Enumeration of the jet coordinates `(i, β)`, `i < m`, `|β| ≤ k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetLayout {
    q: usize,
    m: usize,
    k: u32,
    betas: Vec<MultiIndex>,
}

impl JetLayout {
    pub fn new(q: usize, m: usize, k: u32) -> Result<Self> {
        if q == 0 || m == 0 {
            return Err(Error::Invalid("jets need q ≥ 1 and m ≥ 1".into()));
        }
        if q > MAX_VARS {
            return Err(Error::TooManyVariables(q));
        }
        Ok(JetLayout { q, m, k, betas: MultiIndex::all_up_to(q, k) })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Multi-indices `β` of one unknown, in enumeration order.
    pub fn betas(&self) -> &[MultiIndex] {
        &self.betas
    }

    /// Number of coordinates per unknown.
    pub fn block(&self) -> usize {
        self.betas.len()
    }

    pub fn len(&self) -> usize {
        self.m * self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, beta: &MultiIndex) -> Option<usize> {
        if i >= self.m || beta.len() != self.q {
            return None;
        }
        self.betas.binary_search(beta).ok().map(|p| i * self.block() + p)
    }

    pub fn entry(&self, idx: usize) -> (usize, MultiIndex) {
        (idx / self.block(), self.betas[idx % self.block()])
    }
}

/// `λ^β_i` for every `i < m` and `|β| ≤ k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetVector {
    layout: JetLayout,
    values: Vec<Rational>,
}

impl JetVector {
    pub fn zeros(q: usize, m: usize, k: u32) -> Result<Self> {
        let layout = JetLayout::new(q, m, k)?;
        let values = vec![rat(0, 1); layout.len()];
        Ok(JetVector { layout, values })
    }

    /// Values in layout order.
    pub fn from_values(q: usize, m: usize, k: u32, values: Vec<Rational>) -> Result<Self> {
        let layout = JetLayout::new(q, m, k)?;
        if values.len() != layout.len() {
            return Err(Error::Invalid(format!("jet needs {} values, got {}", layout.len(), values.len())));
        }
        Ok(JetVector { layout, values })
    }

    /// `λ^β_i = β! · [x^β] f_i`.
    pub fn from_series(components: &[TruncatedSeries], k: u32) -> Result<Self> {
        let q = components.first().map_or(0, |c| c.nvars());
        let mut jet = Self::zeros(q, components.len(), k)?;
        for (i, f) in components.iter().enumerate() {
            if f.nvars() != q {
                return Err(Error::NvarsMismatch { left: f.nvars(), right: q });
            }
            if !f.order().admits(k) {
                return Err(Error::OrderExhausted(format!("{k}-jet of a series known to order {}", f.order())));
            }
            for (mono, c) in f.terms() {
                if mono.degree() > k {
                    continue;
                }
                if !c.is_real() {
                    return Err(Error::NotReal);
                }
                let idx = jet.layout.index(i, mono).expect("β within the layout");
                jet.values[idx] = &c.re * Rational::from_integer(mono.factorial());
            }
        }
        Ok(jet)
    }

    /// Taylor polynomials `Σ λ^β_i x^β / β!`, known to order `k`.
    pub fn to_series(&self) -> Vec<TruncatedSeries> {
        let l = &self.layout;
        (0..l.m)
            .map(|i| {
                let terms = l.betas.iter().map(|b| {
                    let v = &self.values[i * l.block() + l.betas.binary_search(b).expect("own β")];
                    (*b, CScalar::real(v / Rational::from_integer(b.factorial())))
                });
                TruncatedSeries::from_terms(l.q, Order::Finite(l.k), terms)
            })
            .collect()
    }

    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    pub fn q(&self) -> usize {
        self.layout.q
    }

    pub fn m(&self) -> usize {
        self.layout.m
    }

    pub fn k(&self) -> u32 {
        self.layout.k
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, i: usize, beta: &MultiIndex) -> Option<&Rational> {
        self.layout.index(i, beta).map(|p| &self.values[p])
    }

    pub fn set(&mut self, i: usize, beta: &MultiIndex, v: Rational) -> Result<()> {
        let p = self
            .layout
            .index(i, beta)
            .ok_or_else(|| Error::Invalid(format!("no jet coordinate ({i}, {beta})")))?;
        self.values[p] = v;
        Ok(())
    }

    /// The `k'`-jet, `k' ≤ k`.
    pub fn truncated(&self, k: u32) -> Result<Self> {
        if k > self.layout.k {
            return Err(Error::OrderExhausted(format!("{k}-jet of a {}-jet", self.layout.k)));
        }
        let layout = JetLayout::new(self.layout.q, self.layout.m, k)?;
        let values = (0..layout.len())
            .map(|idx| {
                let (i, b) = layout.entry(idx);
                self.get(i, &b).expect("lower coordinate").clone()
            })
            .collect();
        Ok(JetVector { layout, values })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational_to_f64).collect()
    }
}

impl fmt::Display for JetVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for idx in 0..self.layout.len() {
            let (i, b) = self.layout.entry(idx);
            if idx > 0 {
                write!(f, ", ")?;
            }
            write!(f, "f{}{} = {}", i + 1, b, crate::scalar::fmt_rational(&self.values[idx]))?;
        }
        Ok(())
    }
}

/// Numeric right-hand side: `(x, λ) ↦` values of `∂^α f_j` for every target
/// `(j, α)` in [`CompleteSystem::targets`] order.
pub type RhsFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Rhs {
    /// Exact real polynomials in `(x, λ)`, keyed by target `(j, α)`.
    Polynomial(BTreeMap<(usize, MultiIndex), TruncatedSeries>),
    Function(RhsFn),
}

/// Open box `lower < v < upper` on `(x, λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    fn contains(&self, x: &[f64], u: &[f64]) -> bool {
        x.iter()
            .chain(u)
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo < v && v < hi)
    }
}

/// Polynomial compiled to floating point for repeated evaluation.
#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    fn new(p: &TruncatedSeries) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let powers = (0..m.len()).filter(|&v| m.get(v) > 0).map(|v| (v, m.get(v) as i32)).collect();
                (rational_to_f64(&c.re), powers)
            })
            .collect();
        CompiledPoly { terms }
    }

    fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        let q = x.len();
        let mut acc = 0.0;
        for (c, powers) in &self.terms {
            let mut t = *c;
            for &(v, e) in powers {
                let base = if v < q { x[v] } else { u[v - q] };
                t *= base.powi(e);
            }
            acc += t;
        }
        acc
    }
}

/// `∂^α f_j = r^α_j(x, ∂^β f)` for every `|α| = k + 1`.
#[derive(Clone)]
pub struct CompleteSystem {
    layout: JetLayout,
    rhs: Rhs,
    compiled: Option<Arc<Vec<CompiledPoly>>>,
    domain: Option<Domain>,
}

impl fmt::Debug for CompleteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.rhs {
            Rhs::Polynomial(_) => "polynomial",
            Rhs::Function(_) => "function",
        };
        f.debug_struct("CompleteSystem")
            .field("q", &self.layout.q)
            .field("m", &self.layout.m)
            .field("k", &self.layout.k)
            .field("rhs", &kind)
            .field("domain", &self.domain)
            .finish()
    }
}

fn targets_of(layout: &JetLayout) -> Vec<(usize, MultiIndex)> {
    let alphas = MultiIndex::all_of_degree(layout.q, layout.k + 1);
    (0..layout.m).flat_map(|j| alphas.iter().map(move |a| (j, *a))).collect()
}

impl CompleteSystem {
    /// A system with exact polynomial right-hand sides in `q + len(layout)`
    /// variables. Every target `(j, α)` must be present.
    pub fn polynomial(q: usize, m: usize, k: u32, rhs: BTreeMap<(usize, MultiIndex), TruncatedSeries>) -> Result<Self> {
        let layout = JetLayout::new(q, m, k)?;
        let nv = q + layout.len();
        if nv > MAX_VARS {
            return Err(Error::TooManyVariables(nv));
        }
        let targets = targets_of(&layout);
        for t in &targets {
            if !rhs.contains_key(t) {
                return Err(Error::Invalid(format!("missing right-hand side for f{} {}", t.0 + 1, t.1)));
            }
        }
        for (key, p) in &rhs {
            if !targets.contains(key) {
                return Err(Error::Invalid(format!("f{} {} is not a target of order {}", key.0 + 1, key.1, k + 1)));
            }
            if p.nvars() != nv {
                return Err(Error::NvarsMismatch { left: p.nvars(), right: nv });
            }
            if !p.order().is_exact() {
                return Err(Error::NotPolynomial);
            }
            if p.terms().any(|(_, c)| !c.is_real()) {
                return Err(Error::NotReal);
            }
        }
        let compiled = targets.iter().map(|t| CompiledPoly::new(&rhs[t])).collect();
        Ok(CompleteSystem { layout, rhs: Rhs::Polynomial(rhs), compiled: Some(Arc::new(compiled)), domain: None })
    }

    /// A system with a numeric right-hand side returning one value per target.
    pub fn function(q: usize, m: usize, k: u32, f: RhsFn) -> Result<Self> {
        let layout = JetLayout::new(q, m, k)?;
        Ok(CompleteSystem { layout, rhs: Rhs::Function(f), compiled: None, domain: None })
    }

    /// Restricts the right-hand side to an open box on `(x, λ)`.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        let nv = self.layout.q + self.layout.len();
        if domain.lower.len() != nv || domain.upper.len() != nv {
            return Err(Error::Invalid(format!("domain box needs {nv} bounds per side")));
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    pub fn q(&self) -> usize {
        self.layout.q
    }

    pub fn m(&self) -> usize {
        self.layout.m
    }

    pub fn k(&self) -> u32 {
        self.layout.k
    }

    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }

    /// Targets `(j, α)`, `|α| = k + 1`, unknown-major and graded within.
    pub fn targets(&self) -> Vec<(usize, MultiIndex)> {
        targets_of(&self.layout)
    }

    /// Every `r^α_j(x, λ)` in target order.
    pub fn evaluate(&self, x: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.layout.q || lambda.len() != self.layout.len() {
            return Err(Error::Invalid("evaluation point has the wrong shape".into()));
        }
        if let Some(d) = &self.domain {
            if !d.contains(x, lambda) {
                return Err(Error::OutsideDomain(format!("x = {x:?}")));
            }
        }
        Ok(match (&self.rhs, &self.compiled) {
            (Rhs::Polynomial(_), Some(c)) => c.iter().map(|p| p.eval(x, lambda)).collect(),
            (Rhs::Function(f), _) => f(x, lambda),
            (Rhs::Polynomial(_), None) => unreachable!("polynomial systems are compiled on construction"),
        })
    }
}

/// Equivalent system with `k = 0` whose unknowns are the jet coordinates.
///
/// `∂_l u_{(i,β)} = u_{(i,β+e_l)}` when `|β| < k`, and the original
/// `r^{β+e_l}_i` when `|β| = k`. Since mixed partials commute, `β + e_l`
/// names the same derivative for every way of reaching it.
pub fn reduce_to_first_order(s: &CompleteSystem) -> Result<CompleteSystem> {
    let l = &s.layout;
    if l.k == 0 {
        return Ok(s.clone());
    }
    let q = l.q;
    let reduced = JetLayout::new(q, l.len(), 0)?;
    let new_targets = targets_of(&reduced);
    let old_targets = s.targets();
    // for each new target, either a jet coordinate or an old target position
    let mut sources = Vec::with_capacity(new_targets.len());
    for (jp, alpha) in &new_targets {
        let (i, beta) = l.entry(*jp);
        let gamma = beta.add(alpha);
        if gamma.degree() <= l.k {
            sources.push(Ok(l.index(i, &gamma).expect("lower jet")));
        } else {
            let pos = old_targets.iter().position(|t| *t == (i, gamma)).expect("order k+1 target");
            sources.push(Err(pos));
        }
    }
    let mut out = match &s.rhs {
        Rhs::Polynomial(map) => {
            let nv = q + l.len();
            let mut rhs = BTreeMap::new();
            for (t, src) in new_targets.iter().zip(&sources) {
                let p = match src {
                    Ok(idx) => TruncatedSeries::var(nv, q + idx, Order::Exact),
                    Err(pos) => map[&old_targets[*pos]].clone(),
                };
                rhs.insert(*t, p);
            }
            CompleteSystem::polynomial(q, l.len(), 0, rhs)?
        }
        Rhs::Function(f) => {
            let f = f.clone();
            let need_old = sources.iter().any(|s| s.is_err());
            let g: RhsFn = Arc::new(move |x: &[f64], u: &[f64]| {
                let old = if need_old { f(x, u) } else { Vec::new() };
                sources
                    .iter()
                    .map(|src| match src {
                        Ok(idx) => u[*idx],
                        Err(pos) => old[*pos],
                    })
                    .collect()
            });
            CompleteSystem::function(q, l.len(), 0, g)?
        }
    };
    out.domain = s.domain.clone();
    Ok(out)
}

/// Axis-aligned tensor grid; each axis lists its sample coordinates ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Invalid("grid needs at least one axis".into()));
        }
        for (l, a) in axes.iter().enumerate() {
            if a.is_empty() || a.iter().any(|v| !v.is_finite()) || a.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invalid(format!("axis {} must be finite, nonempty and strictly ascending", l + 1)));
            }
        }
        Ok(Grid { axes })
    }

    /// `points` equally spaced samples of `[lo, hi]` on each of `q` axes.
    pub fn uniform(q: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 2 || !(lo < hi) {
            return Err(Error::Invalid("uniform grid needs lo < hi and at least two points".into()));
        }
        let axis: Vec<f64> = (0..points).map(|p| lo + (hi - lo) * p as f64 / (points - 1) as f64).collect();
        Grid::new(vec![axis; q])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major position of a tuple of per-axis indices.
    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.len() + i)
    }

    /// Coordinates of grid point number `p` (row-major, first axis slowest).
    pub fn point(&self, mut p: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for l in (0..self.dim()).rev() {
            let len = self.axes[l].len();
            out[l] = self.axes[l][p % len];
            p /= len;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationOptions {
    /// Largest step of the fourth-order Runge–Kutta scheme.
    pub step: f64,
    /// Order in which the axes are swept; ascending by default.
    pub axis_order: Vec<usize>,
}

impl IntegrationOptions {
    pub fn with_step(q: usize, step: f64) -> Self {
        IntegrationOptions { step, axis_order: (0..q).collect() }
    }
}

/// Tabulated `F(λ, ·)` together with every reduced unknown at each point.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub grid: Grid,
    pub step: f64,
    pub axis_order: Vec<usize>,
    pub steps_taken: usize,
    layout: JetLayout,
    /// Reduced state (all jet coordinates of order `≤ k`) per grid point.
    pub states: Vec<Vec<f64>>,
}

impl ReconstructionResult {
    /// `f(x_p)` at grid point `p`.
    pub fn values(&self, p: usize) -> Vec<f64> {
        (0..self.layout.m).map(|i| self.states[p][i * self.layout.block()]).collect()
    }

    /// `∂^β f_i(x_p)` for `|β| ≤ k`.
    pub fn derivative(&self, p: usize, i: usize, beta: &MultiIndex) -> Option<f64> {
        self.layout.index(i, beta).map(|idx| self.states[p][idx])
    }

    /// Max-norm deviation of the values from a known solution.
    pub fn max_deviation<F: Fn(&[f64]) -> Vec<f64>>(&self, exact: F) -> f64 {
        (0..self.grid.len())
            .map(|p| {
                let want = exact(&self.grid.point(p));
                self.values(p).iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Max-norm difference of the full states of two runs on the same grid.
    pub fn max_difference(&self, other: &ReconstructionResult) -> Result<f64> {
        if self.grid != other.grid || self.layout != other.layout {
            return Err(Error::Invalid("results live on different grids or layouts".into()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }
}

struct FirstOrder<'a> {
    system: &'a CompleteSystem,
    /// For each axis, positions in the target list of `(j, e_l)`, by `j`.
    axis_targets: Vec<Vec<usize>>,
}

impl FirstOrder<'_> {
    fn derivative_along(&self, l: usize, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let all = self.system.evaluate(x, u)?;
        let out: Vec<f64> = self.axis_targets[l].iter().map(|&p| all[p]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("x = {x:?}")));
        }
        Ok(out)
    }

    fn rk4(&self, l: usize, x: &mut [f64], u: &mut [f64], h: f64) -> Result<()> {
        let axpy = |a: &[f64], s: f64, b: &[f64]| a.iter().zip(b).map(|(p, q)| p + s * q).collect::<Vec<f64>>();
        let t0 = x[l];
        let k1 = self.derivative_along(l, x, u)?;
        x[l] = t0 + h / 2.0;
        let k2 = self.derivative_along(l, x, &axpy(u, h / 2.0, &k1))?;
        let k3 = self.derivative_along(l, x, &axpy(u, h / 2.0, &k2))?;
        x[l] = t0 + h;
        let k4 = self.derivative_along(l, x, &axpy(u, h, &k3))?;
        for (i, v) in u.iter_mut().enumerate() {
            *v += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("x = {x:?}")));
        }
        Ok(())
    }

    /// States along axis `l` at each target coordinate, starting from `u0` at `x[l] = 0`.
    fn march(&self, l: usize, base: &[f64], u0: &[f64], targets: &[f64], step: f64) -> Result<(Vec<Vec<f64>>, usize)> {
        let mut out = vec![Vec::new(); targets.len()];
        let mut steps = 0;
        for sign in [1.0, -1.0] {
            let mut order: Vec<usize> = (0..targets.len()).filter(|&p| targets[p] * sign > 0.0).collect();
            if sign < 0.0 {
                order.reverse();
            }
            let mut x = base.to_vec();
            x[l] = 0.0;
            let mut u = u0.to_vec();
            for p in order {
                let span = targets[p] - x[l];
                let n = (span.abs() / step).ceil().max(1.0) as usize;
                let h = span / n as f64;
                let start = x[l];
                for s in 0..n {
                    x[l] = start + h * s as f64;
                    self.rk4(l, &mut x, &mut u, h)?;
                }
                x[l] = targets[p];
                steps += n;
                out[p] = u.clone();
            }
        }
        for (p, &t) in targets.iter().enumerate() {
            if t == 0.0 {
                out[p] = u0.to_vec();
            }
        }
        Ok((out, steps))
    }
}

/// Tabulates `F(λ, ·)` by sweeping one axis at a time: along the first axis
/// from the origin, then along the second from every point reached, and so
/// on. Each sweep solves the first-order system for that axis with a
/// fixed-step classical fourth-order Runge–Kutta method.
///
/// `F(λ, ·)` equals every solution with jet `λ`; when no such solution
/// exists it need not solve the system, and different axis orders may then
/// disagree.
pub fn integrate(
    s: &CompleteSystem,
    lambda0: &JetVector,
    grid: &Grid,
    opts: &IntegrationOptions,
) -> Result<ReconstructionResult> {
    let q = s.q();
    if lambda0.layout() != s.layout() {
        return Err(Error::Invalid("initial jet does not match the system's (q, m, k)".into()));
    }
    if grid.dim() != q {
        return Err(Error::Invalid(format!("grid has {} axes, system has {q} variables", grid.dim())));
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::Invalid("step must be positive".into()));
    }
    let mut perm = opts.axis_order.clone();
    perm.sort_unstable();
    if perm != (0..q).collect::<Vec<_>>() {
        return Err(Error::Invalid("axis order must be a permutation of the axes".into()));
    }
    let reduced = reduce_to_first_order(s)?;
    let targets = reduced.targets();
    let axis_targets = (0..q)
        .map(|l| {
            let e = MultiIndex::unit(q, l);
            (0..reduced.m()).map(|j| targets.iter().position(|t| *t == (j, e)).expect("axis target")).collect()
        })
        .collect();
    let first = FirstOrder { system: &reduced, axis_targets };

    let u0 = lambda0.to_f64();
    let zero = vec![0.0; q];
    if let Some(d) = reduced.domain() {
        if !d.contains(&zero, &u0) {
            return Err(Error::OutsideDomain("initial jet".into()));
        }
    }
    // (per-axis indices with unswept axes at −1, coordinates, state)
    let mut front: Vec<(Vec<Option<usize>>, Vec<f64>, Vec<f64>)> = vec![(vec![None; q], zero, u0)];
    let mut steps_taken = 0;
    for &l in &opts.axis_order {
        let mut next = Vec::with_capacity(front.len() * grid.axes[l].len());
        for (idx, x, u) in &front {
            let (states, n) = first.march(l, x, u, &grid.axes[l], opts.step)?;
            steps_taken += n;
            for (p, st) in states.into_iter().enumerate() {
                let mut idx = idx.clone();
                idx[l] = Some(p);
                let mut x = x.clone();
                x[l] = grid.axes[l][p];
                next.push((idx, x, st));
            }
        }
        front = next;
    }
    let mut states = vec![Vec::new(); grid.len()];
    for (idx, _, st) in front {
        let idx: Vec<usize> = idx.into_iter().map(|i| i.expect("every axis swept")).collect();
        states[grid.flat(&idx)] = st;
    }
    Ok(ReconstructionResult {
        grid: grid.clone(),
        step: opts.step,
        axis_order: opts.axis_order.clone(),
        steps_taken,
        layout: s.layout().clone(),
        states,
    })
}

/// Independent integrations of one system from several initial jets.
pub fn integrate_many(
    s: &CompleteSystem,
    jets: &[JetVector],
    grid: &Grid,
    opts: &IntegrationOptions,
    exec: Exec,
) -> Result<Vec<ReconstructionResult>> {
    exec.try_map(jets, |j| integrate(s, j, grid, opts))
}

/// `log₂(e(h) / e(h/2))` for errors at a step and at half of it.
pub fn observed_order(error: f64, error_halved: f64) -> f64 {
    (error / error_halved).log2()
}

/// A propagated jet and the number of mixed-partial comparisons that agreed.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub jet: JetVector,
    pub consistency_checks: usize,
}

/// Computes every derivative of order `k+1 ≤ |γ| ≤ target_order` at the
/// origin by differentiating the system formally.
///
/// `∂^γ f_j(0) = ∂^{γ−α} [r^α_j(x, ∂^β f(x))](0)` for any `α ≤ γ` with
/// `|α| = k + 1`. All admissible `α` must give the same value; a mismatch
/// means the system has no solution with this jet.
pub fn taylor_propagate(s: &CompleteSystem, lambda0: &JetVector, target_order: u32) -> Result<Propagation> {
    let map = match &s.rhs {
        Rhs::Polynomial(map) => map,
        Rhs::Function(_) => return Err(Error::Unsupported("formal propagation needs a polynomial right-hand side".into())),
    };
    let l = s.layout();
    if lambda0.layout() != l {
        return Err(Error::Invalid("initial jet does not match the system's (q, m, k)".into()));
    }
    if target_order <= l.k {
        return Ok(Propagation { jet: lambda0.truncated(target_order)?, consistency_checks: 0 });
    }
    let q = l.q;
    let mut f = lambda0.to_series();
    let mut checks = 0;
    for d in l.k..target_order {
        let mut subs: Vec<TruncatedSeries> = (0..q).map(|v| TruncatedSeries::var(q, v, Order::Exact)).collect();
        for idx in 0..l.len() {
            let (i, b) = l.entry(idx);
            subs.push(f[i].derive_multi(&b)?);
        }
        let composed: BTreeMap<(usize, MultiIndex), TruncatedSeries> =
            map.iter().map(|(key, r)| Ok((*key, r.compose(&subs)?))).collect::<Result<_>>()?;
        let mut next: Vec<Vec<(MultiIndex, CScalar)>> = vec![Vec::new(); l.m];
        for (j, terms) in next.iter_mut().enumerate() {
            for gamma in MultiIndex::all_of_degree(q, d + 1) {
                let mut value: Option<Rational> = None;
                for alpha in MultiIndex::all_of_degree(q, l.k + 1) {
                    let Some(rest) = gamma.checked_sub(&alpha) else { continue };
                    let r = &composed[&(j, alpha)];
                    let c = r.coeff(&rest);
                    let v = &c.re * Rational::from_integer(rest.factorial());
                    match &value {
                        None => value = Some(v),
                        Some(w) => {
                            checks += 1;
                            if *w != v {
                                return Err(Error::Inconsistent(format!(
                                    "∂^{gamma} f{} is {} along one route and {} along another",
                                    j + 1,
                                    crate::scalar::fmt_rational(w),
                                    crate::scalar::fmt_rational(&v)
                                )));
                            }
                        }
                    }
                }
                let v = value.expect("some α ≤ γ");
                terms.push((gamma, CScalar::real(v / Rational::from_integer(gamma.factorial()))));
            }
        }
        f = f
            .iter()
            .zip(next)
            .map(|(fi, new)| {
                let old = fi.terms().map(|(m, c)| (*m, c.clone())).collect::<Vec<_>>();
                TruncatedSeries::from_terms(q, Order::Finite(d + 1), old.into_iter().chain(new))
            })
            .collect();
    }
    Ok(Propagation { jet: JetVector::from_series(&f, target_order)?, consistency_checks: checks })
}

/// Taylor polynomial of a holomorphic map at the origin, up to `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolomorphicJet {
    pub order: u32,
    pub components: Vec<TruncatedSeries>,
}

pub fn holomorphic_jet(map: &AmbientMap, order: u32) -> Result<HolomorphicJet> {
    let components = map
        .components()
        .iter()
        .map(|c| {
            if !c.order().admits(order) {
                return Err(Error::OrderExhausted(format!("{order}-jet of a map known to order {}", c.order())));
            }
            Ok(c.truncate(Order::Finite(order)))
        })
        .collect::<Result<_>>()?;
    Ok(HolomorphicJet { order, components })
}

/// A labelled member of a parameterized family of automorphisms.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub label: String,
    pub params: Vec<CScalar>,
    pub map: AmbientMap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCheck {
    pub first: usize,
    pub second: usize,
    pub params_equal: bool,
    pub jets_equal: bool,
    pub maps_equal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InjectivityReport {
    pub jet_order: u32,
    pub full_order: u32,
    pub members: Vec<String>,
    pub pairs: Vec<PairCheck>,
    pub violations: Vec<String>,
}

impl InjectivityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares every pair of family members: distinct parameters must give
/// distinct `jet_order`-jets at the origin, and equal jets must give maps
/// that agree through `full_order`.
pub fn jet_injectivity_demo(
    family: &[FamilyMember],
    jet_order: u32,
    full_order: u32,
    exec: Exec,
) -> Result<InjectivityReport> {
    if full_order < jet_order {
        return Err(Error::Invalid("full order must be at least the jet order".into()));
    }
    let jets = exec.try_map(family, |member| {
        if !member.map.restrict()?.is_tangent() {
            return Err(Error::NotTangent(member.label.clone()));
        }
        Ok((holomorphic_jet(&member.map, jet_order)?, holomorphic_jet(&member.map, full_order)?))
    })?;
    let mut pairs = Vec::new();
    let mut violations = Vec::new();
    for a in 0..family.len() {
        for b in a + 1..family.len() {
            let params_equal = family[a].params == family[b].params;
            let jets_equal = jets[a].0 == jets[b].0;
            let maps_equal = jets[a].1 == jets[b].1;
            let (la, lb) = (&family[a].label, &family[b].label);
            if !params_equal && jets_equal {
                violations.push(format!("{la} and {lb}: distinct parameters, equal {jet_order}-jets"));
            }
            if jets_equal && !maps_equal {
                violations.push(format!("{la} and {lb}: equal {jet_order}-jets, maps differ below order {full_order}"));
            }
            pairs.push(PairCheck { first: a, second: b, params_equal, jets_equal, maps_equal });
        }
    }
    Ok(InjectivityReport {
        jet_order,
        full_order,
        members: family.iter().map(|f| f.label.clone()).collect(),
        pairs,
        violations,
    })
}

/// Parameter vector `(λ, U row-major, a, r)` of `heisenberg::stabilizer`.
pub fn stabilizer_params(lambda: &Rational, u: &[Vec<CScalar>], a: &[CScalar], r: &Rational) -> Vec<CScalar> {
    let mut p = vec![CScalar::real(lambda.clone())];
    p.extend(u.iter().flatten().cloned());
    p.extend(a.iter().cloned());
    p.push(CScalar::real(r.clone()));
    p
}

/// Ten automorphisms of the Heisenberg hypersurface fixing the origin,
/// including pairs with equal parameters built along different routes.
pub fn heisenberg_family(m: &Hypersurface, order: u32) -> Result<Vec<FamilyMember>> {
    let n = m.n();
    let one = rat(1, 1);
    let zero = rat(0, 1);
    let eye: Vec<Vec<CScalar>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { CScalar::one() } else { CScalar::zero() }).collect()).collect();
    let mut rot = eye.clone();
    rot[0][0] = CScalar::from_ratios((3, 5), (4, 5));
    let no_shift = vec![CScalar::zero(); n];
    let mut shift = no_shift.clone();
    shift[0] = CScalar::from_ratios((1, 2), (-1, 3));

    let dil = |l: Rational| heisenberg::dilation(m, &l);
    let member = |label: &str, lambda: &Rational, u: &[Vec<CScalar>], a: &[CScalar], r: &Rational, map: AmbientMap| {
        FamilyMember { label: label.into(), params: stabilizer_params(lambda, u, a, r), map }
    };
    let stab = |lambda: &Rational, u: &[Vec<CScalar>], a: &[CScalar], r: &Rational| {
        heisenberg::stabilizer(m, lambda, u, a, r, order)
    };
    let two = rat(2, 1);
    Ok(vec![
        member("identity", &one, &eye, &no_shift, &zero, AmbientMap::identity(m)),
        member("dilation 2 ∘ dilation 1/2", &one, &eye, &no_shift, &zero, dil(two.clone())?.compose(&dil(rat(1, 2))?)?),
        member("dilation 1/2", &rat(1, 2), &eye, &no_shift, &zero, dil(rat(1, 2))?),
        member("dilation 2", &two, &eye, &no_shift, &zero, dil(two.clone())?),
        member("dilation 3", &rat(3, 1), &eye, &no_shift, &zero, dil(rat(3, 1))?),
        member("rotation", &one, &rot, &no_shift, &zero, heisenberg::rotation(m, &rot)?),
        member("rotation ∘ dilation 2", &two, &rot, &no_shift, &zero, heisenberg::rotation(m, &rot)?.compose(&dil(two.clone())?)?),
        member("dilation 2 ∘ rotation", &two, &rot, &no_shift, &zero, stab(&two, &rot, &no_shift, &zero)?),
        member("isotropy a", &one, &eye, &shift, &zero, stab(&one, &eye, &shift, &zero)?),
        member("isotropy a, r = 1", &one, &eye, &shift, &one, stab(&one, &eye, &shift, &one)?),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_system(q: usize, m: usize, k: u32, entries: Vec<((usize, Vec<u32>), TruncatedSeries)>) -> CompleteSystem {
        let map = entries.into_iter().map(|((j, a), p)| ((j, MultiIndex::from_slice(&a)), p)).collect();
        CompleteSystem::polynomial(q, m, k, map).unwrap()
    }

    /// `f″ = 0` with variables `(x, f, f′)`.
    fn second_derivative_zero() -> CompleteSystem {
        poly_system(1, 1, 1, vec![((0, vec![2]), TruncatedSeries::zero(3, Order::Exact))])
    }

    #[test]
    fn jet_round_trip() {
        let x = TruncatedSeries::var(2, 0, Order::Exact);
        let y = TruncatedSeries::var(2, 1, Order::Exact);
        let p = &(&x * &y).scale(&CScalar::real(rat(3, 2))) + &x.pow(2);
        let jet = JetVector::from_series(&[p.clone()], 2).unwrap();
        assert_eq!(jet.get(0, &MultiIndex::from_slice(&[1, 1])), Some(&rat(3, 2)));
        assert_eq!(jet.get(0, &MultiIndex::from_slice(&[2, 0])), Some(&rat(2, 1)));
        let back = jet.to_series();
        assert_eq!(back[0], p.truncate(Order::Finite(2)));
        assert_eq!(JetVector::from_series(&back, 2).unwrap(), jet);
    }

    #[test]
    fn reduction_of_second_order_equation() {
        let r = reduce_to_first_order(&second_derivative_zero()).unwrap();
        assert_eq!((r.q(), r.m(), r.k()), (1, 2, 0));
        let Rhs::Polynomial(map) = r.rhs() else { panic!() };
        let e = MultiIndex::unit(1, 0);
        assert_eq!(map[&(0, e)], TruncatedSeries::var(3, 2, Order::Exact));
        assert!(map[&(1, e)].is_zero());
        let again = reduce_to_first_order(&r).unwrap();
        assert_eq!(again.targets(), r.targets());
    }

    #[test]
    fn straight_line_from_its_jet() {
        let s = second_derivative_zero();
        let jet = JetVector::from_values(1, 1, 1, vec![rat(1, 1), rat(2, 1)]).unwrap();
        let grid = Grid::uniform(1, 0.0, 1.0, 5).unwrap();
        let res = integrate(&s, &jet, &grid, &IntegrationOptions::with_step(1, 0.1)).unwrap();
        assert!(res.max_deviation(|x| vec![1.0 + 2.0 * x[0]]) < 1e-12);
        let p = taylor_propagate(&s, &jet, 5).unwrap();
        for d in 2..=5 {
            assert_eq!(p.jet.get(0, &MultiIndex::from_slice(&[d])), Some(&rat(0, 1)));
        }
    }

    #[test]
    fn domain_violations_abort() {
        let s = second_derivative_zero()
            .with_domain(Domain { lower: vec![-1.0, -1.0, -1.0], upper: vec![1.0, 1.0, 1.0] })
            .unwrap();
        let jet = JetVector::from_values(1, 1, 1, vec![rat(1, 2), rat(1, 1)]).unwrap();
        let grid = Grid::uniform(1, 0.0, 1.0, 3).unwrap();
        let err = integrate(&s, &jet, &grid, &IntegrationOptions::with_step(1, 0.01)).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain(_)));
    }

    #[test]
    fn blow_up_is_reported() {
        // f′ = f², f(0) = 1 explodes at x = 1
        let f = TruncatedSeries::var(2, 1, Order::Exact);
        let s = poly_system(1, 1, 0, vec![((0, vec![1]), f.pow(2))]);
        let jet = JetVector::from_values(1, 1, 0, vec![rat(1, 1)]).unwrap();
        let grid = Grid::new(vec![vec![0.0, 2.0]]).unwrap();
        let err = integrate(&s, &jet, &grid, &IntegrationOptions::with_step(1, 0.01)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn inconsistent_jet_is_detected() {
        // ∂₁f = f, ∂₂f = x₁ has no solution: ∂₂∂₁f = ∂₂f = x₁ but ∂₁∂₂f = 1
        let nv = 3;
        let s = poly_system(
            2,
            1,
            0,
            vec![
                ((0, vec![1, 0]), TruncatedSeries::var(nv, 2, Order::Exact)),
                ((0, vec![0, 1]), TruncatedSeries::var(nv, 0, Order::Exact)),
            ],
        );
        let jet = JetVector::from_values(2, 1, 0, vec![rat(0, 1)]).unwrap();
        assert!(matches!(taylor_propagate(&s, &jet, 3), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn grid_points_are_row_major() {
        let g = Grid::new(vec![vec![0.0, 1.0], vec![0.0, 0.5, 1.0]]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(4), vec![1.0, 0.5]);
        assert_eq!(g.flat(&[1, 1]), 4);
        assert!(Grid::new(vec![vec![1.0, 0.0]]).is_err());
    }
}
