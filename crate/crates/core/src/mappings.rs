//! CR maps given as restrictions of ambient holomorphic maps, their pushforward
//! data `(ξ, η, γ)` and the reflection identities these data satisfy.
//!
//! With `f_*(L_B) = γ^A_B L̂_A` and `f_*(T) = ξ T̂ + η^A L̂_A + η̄^A L̂_Ā`,
//! evaluating `⟨d f^*ω̂, X ∧ Y⟩ = ⟨dω̂, f_*X ∧ f_*Y⟩` on frame fields gives
//!
//! ```text
//! ξ h_{ĀB} = γ^D_B γ̄^C_A ĥ_{C̄D}
//! L_Ā γ^E_B + η^E h_{ĀB} = 0
//! L_Ā ξ + ξ h_Ā = ξ γ̄^C_A ĥ_C̄ + γ̄^C_A η^D ĥ_{C̄D}
//! L_Ā η^C + η^C h_Ā = 0
//! T γ^C_A − L_A η^C − η^C conj(h_Ā) = 0
//! ```
//!
//! where hatted quantities are composed with `f`. Maps need not fix the
//! origin; when `f(0) ≠ 0` the target frame must be exact (polynomial).

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hypersurface::{
    build_exact_frame, build_frame, graph_embedding, linear_substitution, Frame, Hypersurface, OneForm,
    VectorFieldOp,
};
use crate::invariants::{chain_values, lie_chains, IdentityReport};
use crate::linalg;
use crate::scalar::{CScalar, Rational};
use crate::series::{Order, Pairing, TruncatedSeries};

/// Holomorphic map `ℂ^N → ℂ^N` sending `source` into `target`.
///
/// Components are series in the ambient variables `(z, w, z̄, w̄)` of the
/// normalized coordinates and do not involve the conjugated variables.
#[derive(Clone, Debug)]
pub struct AmbientMap {
    components: Vec<TruncatedSeries>,
    source: Hypersurface,
    target: Hypersurface,
}

fn check_holomorphic(components: &[TruncatedSeries], big_n: usize) -> Result<()> {
    if components.len() != big_n {
        return Err(Error::SubstitutionArity { expected: big_n, got: components.len() });
    }
    for c in components {
        if c.nvars() != 2 * big_n {
            return Err(Error::NvarsMismatch { left: c.nvars(), right: 2 * big_n });
        }
        if c.terms().any(|(m, _)| (big_n..2 * big_n).any(|v| m.get(v) > 0)) {
            return Err(Error::Invalid("map components must be holomorphic".into()));
        }
    }
    Ok(())
}

/// Components together with their conjugates, as a substitution in `2N` variables.
fn with_conjugates(components: &[TruncatedSeries], big_n: usize) -> Result<Vec<TruncatedSeries>> {
    let pairing = Pairing::ambient(big_n);
    let mut subs = components.to_vec();
    for c in components {
        subs.push(c.conjugate(&pairing)?);
    }
    Ok(subs)
}

impl AmbientMap {
    /// A map written in the input coordinates of both hypersurfaces.
    pub fn new(components: Vec<TruncatedSeries>, source: &Hypersurface, target: &Hypersurface) -> Result<Self> {
        let big_n = source.big_n();
        if target.big_n() != big_n {
            return Err(Error::Invalid("source and target live in different dimensions".into()));
        }
        check_holomorphic(&components, big_n)?;
        let mut comps = components;
        if !source.change().is_identity() {
            let subs = linear_substitution(big_n, &source.change().inverse()?)?;
            comps = comps.iter().map(|c| c.compose(&subs)).collect::<Result<_>>()?;
        }
        if !target.change().is_identity() {
            let matrix = &target.change().matrix;
            comps = matrix
                .iter()
                .map(|row| {
                    let mut acc = TruncatedSeries::zero(2 * big_n, Order::Exact);
                    for (c, comp) in row.iter().zip(&comps) {
                        acc = acc.try_add(&comp.scale(c))?;
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
        }
        Ok(AmbientMap { components: comps, source: source.clone(), target: target.clone() })
    }

    /// A map already written in normalized coordinates.
    pub fn normalized(components: Vec<TruncatedSeries>, source: &Hypersurface, target: &Hypersurface) -> Result<Self> {
        check_holomorphic(&components, source.big_n())?;
        Ok(AmbientMap { components, source: source.clone(), target: target.clone() })
    }

    pub fn identity(m: &Hypersurface) -> Self {
        let big_n = m.big_n();
        let components = (0..big_n).map(|j| TruncatedSeries::var(2 * big_n, j, Order::Exact)).collect();
        AmbientMap { components, source: m.clone(), target: m.clone() }
    }

    pub fn components(&self) -> &[TruncatedSeries] {
        &self.components
    }

    pub fn source(&self) -> &Hypersurface {
        &self.source
    }

    pub fn target(&self) -> &Hypersurface {
        &self.target
    }

    pub fn big_n(&self) -> usize {
        self.source.big_n()
    }

    /// Image of the origin.
    pub fn at_origin(&self) -> Vec<CScalar> {
        self.components.iter().map(|c| c.constant_term()).collect()
    }

    pub fn fixes_origin(&self) -> bool {
        self.at_origin().iter().all(|c| c.is_zero())
    }

    /// Holomorphic Jacobian `∂F_i/∂Z_j(0)`.
    pub fn jacobian_at_origin(&self) -> Result<Vec<Vec<CScalar>>> {
        let big_n = self.big_n();
        self.components
            .iter()
            .map(|c| (0..big_n).map(|j| Ok(c.derive(j)?.constant_term())).collect())
            .collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AmbientMap) -> Result<AmbientMap> {
        let big_n = self.big_n();
        let subs = with_conjugates(&other.components, big_n)?;
        let components = self.components.iter().map(|c| c.compose(&subs)).collect::<Result<_>>()?;
        Ok(AmbientMap { components, source: other.source.clone(), target: self.target.clone() })
    }

    /// Coordinates of `f(x)` in the target graph chart, as series in the
    /// intrinsic source coordinates, plus the tangency residual.
    pub fn restrict(&self) -> Result<IntrinsicMap> {
        let n = self.source.n();
        let big_n = self.big_n();
        let order = Order::Finite(self.source.order());
        let embed = graph_embedding(n, &self.source.phi().truncate(order), order);
        let g: Vec<TruncatedSeries> = self.components.iter().map(|c| c.compose(&embed)).collect::<Result<_>>()?;
        let pairing = Pairing::intrinsic(n);
        let gbar: Vec<TruncatedSeries> = g.iter().map(|c| c.conjugate(&pairing)).collect::<Result<_>>()?;
        let mut comps: Vec<TruncatedSeries> = g[..n].to_vec();
        comps.extend(gbar[..n].iter().cloned());
        let half = CScalar::real(crate::scalar::rat(1, 2));
        comps.push(g[n].try_add(&gbar[n])?.scale(&half));
        let im_w = g[n].try_sub(&gbar[n])?.scale(&CScalar::from_ratios((0, 1), (-1, 2)));
        let phi_hat = self.target.phi();
        let phi_at = if phi_hat.order().is_exact() {
            phi_hat.compose(&comps)?
        } else {
            phi_hat.truncate(order).compose(&comps)?
        };
        let residual = im_w.try_sub(&phi_at)?;
        debug_assert_eq!(comps.len(), 2 * big_n - 1);
        Ok(IntrinsicMap { components: comps, residual })
    }
}

/// `x ↦ f(x)` in intrinsic coordinates `(z, z̄, s)` on both sides.
#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicMap {
    pub components: Vec<TruncatedSeries>,
    /// `Im F_w − φ̂(f)` on `M`; zero exactly when the map is tangent.
    pub residual: TruncatedSeries,
}

impl IntrinsicMap {
    pub fn is_tangent(&self) -> bool {
        self.residual.is_zero()
    }

    /// `ĝ ∘ f` for a series `ĝ` on the target.
    pub fn pull(&self, g: &TruncatedSeries) -> Result<TruncatedSeries> {
        let fixes = self.components.iter().all(|c| c.constant_term().is_zero());
        if !fixes && !g.order().is_exact() {
            return Err(Error::Unsupported(
                "the map moves the origin; target data must be polynomial".into(),
            ));
        }
        g.compose(&self.components)
    }

    /// `f_*X` as a field of component functions `X(f^i)`.
    pub fn push(&self, x: &VectorFieldOp) -> Result<Vec<TruncatedSeries>> {
        self.components.iter().map(|c| x.apply(c)).collect()
    }

    fn pull_form(&self, form: &OneForm) -> Result<Vec<TruncatedSeries>> {
        form.coeffs().iter().map(|c| self.pull(c)).collect()
    }
}

fn pair_components(form: &[TruncatedSeries], v: &[TruncatedSeries]) -> Result<TruncatedSeries> {
    let mut acc = form[0].try_mul(&v[0])?;
    for (a, b) in form.iter().zip(v).skip(1) {
        acc = acc.try_add(&a.try_mul(b)?)?;
    }
    Ok(acc)
}

/// Coefficients of `f_*(T, L_B, L_B̄)` in the target frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PushforwardData {
    pub xi: TruncatedSeries,
    pub eta: Vec<TruncatedSeries>,
    /// `gamma[A][B] = γ^A_B`.
    pub gamma: Vec<Vec<TruncatedSeries>>,
}

impl PushforwardData {
    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn gamma_at_origin(&self) -> Vec<Vec<CScalar>> {
        self.gamma.iter().map(|r| r.iter().map(|g| g.constant_term()).collect()).collect()
    }

    /// `γ̄^C_A` as `[C][A]`.
    pub fn gamma_conj(&self, pairing: &Pairing) -> Result<Vec<Vec<TruncatedSeries>>> {
        self.gamma.iter().map(|r| r.iter().map(|g| g.conjugate(pairing)).collect()).collect()
    }
}

/// Everything needed to check reflection identities for one map.
pub struct MapContext {
    pub map: IntrinsicMap,
    pub source_frame: Frame,
    pub target_frame: Frame,
}

impl MapContext {
    /// Restricts the map, rejects non-tangent maps and builds both frames.
    pub fn new(map: &AmbientMap) -> Result<Self> {
        let restricted = map.restrict()?;
        if !restricted.is_tangent() {
            return Err(Error::NotTangent(format!("residual {}", restricted.residual)));
        }
        let jac = map.jacobian_at_origin()?;
        if linalg::bareiss_rank(&jac) != map.big_n() {
            return Err(Error::Singular("Jacobian at 0 is not invertible".into()));
        }
        let source_frame = build_frame(map.source())?;
        let target_frame = if map.fixes_origin() {
            build_frame(map.target())?
        } else {
            build_exact_frame(map.target())?
        };
        Ok(MapContext { map: restricted, source_frame, target_frame })
    }
}

/// Solves `f_*X = Σ c_k X̂_k ∘ f` for the frame fields and checks the zero blocks.
pub fn pushforward_data(ctx: &MapContext) -> Result<(PushforwardData, Vec<String>)> {
    let src = &ctx.source_frame;
    let tgt = &ctx.target_frame;
    let n = src.n();
    let pairing = Pairing::intrinsic(n);
    let theta = ctx.map.pull_form(tgt.theta())?;
    let theta_a: Vec<Vec<TruncatedSeries>> =
        tgt.theta_a().iter().map(|f| ctx.map.pull_form(f)).collect::<Result<_>>()?;
    let theta_abar: Vec<Vec<TruncatedSeries>> =
        tgt.theta_abar().iter().map(|f| ctx.map.pull_form(f)).collect::<Result<_>>()?;
    let mut violations = Vec::new();
    let mut zero_block = |label: String, v: TruncatedSeries| {
        if !v.is_zero() {
            violations.push(format!("{label} = {v}"));
        }
    };

    let ft = ctx.map.push(src.t())?;
    let xi = pair_components(&theta, &ft)?;
    let eta: Vec<TruncatedSeries> = theta_a.iter().map(|f| pair_components(f, &ft)).collect::<Result<_>>()?;
    for (a, f) in theta_abar.iter().enumerate() {
        let v = pair_components(f, &ft)?;
        zero_block(format!("θ^{}bar(f_*T) − conj(η^{})", a + 1, a + 1), v.try_sub(&eta[a].conjugate(&pairing)?)?);
    }
    zero_block("Im ξ".into(), xi.try_sub(&xi.conjugate(&pairing)?)?);

    let mut gamma = vec![Vec::with_capacity(n); n];
    for b in 0..n {
        let fl = ctx.map.push(&src.l()[b])?;
        let flb = ctx.map.push(&src.lbar()[b])?;
        zero_block(format!("θ(f_*L{})", b + 1), pair_components(&theta, &fl)?);
        zero_block(format!("θ(f_*L{}bar)", b + 1), pair_components(&theta, &flb)?);
        for a in 0..n {
            let g = pair_components(&theta_a[a], &fl)?;
            zero_block(format!("θ^{}bar(f_*L{})", a + 1, b + 1), pair_components(&theta_abar[a], &fl)?);
            zero_block(format!("θ^{}(f_*L{}bar)", a + 1, b + 1), pair_components(&theta_a[a], &flb)?);
            let gb = pair_components(&theta_abar[a], &flb)?;
            zero_block(format!("θ^{}bar(f_*L{}bar) − conj γ", a + 1, b + 1), gb.try_sub(&g.conjugate(&pairing)?)?);
            gamma[a].push(g);
        }
    }
    Ok((PushforwardData { xi, eta, gamma }, violations))
}

/// Source and pulled-back target `h` values for tuples up to a given length.
struct Tensors {
    n: usize,
    /// `source[k][idx] = (h_T, [h_D])` with `idx` the base-`n` index of the tuple.
    source: Vec<Vec<(TruncatedSeries, Vec<TruncatedSeries>)>>,
    target: Vec<Vec<(TruncatedSeries, Vec<TruncatedSeries>)>>,
}

impl Tensors {
    fn build(ctx: &MapContext, depth: usize, exec: Exec) -> Result<Self> {
        let n = ctx.source_frame.n();
        let values = |frame: &Frame, pull: bool| -> Result<Vec<Vec<(TruncatedSeries, Vec<TruncatedSeries>)>>> {
            let levels = lie_chains(frame, depth, exec)?;
            levels
                .iter()
                .map(|lvl| {
                    exec.try_map(lvl, |(_, form)| {
                        let (ht, hd) = chain_values(frame, form)?;
                        if pull {
                            let ht = ctx.map.pull(&ht)?;
                            let hd = hd.iter().map(|h| ctx.map.pull(h)).collect::<Result<Vec<_>>>()?;
                            Ok((ht, hd))
                        } else {
                            Ok((ht, hd))
                        }
                    })
                })
                .collect()
        };
        Ok(Tensors { n, source: values(&ctx.source_frame, false)?, target: values(&ctx.target_frame, true)? })
    }

    fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &a| acc * self.n + a)
    }

    fn h(&self, tuple: &[usize], d: usize) -> &TruncatedSeries {
        &self.source[tuple.len()][self.index(tuple)].1[d]
    }

    fn h_t(&self, tuple: &[usize]) -> &TruncatedSeries {
        &self.source[tuple.len()][self.index(tuple)].0
    }

    fn hh(&self, tuple: &[usize], d: usize) -> &TruncatedSeries {
        &self.target[tuple.len()][self.index(tuple)].1[d]
    }

    fn hh_t(&self, tuple: &[usize]) -> &TruncatedSeries {
        &self.target[tuple.len()][self.index(tuple)].0
    }
}

fn sum(terms: impl IntoIterator<Item = Result<TruncatedSeries>>, nvars: usize) -> Result<TruncatedSeries> {
    let mut acc: Option<TruncatedSeries> = None;
    for t in terms {
        let t = t?;
        acc = Some(match acc {
            Some(a) => a.try_add(&t)?,
            None => t,
        });
    }
    Ok(acc.unwrap_or_else(|| TruncatedSeries::zero(nvars, Order::Exact)))
}

fn record(report: &mut IdentityReport, label: String, residual: TruncatedSeries) {
    report.checked += 1;
    if !residual.is_zero() {
        report.violations.push(format!("{label}: residual {residual}"));
    }
}

/// Residuals of the five base reflection identities.
pub fn verify_reflection_identities(ctx: &MapContext, data: &PushforwardData, exec: Exec) -> Result<IdentityReport> {
    let src = &ctx.source_frame;
    let n = src.n();
    let nv = src.nvars();
    let pairing = Pairing::intrinsic(n);
    let tens = Tensors::build(ctx, 1, exec)?;
    let gbar = data.gamma_conj(&pairing)?;
    let mut report = IdentityReport::new("reflection identities");
    for a in 0..n {
        for b in 0..n {
            // ξ h_{ĀB} = γ^D_B γ̄^C_A ĥ_{C̄D}
            let rhs = sum(
                (0..n).flat_map(|c| (0..n).map(move |d| (c, d))).map(|(c, d)| {
                    data.gamma[d][b].try_mul(&gbar[c][a])?.try_mul(tens.hh(&[c], d))
                }),
                nv,
            )?;
            let lhs = data.xi.try_mul(tens.h(&[a], b))?;
            record(&mut report, format!("levi A={} B={}", a + 1, b + 1), lhs.try_sub(&rhs)?);
            for e in 0..n {
                // L_Ā γ^E_B + η^E h_{ĀB} = 0
                let r = src.lbar()[a].apply(&data.gamma[e][b])?.try_add(&data.eta[e].try_mul(tens.h(&[a], b))?)?;
                record(&mut report, format!("gamma A={} B={} E={}", a + 1, b + 1, e + 1), r);
            }
        }
        // L_Ā ξ + ξ h_Ā = ξ γ̄^C_A ĥ_C̄ + γ̄^C_A η^D ĥ_{C̄D}
        let lhs = src.lbar()[a].apply(&data.xi)?.try_add(&data.xi.try_mul(tens.h_t(&[a]))?)?;
        let rhs1 = sum((0..n).map(|c| data.xi.try_mul(&gbar[c][a])?.try_mul(tens.hh_t(&[c]))), nv)?;
        let rhs2 = sum(
            (0..n).flat_map(|c| (0..n).map(move |d| (c, d))).map(|(c, d)| {
                gbar[c][a].try_mul(&data.eta[d])?.try_mul(tens.hh(&[c], d))
            }),
            nv,
        )?;
        record(&mut report, format!("xi A={}", a + 1), lhs.try_sub(&rhs1.try_add(&rhs2)?)?);
        let h_a_conj = tens.h_t(&[a]).conjugate(&pairing)?;
        for c in 0..n {
            // L_Ā η^C + η^C h_Ā = 0
            let r = src.lbar()[a].apply(&data.eta[c])?.try_add(&data.eta[c].try_mul(tens.h_t(&[a]))?)?;
            record(&mut report, format!("eta A={} C={}", a + 1, c + 1), r);
            // T γ^C_A − L_A η^C − η^C conj(h_Ā) = 0
            let r = src
                .t()
                .apply(&data.gamma[c][a])?
                .try_sub(&src.l()[a].apply(&data.eta[c])?)?
                .try_sub(&data.eta[c].try_mul(&h_a_conj)?)?;
            record(&mut report, format!("transversal A={} C={}", a + 1, c + 1), r);
        }
    }
    Ok(report)
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

/// Residuals of the transport identities for `L_C̄(γ^D_B ĥ_{Ā…D})` and
/// `L_C̄(η^D ĥ_{Ā…D})` over all tuples of length `k`.
pub fn verify_tensor_transport(
    ctx: &MapContext,
    data: &PushforwardData,
    k: usize,
    exec: Exec,
) -> Result<IdentityReport> {
    let src = &ctx.source_frame;
    let n = src.n();
    let nv = src.nvars();
    let pairing = Pairing::intrinsic(n);
    let tens = Tensors::build(ctx, k + 1, exec)?;
    let gbar = data.gamma_conj(&pairing)?;
    let mut report = IdentityReport::new("tensor transport");
    let cases: Vec<(Vec<usize>, usize, usize)> = tuples(n, k)
        .into_iter()
        .flat_map(|t| (0..n).flat_map(move |b| (0..n).map(move |c| (b, c))).map(move |(b, c)| (t.clone(), b, c)))
        .collect();
    let results = exec.try_map(&cases, |(tuple, b, c)| {
        let (b, c) = (*b, *c);
        let ext = |i: usize| {
            let mut t = tuple.clone();
            t.push(i);
            t
        };
        let pairs = || (0..n).flat_map(|h| (0..n).map(move |i| (h, i)));
        // γ-transport
        let inner = sum((0..n).map(|d| data.gamma[d][b].try_mul(tens.hh(tuple, d))), nv)?;
        let lhs = src.lbar()[c].apply(&inner)?;
        let t1 = sum(pairs().map(|(h, i)| data.gamma[h][b].try_mul(&gbar[i][c])?.try_mul(tens.hh(&ext(i), h))), nv)?;
        let t2 = sum(
            pairs().map(|(h, i)| {
                data.gamma[h][b].try_mul(&gbar[i][c])?.try_mul(tens.hh_t(tuple))?.try_mul(tens.hh(&[i], h))
            }),
            nv,
        )?;
        let t3 = sum((0..n).map(|h| data.eta[h].try_mul(tens.hh(tuple, h))?.try_mul(tens.h(&[c], b))), nv)?;
        let r1 = lhs.try_sub(&t1)?.try_add(&t2)?.try_add(&t3)?;
        // η-transport
        let inner = sum((0..n).map(|d| data.eta[d].try_mul(tens.hh(tuple, d))), nv)?;
        let lhs = src.lbar()[c].apply(&inner)?;
        let s1 = sum(pairs().map(|(h, i)| data.eta[h].try_mul(&gbar[i][c])?.try_mul(tens.hh(&ext(i), h))), nv)?;
        let s2 = sum(
            pairs().map(|(h, i)| {
                data.eta[h].try_mul(&gbar[i][c])?.try_mul(tens.hh_t(tuple))?.try_mul(tens.hh(&[i], h))
            }),
            nv,
        )?;
        let s3 = sum((0..n).map(|h| data.eta[h].try_mul(tens.hh(tuple, h))?.try_mul(tens.h_t(&[c]))), nv)?;
        let r2 = lhs.try_sub(&s1)?.try_add(&s2)?.try_add(&s3)?;
        let label = format!("A={} B={} C={}", crate::invariants::label(tuple), b + 1, c + 1);
        Ok::<_, Error>(((format!("gamma {label}"), r1), (format!("eta {label}"), r2)))
    })?;
    for ((l1, r1), (l2, r2)) in results {
        record(&mut report, l1, r1);
        record(&mut report, l2, r2);
    }
    Ok(report)
}

/// `(γ, η)` recovered from `ξ`, `γ̄` and the map, for a Levi-nondegenerate target.
#[derive(Clone, Debug, PartialEq)]
pub struct LeviReconstruction {
    pub gamma: Vec<Vec<TruncatedSeries>>,
    pub eta: Vec<TruncatedSeries>,
}

/// Solves the Levi identity for `γ` and the `ξ` identity for `η`:
/// with `M_{AD} = γ̄^C_A ĥ_{C̄D}`, `γ = ξ M⁻¹ H` and
/// `η = M⁻¹ (L_Ā ξ + ξ h_Ā − ξ γ̄^C_A ĥ_C̄)`.
pub fn solve_levi_reflection(
    ctx: &MapContext,
    xi: &TruncatedSeries,
    gamma_conj: &[Vec<TruncatedSeries>],
    exec: Exec,
) -> Result<LeviReconstruction> {
    let src = &ctx.source_frame;
    let n = src.n();
    let nv = src.nvars();
    let tens = Tensors::build(ctx, 1, exec)?;
    let levi0: Vec<Vec<CScalar>> =
        (0..n).map(|c| (0..n).map(|d| tens.hh(&[c], d).constant_term()).collect()).collect();
    if linalg::bareiss_rank(&levi0) != n {
        return Err(Error::Singular("target Levi form is degenerate at the origin".into()));
    }
    let order = Order::Finite(ctx.source_frame.order());
    let m: Vec<Vec<TruncatedSeries>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|d| Ok(sum((0..n).map(|c| gamma_conj[c][a].try_mul(tens.hh(&[c], d))), nv)?.truncate(order)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let minv = linalg::invert_series_matrix(&m)?;
    let gamma: Vec<Vec<TruncatedSeries>> = (0..n)
        .map(|d| {
            (0..n)
                .map(|b| {
                    let s = sum((0..n).map(|a| minv[d][a].try_mul(tens.h(&[a], b))), nv)?;
                    xi.try_mul(&s)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rhs: Vec<TruncatedSeries> = (0..n)
        .map(|a| {
            let base = src.lbar()[a].apply(xi)?.try_add(&xi.try_mul(tens.h_t(&[a]))?)?;
            let corr = sum((0..n).map(|c| gamma_conj[c][a].try_mul(tens.hh_t(&[c]))), nv)?;
            base.try_sub(&xi.try_mul(&corr)?)
        })
        .collect::<Result<_>>()?;
    let eta: Vec<TruncatedSeries> =
        (0..n).map(|d| sum((0..n).map(|a| minv[d][a].try_mul(&rhs[a])), nv)).collect::<Result<_>>()?;
    Ok(LeviReconstruction { gamma, eta })
}

/// Differences between a reconstruction and directly computed data.
pub fn reconstruction_violations(rec: &LeviReconstruction, data: &PushforwardData) -> Result<Vec<String>> {
    let n = data.n();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let r = rec.gamma[a][b].try_sub(&data.gamma[a][b])?;
            if !r.is_zero() {
                out.push(format!("γ^{}_{}: residual {r}", a + 1, b + 1));
            }
        }
        let r = rec.eta[a].try_sub(&data.eta[a])?;
        if !r.is_zero() {
            out.push(format!("η^{}: residual {r}", a + 1));
        }
    }
    Ok(out)
}

/// Automorphisms of the Heisenberg hypersurface `Im w = |z|²` in normalized coordinates.
pub mod heisenberg {
    use super::*;

    fn var(big_n: usize, j: usize) -> TruncatedSeries {
        TruncatedSeries::var(2 * big_n, j, Order::Exact)
    }

    fn check(m: &Hypersurface) -> Result<usize> {
        let big_n = m.big_n();
        let n = big_n - 1;
        let mut phi = TruncatedSeries::zero(2 * n + 1, Order::Exact);
        for j in 0..n {
            let z = TruncatedSeries::var(2 * n + 1, j, Order::Exact);
            let zb = TruncatedSeries::var(2 * n + 1, n + j, Order::Exact);
            phi = &phi + &(&z * &zb);
        }
        if m.phi() != &phi {
            return Err(Error::Invalid("not the Heisenberg hypersurface".into()));
        }
        Ok(big_n)
    }

    /// `(z, w) ↦ (z + a, w + 2i⟨z, a⟩ + i|a|²)`.
    pub fn translation(m: &Hypersurface, a: &[CScalar]) -> Result<AmbientMap> {
        let big_n = check(m)?;
        let n = big_n - 1;
        if a.len() != n {
            return Err(Error::SubstitutionArity { expected: n, got: a.len() });
        }
        let nv = 2 * big_n;
        let mut comps: Vec<TruncatedSeries> = (0..n)
            .map(|j| var(big_n, j).try_add(&TruncatedSeries::constant(nv, a[j].clone(), Order::Exact)))
            .collect::<Result<_>>()?;
        let two_i = CScalar::from_ratios((0, 1), (2, 1));
        let mut w = var(big_n, n);
        let mut norm = Rational::from_integer(0.into());
        for j in 0..n {
            w = w.try_add(&var(big_n, j).scale(&(&two_i * &a[j].conj())))?;
            norm += a[j].norm_sqr();
        }
        w = w.try_add(&TruncatedSeries::constant(nv, CScalar::imag(norm), Order::Exact))?;
        comps.push(w);
        AmbientMap::normalized(comps, m, m)
    }

    /// `(z, w) ↦ (λz, λ²w)` for real `λ ≠ 0`.
    pub fn dilation(m: &Hypersurface, lambda: &Rational) -> Result<AmbientMap> {
        let big_n = check(m)?;
        let l = CScalar::real(lambda.clone());
        let mut comps: Vec<TruncatedSeries> = (0..big_n - 1).map(|j| var(big_n, j).scale(&l)).collect();
        comps.push(var(big_n, big_n - 1).scale(&(&l * &l)));
        AmbientMap::normalized(comps, m, m)
    }

    /// `(z, w) ↦ (Uz, w)`; tangent exactly when `U` is unitary.
    pub fn rotation(m: &Hypersurface, u: &[Vec<CScalar>]) -> Result<AmbientMap> {
        let big_n = check(m)?;
        let n = big_n - 1;
        if u.len() != n || u.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("rotation matrix has the wrong shape".into()));
        }
        let mut comps: Vec<TruncatedSeries> = u
            .iter()
            .map(|row| sum((0..n).map(|j| Ok(var(big_n, j).scale(&row[j]))), 2 * big_n))
            .collect::<Result<_>>()?;
        comps.push(var(big_n, n));
        AmbientMap::normalized(comps, m, m)
    }

    /// `(z, w) ↦ ((z + a w)/δ, w/δ)` with `δ = 1 − 2i⟨z, a⟩ − (r + i|a|²) w`,
    /// truncated at `order`. Fixes the origin and moves the frame nontrivially.
    pub fn isotropy(m: &Hypersurface, a: &[CScalar], r: &Rational, order: u32) -> Result<AmbientMap> {
        let big_n = check(m)?;
        let n = big_n - 1;
        if a.len() != n {
            return Err(Error::SubstitutionArity { expected: n, got: a.len() });
        }
        let nv = 2 * big_n;
        let ord = Order::Finite(order);
        let w = var(big_n, n).truncate(ord);
        let two_i = CScalar::from_ratios((0, 1), (2, 1));
        let mut norm = Rational::from_integer(0.into());
        let mut delta = TruncatedSeries::one(nv, ord);
        for j in 0..n {
            delta = delta.try_sub(&var(big_n, j).scale(&(&two_i * &a[j].conj())))?;
            norm += a[j].norm_sqr();
        }
        delta = delta.try_sub(&w.scale(&CScalar::new(r.clone(), norm)))?;
        let inv = delta.invert_unit()?;
        let mut comps: Vec<TruncatedSeries> = (0..n)
            .map(|j| var(big_n, j).try_add(&w.scale(&a[j]))?.try_mul(&inv))
            .collect::<Result<_>>()?;
        comps.push(w.try_mul(&inv)?);
        AmbientMap::normalized(comps, m, m)
    }

    /// `dilation(λ) ∘ rotation(U) ∘ isotropy(a, r)`; every automorphism fixing
    /// the origin has this form for a unique `(λ, U, a, r)` with `λ > 0`.
    pub fn stabilizer(
        m: &Hypersurface,
        lambda: &Rational,
        u: &[Vec<CScalar>],
        a: &[CScalar],
        r: &Rational,
        order: u32,
    ) -> Result<AmbientMap> {
        dilation(m, lambda)?.compose(&rotation(m, u)?)?.compose(&isotropy(m, a, r, order)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::scalar::rat;

    #[test]
    fn identity_data() {
        let m = models::heisenberg(2, 6).unwrap();
        let ctx = MapContext::new(&AmbientMap::identity(&m)).unwrap();
        let (data, v) = pushforward_data(&ctx).unwrap();
        assert!(v.is_empty());
        assert!(data.xi.try_sub(&TruncatedSeries::one(3, Order::Exact)).unwrap().is_zero());
        assert!(data.eta[0].is_zero());
        assert!(data.gamma[0][0].try_sub(&TruncatedSeries::one(3, Order::Exact)).unwrap().is_zero());
        let r = verify_reflection_identities(&ctx, &data, Exec::Sequential).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
    }

    #[test]
    fn dilation_data_at_origin() {
        let m = models::heisenberg(2, 6).unwrap();
        let f = heisenberg::dilation(&m, &rat(2, 1)).unwrap();
        let ctx = MapContext::new(&f).unwrap();
        let (data, v) = pushforward_data(&ctx).unwrap();
        assert!(v.is_empty(), "{v:?}");
        assert_eq!(data.xi.constant_term(), CScalar::from_int(4));
        assert_eq!(data.gamma_at_origin(), vec![vec![CScalar::from_int(2)]]);
    }

    #[test]
    fn non_tangent_map_is_rejected() {
        let m = models::heisenberg(2, 6).unwrap();
        let z = TruncatedSeries::var(4, 0, Order::Exact);
        let w = TruncatedSeries::var(4, 1, Order::Exact);
        let f = AmbientMap::normalized(vec![z.scale(&CScalar::from_int(2)), w], &m, &m).unwrap();
        assert!(matches!(MapContext::new(&f), Err(Error::NotTangent(_))));
        let zb = TruncatedSeries::var(4, 2, Order::Exact);
        assert!(AmbientMap::normalized(vec![zb, TruncatedSeries::var(4, 1, Order::Exact)], &m, &m).is_err());
    }
}
