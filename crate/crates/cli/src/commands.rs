//! Verbs of the command line and their reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use crjet_core::aut::{aut_bound, FormalVectorField, holomorphic_degeneracy_test, infinitesimal_aut_dim, Grading, TangencySystem};
use crjet_core::hypersurface::{build_frame, Hypersurface};
use crjet_core::invariants::{
    analyze, commutator_certificate, default_order, extrinsic_k0, nondegeneracy_scan, scan_grid,
    verify_chain_recursion, verify_commutator_tensor_relation, verify_frame, verify_leading_tensor_derivatives,
    FiltrationOptions, IdentityReport, ScanReport,
};
use crjet_core::jets::{integrate, taylor_propagate, Grid, IntegrationOptions};
use crjet_core::mappings::{
    pushforward_data, reconstruction_violations, solve_levi_reflection, verify_reflection_identities,
    verify_tensor_transport, AmbientMap, MapContext,
};
use crjet_core::scalar::{fmt_rational, rational_to_f64, CScalar, Rational};
use crjet_core::{Error, Exec, Pairing, TruncatedSeries};
use num_bigint::BigInt;
use serde_json::{json, Value};

use crate::parse::{ambient_factors, jet_name, series_expr, lower, parse_constant, parse_expr, InputDocument, Lowering, ParseError};
use crate::report::{self, Report};

/// Environment variable overriding the default truncation order.
pub const ORDER_ENV: &str = "CRJET_ORDER";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "crjet", version, about = "Nondegeneracy invariants, reflection identities and jet reconstruction for real hypersurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn json(&self) -> bool {
        match &self.command {
            Command::Analyze(a) => a.common.json,
            Command::Verify(a) => a.common.json,
            Command::Reflect(a) => a.json,
            Command::Reconstruct(a) => a.json,
            Command::Aut(a) => a.json,
            Command::Scan(a) => a.json,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Nondegeneracy order, filtration dimensions, tensor orders and type.
    Analyze(AnalyzeArgs),
    /// Check one family of identities; every residual must vanish.
    Verify(VerifyArgs),
    /// Pushforward data and reflection identities of a map between hypersurfaces.
    Reflect(ReflectArgs),
    /// Rebuild a solution of a complete system from its jet at the origin.
    Reconstruct(ReconstructArgs),
    /// Dimension of infinitesimal automorphisms of bounded degree.
    Aut(AutArgs),
    /// Nondegeneracy order at sample points of a polynomial hypersurface.
    Scan(ScanArgs),
}

#[derive(Args, Debug)]
pub struct HypersurfaceArgs {
    /// Hypersurface document.
    pub file: PathBuf,
    /// Largest nondegeneracy order searched; defaults to N − 1.
    #[arg(long)]
    pub kmax: Option<u32>,
    /// Truncation order; defaults to 2(kmax + 2).
    #[arg(long)]
    pub order: Option<u32>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: HypersurfaceArgs,
    /// Also scan sample points, e.g. "z=0,1/2;s=0,1/3".
    #[arg(long)]
    pub scan: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Identity {
    /// Frame duality, reality and vanishing structure functions.
    #[value(name = "frame")]
    Frame,
    /// Recursion of the Lie-derivative chains.
    #[value(name = "l1.13")]
    ChainRecursion,
    /// Leading derivatives of the first nonzero tensor.
    #[value(name = "l1.18")]
    LeadingTensorDerivatives,
    /// Commutators against tensor orders.
    #[value(name = "p1.24")]
    CommutatorTensorRelation,
    /// Operator certificates for iterated commutators at order one.
    #[value(name = "p3.18k1")]
    CommutatorCertificate,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: HypersurfaceArgs,
    #[arg(long, value_enum)]
    pub identity: Identity,
}

#[derive(Args, Debug)]
pub struct ReflectArgs {
    /// Source hypersurface document.
    pub source: PathBuf,
    /// Target hypersurface document.
    pub target: PathBuf,
    /// Map document.
    pub map: PathBuf,
    /// Truncation order; defaults to 2(N + 1).
    #[arg(long)]
    pub order: Option<u32>,
    /// Largest tensor length in the transport identities.
    #[arg(long, default_value_t = 1)]
    pub transport: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Complete-system document.
    pub system: PathBuf,
    /// Jet document with the values at the origin.
    pub jet: PathBuf,
    /// Runge–Kutta step.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Lower end of every axis.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub lo: String,
    /// Upper end of every axis.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub hi: String,
    /// Sweep order of the axes, 1-based and comma-separated.
    #[arg(long)]
    pub axis_order: Option<String>,
    /// Also propagate the jet formally to this order.
    #[arg(long)]
    pub taylor: Option<u32>,
    /// Known polynomial solution, one expression in x1… per component, separated by ';'.
    #[arg(long)]
    pub solution: Option<String>,
    /// Largest accepted deviation from the known solution.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GradingArg {
    Standard,
    Weighted,
}

#[derive(Args, Debug)]
pub struct AutArgs {
    /// Hypersurface document.
    pub file: PathBuf,
    /// Degree of the candidate fields.
    #[arg(long)]
    pub degree: u32,
    /// Truncation order; defaults to degree + 6.
    #[arg(long)]
    pub order: Option<u32>,
    #[arg(long, value_enum, default_value_t = GradingArg::Weighted)]
    pub grading: GradingArg,
    /// Solve for holomorphic tangent fields instead.
    #[arg(long)]
    pub holomorphic: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Polynomial hypersurface document.
    pub file: PathBuf,
    /// Sample values of every z_j, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    /// Sample values of Re w, comma-separated.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub s: String,
    /// Largest nondegeneracy order searched at each point.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long)]
    pub json: bool,
}

pub fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Analyze(a) => analyze_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Reflect(a) => reflect_cmd(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Aut(a) => aut_cmd(a),
        Command::Scan(a) => scan_cmd(a),
    }
}

fn load(path: &Path) -> Result<InputDocument> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    InputDocument::parse(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

fn in_file<T>(path: &Path, r: std::result::Result<T, ParseError>) -> Result<T> {
    r.map_err(|source| CliError::Parse { path: path.into(), source })
}

fn env_order() -> Result<Option<u32>> {
    match std::env::var(ORDER_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{ORDER_ENV} must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Flag, then document, then environment, then the given default.
fn resolve_order(flag: Option<u32>, doc: &InputDocument, path: &Path, default: u32) -> Result<u32> {
    if let Some(o) = flag {
        return Ok(o);
    }
    if let Some(o) = in_file(path, doc.order())? {
        return Ok(o);
    }
    Ok(env_order()?.unwrap_or(default))
}

struct Loaded {
    m: Hypersurface,
    kmax: u32,
    order: u32,
}

fn load_hypersurface(a: &HypersurfaceArgs) -> Result<Loaded> {
    let doc = load(&a.file)?;
    let big_n = in_file(&a.file, doc.big_n())?;
    let kmax = a.kmax.unwrap_or(big_n as u32 - 1);
    let order = resolve_order(a.order, &doc, &a.file, default_order(kmax))?;
    let m = in_file(&a.file, doc.hypersurface(order))?;
    Ok(Loaded { m, kmax, order })
}

fn bases_value(bases: &[Vec<Vec<CScalar>>]) -> Value {
    json!(bases
        .iter()
        .map(|b| b.iter().map(|v| v.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn witness(w: &Option<(Vec<usize>, usize)>) -> Value {
    match w {
        Some((t, d)) => json!({"tuple": report::tuple(t), "direction": d + 1}),
        None => Value::Null,
    }
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<Report> {
    let l = load_hypersurface(&a.common)?;
    let opts = FiltrationOptions { exec: Exec::default(), ..FiltrationOptions::with_kmax(l.kmax) };
    let an = analyze(&l.m, opts)?;
    let f = &an.filtration;
    let violations = f.consistency_violations(l.m.big_n());
    let mut result = json!({
        "N": l.m.big_n(),
        "order": l.order,
        "kmax": f.kmax,
        "lmax": f.lmax,
        "typemax": f.typemax,
        "k0": report::bounded(f.k0),
        "k0_extrinsic": report::bounded(an.extrinsic.k0),
        "k0_agree": an.k0_agree(),
        "extrinsic_ranks": an.extrinsic.ranks,
        "ek_dims": f.ek_dims,
        "fk_dims": f.fk_dims,
        "rk": f.rk,
        "fk_bases": bases_value(&f.fk_bases),
        "levi_rank": f.levi_rank,
        "ell0": report::bounded(f.ell0),
        "ell0_witness": witness(&f.ell0_witness),
        "ell1": report::bounded(f.ell1),
        "ell1_witness": witness(&f.ell1_witness),
        "type": report::bounded(f.m0),
        "consistency_violations": violations,
    });
    if let Some(spec) = &a.scan {
        let (zs, ss) = parse_scan_spec(spec)?;
        let k = l.kmax;
        let scan = nondegeneracy_scan(&l.m, &scan_grid(l.m.n(), &zs, &ss), k, Exec::default())?;
        result["scan"] = scan_value(&scan);
    }
    let passed = an.k0_agree() && violations.is_empty();
    Ok(Report::new("analyze", result, passed))
}

fn constants(list: &str, what: &str) -> Result<Vec<CScalar>> {
    list.split(',')
        .map(|t| parse_constant(t.trim()).map_err(|e| CliError::Usage(format!("bad {what} value '{t}': {e}"))))
        .collect()
}

fn reals(list: &str, what: &str) -> Result<Vec<Rational>> {
    constants(list, what)?
        .into_iter()
        .map(|c| if c.is_real() { Ok(c.re) } else { Err(CliError::Usage(format!("{what} values must be real"))) })
        .collect()
}

fn parse_scan_spec(spec: &str) -> Result<(Vec<CScalar>, Vec<Rational>)> {
    let mut zs = None;
    let mut ss = None;
    for part in spec.split(';') {
        match part.split_once('=') {
            Some((k, v)) if k.trim() == "z" => zs = Some(constants(v, "z")?),
            Some((k, v)) if k.trim() == "s" => ss = Some(reals(v, "s")?),
            _ => return Err(CliError::Usage(format!("bad scan specification '{spec}', expected \"z=…;s=…\""))),
        }
    }
    let zs = zs.ok_or_else(|| CliError::Usage("scan specification needs z values".into()))?;
    Ok((zs, ss.unwrap_or_else(|| vec![Rational::from_integer(0.into())])))
}

fn scan_value(scan: &ScanReport) -> Value {
    json!({
        "k": scan.k,
        "nondegenerate": scan.nondegenerate_count(),
        "points": scan.points.iter().map(|p| json!({
            "z": p.z.iter().map(report::scalar).collect::<Vec<_>>(),
            "s": report::rational(&p.s),
            "point": p.point.iter().map(report::scalar).collect::<Vec<_>>(),
            "k0": report::bounded(p.k0),
        })).collect::<Vec<_>>(),
    })
}

fn scan_cmd(a: &ScanArgs) -> Result<Report> {
    let doc = load(&a.file)?;
    let order = resolve_order(None, &doc, &a.file, default_order(a.k))?;
    let m = in_file(&a.file, doc.hypersurface(order))?;
    let zs = constants(&a.z, "z")?;
    let ss = reals(&a.s, "s")?;
    let scan = nondegeneracy_scan(&m, &scan_grid(m.n(), &zs, &ss), a.k, Exec::default())?;
    Ok(Report::new("scan", scan_value(&scan), true))
}

fn verify_cmd(a: &VerifyArgs) -> Result<Report> {
    let l = load_hypersurface(&a.common)?;
    let frame = build_frame(&l.m)?;
    let exec = Exec::default();
    let lmax = l.kmax + 1;
    let (name, reports): (&str, Vec<IdentityReport>) = match a.identity {
        Identity::Frame => ("frame", vec![verify_frame(&frame)?]),
        Identity::ChainRecursion => (
            "l1.13",
            (0..=l.kmax as usize).map(|k| verify_chain_recursion(&frame, k, exec)).collect::<crjet_core::Result<_>>()?,
        ),
        Identity::LeadingTensorDerivatives => ("l1.18", vec![verify_leading_tensor_derivatives(&frame, lmax, exec)?]),
        Identity::CommutatorTensorRelation => ("p1.24", vec![verify_commutator_tensor_relation(&frame, lmax, exec)?]),
        Identity::CommutatorCertificate => {
            let mut out = Vec::new();
            for m in 2..=3usize {
                let cert = commutator_certificate(&frame, &vec![0; m], 5, exec)?;
                let mut r = IdentityReport::new(&format!("commutator certificate m = {m}"));
                r.checked = cert.checked();
                r.violations = cert.violations();
                r.note = format!("E = {:?}, F = {}, monomials up to degree {}", vec![1; m], cert.f + 1, cert.max_degree);
                out.push(r);
            }
            ("p3.18k1", out)
        }
    };
    let passed = reports.iter().all(IdentityReport::passed);
    let result = json!({
        "identity": name,
        "N": l.m.big_n(),
        "order": l.order,
        "kmax": l.kmax,
        "checks": reports.iter().map(report::identity).collect::<Vec<_>>(),
    });
    Ok(Report::new("verify", result, passed))
}

fn reflect_cmd(a: &ReflectArgs) -> Result<Report> {
    let src_doc = load(&a.source)?;
    let tgt_doc = load(&a.target)?;
    let map_doc = load(&a.map)?;
    let big_n = in_file(&a.source, src_doc.big_n())?;
    let order = resolve_order(a.order, &src_doc, &a.source, default_order(big_n as u32 - 1))?;
    let src = in_file(&a.source, src_doc.hypersurface(order))?;
    let tgt = in_file(&a.target, tgt_doc.hypersurface(order))?;
    let comps = in_file(&a.map, map_doc.map_components(big_n, order))?;
    let f = AmbientMap::new(comps, &src, &tgt)?;
    let ctx = MapContext::new(&f)?;
    let exec = Exec::default();
    let (data, zero_blocks) = pushforward_data(&ctx)?;
    let mut checks = vec![verify_reflection_identities(&ctx, &data, exec)?];
    for k in 0..=a.transport {
        let mut r = verify_tensor_transport(&ctx, &data, k, exec)?;
        r.name = format!("{} k = {k}", r.name);
        checks.push(r);
    }
    let gbar = data.gamma_conj(&Pairing::intrinsic(src.n()))?;
    let reconstruction = match solve_levi_reflection(&ctx, &data.xi, &gbar, exec) {
        Ok(rec) => {
            let v = reconstruction_violations(&rec, &data)?;
            json!({"performed": true, "passed": v.is_empty(), "violations": v})
        }
        Err(Error::Singular(msg)) => json!({"performed": false, "passed": true, "note": msg}),
        Err(e) => return Err(e.into()),
    };
    let passed = zero_blocks.is_empty()
        && checks.iter().all(IdentityReport::passed)
        && reconstruction["passed"] == Value::Bool(true);
    let result = json!({
        "N": big_n,
        "order": order,
        "map_at_origin": f.at_origin().iter().map(report::scalar).collect::<Vec<_>>(),
        "xi_at_origin": report::scalar(&data.xi.constant_term()),
        "gamma_at_origin": data.gamma_at_origin().iter()
            .map(|r| r.iter().map(report::scalar).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "eta_at_origin": data.eta.iter().map(|e| report::scalar(&e.constant_term())).collect::<Vec<_>>(),
        "zero_block_violations": zero_blocks,
        "checks": checks.iter().map(report::identity).collect::<Vec<_>>(),
        "levi_reconstruction": reconstruction,
    });
    Ok(Report::new("reflect", result, passed))
}

fn polynomial_solution(text: &str, q: usize, m: usize) -> Result<Vec<TruncatedSeries>> {
    let names: Vec<String> = (1..=q).map(|v| format!("x{v}")).collect();
    let is_var = |s: &str| names.iter().any(|n| n == s);
    let parts: Vec<&str> = text.split(';').collect();
    if parts.len() != m {
        return Err(CliError::Usage(format!("solution has {} components, system has {m}", parts.len())));
    }
    parts
        .iter()
        .map(|p| {
            let e = parse_expr(p.trim(), 1, 1, &is_var, false).map_err(|e| CliError::Usage(format!("solution: {e}")))?;
            let s = lower(&e, &Lowering::plain(&names), None).map_err(|e| CliError::Usage(format!("solution: {e}")))?;
            if s.terms().any(|(_, c)| !c.is_real()) {
                return Err(CliError::Usage("solution must be real".into()));
            }
            Ok(s)
        })
        .collect()
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<Report> {
    let sys_doc = load(&a.system)?;
    let jet_doc = load(&a.jet)?;
    let s = in_file(&a.system, sys_doc.system())?;
    let jet = in_file(&a.jet, jet_doc.jet())?;
    let q = s.q();
    let lo = rational_to_f64(&reals(&a.lo, "lo")?[0]);
    let hi = rational_to_f64(&reals(&a.hi, "hi")?[0]);
    let grid = Grid::uniform(q, lo, hi, a.points)?;
    let mut opts = IntegrationOptions::with_step(q, a.step);
    if let Some(spec) = &a.axis_order {
        opts.axis_order = spec
            .split(',')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(CliError::Usage(format!("bad axis '{t}'"))),
            })
            .collect::<Result<_>>()?;
    }
    let rec = integrate(&s, &jet, &grid, &opts)?;
    let points: Vec<Value> = (0..grid.len())
        .map(|p| json!({"x": grid.point(p), "f": rec.values(p)}))
        .collect();
    let mut passed = true;
    let mut result = json!({
        "q": q,
        "m": s.m(),
        "k": s.k(),
        "step": a.step,
        "axis_order": rec.axis_order.iter().map(|l| l + 1).collect::<Vec<_>>(),
        "steps_taken": rec.steps_taken,
        "grid": points,
    });
    if let Some(text) = &a.solution {
        let sol = polynomial_solution(text, q, s.m())?;
        let dev = rec.max_deviation(|x| sol.iter().map(|p| p.eval_f64(x).0).collect());
        let ok = dev <= a.tolerance;
        passed &= ok;
        result["solution"] = json!({"max_deviation": dev, "tolerance": a.tolerance, "passed": ok});
    }
    if let Some(order) = a.taylor {
        result["taylor"] = match taylor_propagate(&s, &jet, order) {
            Ok(prop) => {
                let layout = prop.jet.layout();
                let values: BTreeMap<String, Value> = (0..layout.len())
                    .map(|idx| {
                        let (i, b) = layout.entry(idx);
                        (jet_name(i, &b), Value::String(fmt_rational(&prop.jet.values()[idx])))
                    })
                    .collect();
                json!({"order": order, "consistent": true, "consistency_checks": prop.consistency_checks, "jet": values})
            }
            Err(Error::Inconsistent(msg)) => {
                passed = false;
                json!({"order": order, "consistent": false, "note": msg})
            }
            Err(e) => return Err(e.into()),
        };
    }
    Ok(Report::new("reconstruct", result, passed))
}

/// `a_1 d/dz1 + … + a_N d/dw` with coefficients in the ambient names.
fn field_text(y: &FormalVectorField) -> String {
    let big_n = y.big_n();
    let factors = ambient_factors(big_n);
    let names: Vec<String> = (1..big_n).map(|j| format!("z{j}")).chain(["w".to_string()]).collect();
    let parts: Vec<String> = y
        .coeffs
        .iter()
        .zip(&names)
        .filter(|(a, _)| !a.is_zero())
        .map(|(a, n)| format!("({}) d/d{n}", series_expr(a, &factors)))
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

fn tangency_value(t: &TangencySystem) -> Value {
    json!({
        "tangency": format!("{:?}", t.tangency).to_lowercase(),
        "degree": t.degree,
        "grading": t.grading.to_string(),
        "order": t.order,
        "unknowns": t.unknowns,
        "equations": t.equations,
        "rank": t.rank,
        "solution_dim": t.solution_dim,
        "basis": t.basis.iter().map(field_text).collect::<Vec<_>>(),
        "residual_violations": t.residual_violations,
        "verdict": t.verdict(),
    })
}

fn aut_cmd(a: &AutArgs) -> Result<Report> {
    let doc = load(&a.file)?;
    let big_n = in_file(&a.file, doc.big_n())?;
    let order = resolve_order(a.order, &doc, &a.file, a.degree + 6)?;
    let m = in_file(&a.file, doc.hypersurface(order))?;
    let grading = match a.grading {
        GradingArg::Standard => Grading::Standard,
        GradingArg::Weighted => Grading::Weighted,
    };
    let exec = Exec::default();
    let t = if a.holomorphic {
        holomorphic_degeneracy_test(&m, a.degree, order, grading, exec)?
    } else {
        infinitesimal_aut_dim(&m, a.degree, order, grading, exec)?
    };
    let bound = aut_bound(big_n)?;
    let k0 = extrinsic_k0(&m, big_n as u32 - 1)?.k0;
    let within = BigInt::from(t.solution_dim) <= bound;
    let mut result = tangency_value(&t);
    result["N"] = json!(big_n);
    result["bound"] = Value::String(bound.to_string());
    result["k0"] = report::bounded(k0);
    result["within_bound"] = json!(within);
    let passed = t.verified() && (a.holomorphic || !k0.is_finite() || within);
    Ok(Report::new("aut", result, passed))
}
