//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Criteria that the command line can express run through [`crjet::run`] on
//! the documents in `inputs/`; the rest call the library directly.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use crjet::parse::graph_document;
use crjet_core::aut::aut_bound;
use crjet_core::hypersurface::build_frame;
use crjet_core::invariants::{
    commutator_certificate, verify_chain_recursion, verify_commutator_tensor_relation, verify_frame,
    verify_leading_tensor_derivatives, IdentityReport,
};
use crjet_core::jets::{
    heisenberg_family, integrate, jet_injectivity_demo, observed_order, CompleteSystem, Grid, IntegrationOptions,
    JetVector,
};
use crjet_core::mappings::{
    heisenberg, pushforward_data, reconstruction_violations, solve_levi_reflection, verify_reflection_identities,
    verify_tensor_transport, AmbientMap, MapContext,
};
use crjet_core::scalar::{rat, CScalar};
use crjet_core::{models, Exec, Hypersurface, MultiIndex, Order, Pairing, TruncatedSeries};
use num_bigint::BigInt;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn input(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("inputs").join(name).display().to_string()
}

fn cli(args: &[&str]) -> Result<Value, String> {
    let mut all = vec!["crjet"];
    all.extend_from_slice(args);
    all.push("--json");
    let out = crjet::run(all);
    if !out.stderr.is_empty() {
        return Err(format!("{args:?}: {}", out.stderr.trim()));
    }
    serde_json::from_str(&out.stdout).map_err(|e| format!("{args:?}: {e}"))
}

fn expect(r: &Value, key: &str, want: Value, what: &str) -> Result<(), String> {
    ensure(r["result"][key] == want, || format!("{what}: {key} = {}, expected {want}", r["result"][key]))
}

/// Heisenberg in ℂ² and ℂ³.
fn heisenberg_invariants() -> Outcome {
    for (file, n) in [("heisenberg2.crj", 1), ("heisenberg3.crj", 2)] {
        let r = cli(&["analyze", &input(file)])?;
        for key in ["k0", "k0_extrinsic", "ell0", "ell1"] {
            expect(&r, key, 1.into(), file)?;
        }
        expect(&r, "type", 2.into(), file)?;
        expect(&r, "levi_rank", n.into(), file)?;
        expect(&r, "k0_agree", true.into(), file)?;
        ensure(r["passed"] == true, || format!("{file}: report failed"))?;
    }
    Ok("ℂ² and ℂ³: k0 = 1 by both routes, ell0 = ell1 = 1, type 2, Levi rank n".into())
}

/// M₃ in ℂ³.
fn m3_invariants() -> Outcome {
    let r = cli(&["analyze", &input("m3.crj")])?;
    expect(&r, "k0", 2.into(), "M3")?;
    expect(&r, "k0_extrinsic", 2.into(), "M3")?;
    expect(&r, "k0_agree", true.into(), "M3")?;
    let ek = &r["result"]["ek_dims"];
    ensure(ek[1] == 2 && ek[2] == 3, || format!("M3: ek_dims = {ek}"))?;
    Ok(format!("k0 = 2 by both routes, dim E_k(0) = {ek}"))
}

/// M₂ in ℂ², searched to kmax = 6.
fn m2_invariants() -> Outcome {
    let r = cli(&["analyze", &input("m2.crj"), "--kmax", "6"])?;
    expect(&r, "k0", "∞@6".into(), "M2")?;
    expect(&r, "k0_extrinsic", "∞@6".into(), "M2")?;
    let (l0, l1) = (&r["result"]["ell0"], &r["result"]["ell1"]);
    ensure(l0.as_str().is_some_and(|s| s.starts_with('∞')) && l0 == l1, || format!("M2: ell0 = {l0}, ell1 = {l1}"))?;
    expect(&r, "type", 4.into(), "M2")?;
    Ok(format!("k0 = ∞@6 by both routes, ell0 = ell1 = {}, type 4", l0.as_str().unwrap_or("")))
}

fn identity_reports(m: &Hypersurface) -> Result<Vec<IdentityReport>, String> {
    let f = build_frame(m).map_err(|e| e.to_string())?;
    let exec = Exec::default();
    let mut out = vec![verify_frame(&f).map_err(|e| e.to_string())?];
    for k in 0..=2 {
        out.push(verify_chain_recursion(&f, k, exec).map_err(|e| e.to_string())?);
    }
    out.push(verify_leading_tensor_derivatives(&f, 3, exec).map_err(|e| e.to_string())?);
    out.push(verify_commutator_tensor_relation(&f, 3, exec).map_err(|e| e.to_string())?);
    Ok(out)
}

/// Frame, chain recursion, leading derivatives and the commutator relation at order 6.
fn identity_suites() -> Outcome {
    let order = 6;
    let mut cases: Vec<(String, Hypersurface)> = vec![
        ("Heisenberg".into(), models::heisenberg(2, order).unwrap()),
        ("M3".into(), models::m3(order).unwrap()),
        ("M2".into(), models::m2(order).unwrap()),
    ];
    for big_n in [2, 3] {
        for seed in 0..20 {
            cases.push((format!("random seed {seed} N={big_n}"), models::random(seed, big_n, order).unwrap()));
        }
    }
    let mut checked = 0;
    let mut vacuous = 0;
    for (name, m) in &cases {
        for r in identity_reports(m).map_err(|e| format!("{name}: {e}"))? {
            ensure(r.passed(), || format!("{name}, {}: {:?}", r.name, r.violations))?;
            checked += r.checked;
            vacuous += usize::from(r.vacuous);
        }
    }
    Ok(format!("{} hypersurfaces, {checked} residual series all zero ({vacuous} vacuous suites)", cases.len()))
}

fn heisenberg_maps(m: &Hypersurface) -> Vec<(String, AmbientMap)> {
    let n = m.n();
    let shift = |a: CScalar| {
        let mut v = vec![CScalar::zero(); n];
        v[0] = a;
        v
    };
    let u: Vec<Vec<CScalar>> = if n == 1 {
        vec![vec![CScalar::from_ratios((3, 5), (4, 5))]]
    } else {
        vec![
            vec![CScalar::real(rat(3, 5)), CScalar::real(rat(-4, 5))],
            vec![CScalar::imag(rat(4, 5)), CScalar::imag(rat(3, 5))],
        ]
    };
    let t1 = heisenberg::translation(m, &shift(CScalar::real(rat(1, 2)))).unwrap();
    let t2 = heisenberg::translation(m, &shift(CScalar::imag(rat(1, 3)))).unwrap();
    let d1 = heisenberg::dilation(m, &rat(2, 1)).unwrap();
    let d2 = heisenberg::dilation(m, &rat(1, 2)).unwrap();
    let r = heisenberg::rotation(m, &u).unwrap();
    vec![
        ("translation 1/2".into(), t1.clone()),
        ("translation i/3".into(), t2.clone()),
        ("dilation 2".into(), d1.clone()),
        ("dilation 1/2".into(), d2.clone()),
        ("rotation".into(), r.clone()),
        ("rotation∘dilation 2".into(), r.compose(&d1).unwrap()),
        ("translation 1/2∘rotation".into(), t1.compose(&r).unwrap()),
        ("dilation 1/2∘translation i/3".into(), d2.compose(&t2).unwrap()),
        ("translation i/3∘translation 1/2".into(), t2.compose(&t1).unwrap()),
    ]
}

/// Reflection and transport identities plus the Levi reconstruction.
fn reflection_suite() -> Outcome {
    let exec = Exec::default();
    let mut maps = 0;
    let mut checked = 0;
    for big_n in [2, 3] {
        let m = models::heisenberg(big_n, 6).unwrap();
        for (name, f) in heisenberg_maps(&m) {
            let tag = format!("N={big_n} {name}");
            let ctx = MapContext::new(&f).map_err(|e| format!("{tag}: {e}"))?;
            let (data, zero_blocks) = pushforward_data(&ctx).map_err(|e| format!("{tag}: {e}"))?;
            ensure(zero_blocks.is_empty(), || format!("{tag}: {zero_blocks:?}"))?;
            let mut reports = vec![verify_reflection_identities(&ctx, &data, exec).map_err(|e| e.to_string())?];
            for k in 0..=1 {
                reports.push(verify_tensor_transport(&ctx, &data, k, exec).map_err(|e| e.to_string())?);
            }
            for r in &reports {
                ensure(r.passed() && r.checked > 0, || format!("{tag}, {}: {:?}", r.name, r.violations))?;
                checked += r.checked;
            }
            let gbar = data.gamma_conj(&Pairing::intrinsic(m.n())).map_err(|e| e.to_string())?;
            let rec = solve_levi_reflection(&ctx, &data.xi, &gbar, exec).map_err(|e| format!("{tag}: {e}"))?;
            let v = reconstruction_violations(&rec, &data).map_err(|e| e.to_string())?;
            ensure(v.is_empty(), || format!("{tag}: reconstruction {v:?}"))?;
            maps += 1;
        }
    }
    // the same checks through the command line
    let h = input("heisenberg2.crj");
    for map in ["dilation2.crj", "translation.crj"] {
        let r = cli(&["reflect", &h, &h, &input(map)])?;
        ensure(r["passed"] == true, || format!("reflect {map}: {r}"))?;
    }
    Ok(format!("{maps} maps, {checked} residual series zero, (γ, η) reconstructed exactly"))
}

/// Commutator certificates for m = 2, 3 on Heisenberg.
fn certificates() -> Outcome {
    let m = models::heisenberg(2, 12).unwrap();
    let f = build_frame(&m).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for len in 2..=3usize {
        let cert = commutator_certificate(&f, &vec![0; len], 5, Exec::default()).map_err(|e| e.to_string())?;
        ensure(cert.passed(), || format!("m = {len}: {:?}", cert.violations()))?;
        ensure(cert.expansion.top.iter().all(|(_, want, got)| got == want), || format!("m = {len}: leading term"))?;
        checked += cert.checked();
    }
    let r = cli(&["verify", &input("heisenberg2.crj"), "--identity", "p3.18k1"])?;
    ensure(r["passed"] == true, || format!("verify p3.18k1: {r}"))?;
    Ok(format!("m = 2, 3: {checked} operator coefficients and monomial checks up to degree 5 agree exactly"))
}

fn single_system(q: usize, k: u32, entries: Vec<(Vec<u32>, TruncatedSeries)>) -> CompleteSystem {
    let map: BTreeMap<_, _> = entries.into_iter().map(|(a, p)| ((0, MultiIndex::from_slice(&a)), p)).collect();
    CompleteSystem::polynomial(q, 1, k, map).unwrap()
}

/// Closed forms at step 1e-4, observed order under halving, uniqueness.
fn integrator() -> Outcome {
    let var = |nv: usize, j: usize| TruncatedSeries::var(nv, j, Order::Exact);
    let exponential = single_system(1, 0, vec![(vec![1], var(2, 1))]);
    let line = single_system(1, 1, vec![(vec![2], TruncatedSeries::zero(3, Order::Exact))]);
    let planar = single_system(
        2,
        0,
        vec![(vec![1, 0], var(3, 2)), (vec![0, 1], var(3, 2).scale(&CScalar::from_int(2)))],
    );
    let h = 1e-4;
    let unit1 = Grid::uniform(1, 0.0, 1.0, 11).map_err(|e| e.to_string())?;
    let unit2 = Grid::uniform(2, 0.0, 1.0, 6).map_err(|e| e.to_string())?;
    let run = |s: &CompleteSystem, jet: &JetVector, g: &Grid, opts: &IntegrationOptions| {
        integrate(s, jet, g, opts).map_err(|e| e.to_string())
    };

    let j1 = JetVector::from_values(1, 1, 0, vec![rat(1, 1)]).unwrap();
    let e1 = run(&exponential, &j1, &unit1, &IntegrationOptions::with_step(1, h))?.max_deviation(|x| vec![x[0].exp()]);
    let jl = JetVector::from_values(1, 1, 1, vec![rat(1, 1), rat(2, 1)]).unwrap();
    let e2 = run(&line, &jl, &unit1, &IntegrationOptions::with_step(1, h))?.max_deviation(|x| vec![1.0 + 2.0 * x[0]]);
    let jp = JetVector::from_values(2, 1, 0, vec![rat(1, 1)]).unwrap();
    let e3 = run(&planar, &jp, &unit2, &IntegrationOptions::with_step(2, h))?
        .max_deviation(|x| vec![(x[0] + 2.0 * x[1]).exp()]);
    for (name, e) in [("f' = f", e1), ("f'' = 0", e2), ("planar exponential", e3)] {
        ensure(e <= 1e-8, || format!("{name}: max error {e:e}"))?;
    }

    // at 1e-4 the discretization error is below roundoff, so the order is
    // measured where it dominates
    let end = Grid::new(vec![vec![1.0]]).unwrap();
    let err = |step: f64| -> Result<f64, String> {
        Ok(run(&exponential, &j1, &end, &IntegrationOptions::with_step(1, step))?.max_deviation(|x| vec![x[0].exp()]))
    };
    let mut orders = Vec::new();
    for step in [0.1, 0.05] {
        let p = observed_order(err(step)?, err(step / 2.0)?);
        ensure((p - 4.0).abs() <= 0.2, || format!("observed order {p} at step {step}"))?;
        orders.push(format!("{p:.3}"));
    }

    // equal 0-jets of 3/2·e^{x₁+2x₂}: the closed-form value and the jet of a
    // product of truncated exponentials, in both sweep orders
    let fact = [1i64, 1, 2, 6];
    let ex = TruncatedSeries::from_terms(
        2,
        Order::Finite(3),
        (0..=3u32).map(|d| (MultiIndex::from_slice(&[d, 0]), CScalar::real(rat(1, fact[d as usize])))),
    );
    let ey = TruncatedSeries::from_terms(
        2,
        Order::Finite(3),
        (0..=3u32).map(|d| (MultiIndex::from_slice(&[0, d]), CScalar::real(rat(2i64.pow(d), fact[d as usize]))))
    );
    let product = ex.try_mul(&ey).unwrap().scale(&CScalar::real(rat(3, 2)));
    let from_series = JetVector::from_series(&[product], 0).unwrap();
    let closed = JetVector::from_values(2, 1, 0, vec![rat(3, 2)]).unwrap();
    ensure(closed == from_series, || "jets differ".into())?;
    let box2 = Grid::uniform(2, -0.5, 0.5, 5).unwrap();
    let mut runs = Vec::new();
    for jet in [&closed, &from_series] {
        for axis_order in [vec![0, 1], vec![1, 0]] {
            runs.push(run(&planar, jet, &box2, &IntegrationOptions { step: h, axis_order })?);
        }
    }
    let mut worst = 0.0f64;
    for r in &runs[1..] {
        worst = worst.max(runs[0].max_difference(r).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-8, || format!("equal jets differ by {worst:e}"))?;
    Ok(format!(
        "errors {e1:.1e}, {e2:.1e}, {e3:.1e}; observed orders {}; equal-jet grids within {worst:.1e}",
        orders.join(", ")
    ))
}

/// Ten Heisenberg automorphisms fixing the origin.
fn jet_injectivity() -> Outcome {
    let m = models::heisenberg(2, 8).unwrap();
    let family = heisenberg_family(&m, 8).map_err(|e| e.to_string())?;
    ensure(family.len() == 10, || format!("family has {} members", family.len()))?;
    let report = jet_injectivity_demo(&family, 2, 8, Exec::default()).map_err(|e| e.to_string())?;
    ensure(report.passed(), || format!("{:?}", report.violations))?;
    for p in &report.pairs {
        ensure(p.params_equal == p.jets_equal, || format!("pair ({}, {})", p.first, p.second))?;
        ensure(!p.jets_equal || p.maps_equal, || format!("pair ({}, {}): equal jets, different maps", p.first, p.second))?;
    }
    let equal = report.pairs.iter().filter(|p| p.jets_equal).count();
    Ok(format!("{} pairs: distinct parameters give distinct 2-jets, {equal} equal pairs agree through order 8", report.pairs.len()))
}

/// The bound, Heisenberg dimension 8, and growth for a degenerate model.
fn aut_dimensions() -> Outcome {
    let b2 = aut_bound(2).map_err(|e| e.to_string())?;
    let b3 = aut_bound(3).map_err(|e| e.to_string())?;
    ensure(b2 == BigInt::from(30) && b3 == BigInt::from(630), || format!("bounds {b2}, {b3}"))?;
    let r = cli(&["aut", &input("heisenberg2.crj"), "--degree", "2", "--order", "8"])?;
    expect(&r, "solution_dim", 8.into(), "Heisenberg")?;
    expect(&r, "bound", "30".into(), "Heisenberg")?;
    expect(&r, "within_bound", true.into(), "Heisenberg")?;
    ensure(r["passed"] == true, || "Heisenberg aut report failed".into())?;
    let mut dims = Vec::new();
    for d in ["1", "2", "3"] {
        let r = cli(&["aut", &input("levi_degenerate.crj"), "--degree", d, "--order", "8"])?;
        ensure(r["passed"] == true, || format!("degenerate d = {d}: residual re-check failed"))?;
        dims.push(r["result"]["solution_dim"].as_u64().unwrap_or(0));
    }
    ensure(dims.windows(2).all(|w| w[0] < w[1]), || format!("degenerate dims {dims:?}"))?;
    Ok(format!("bounds 30, 630; Heisenberg dim 8 ≤ 30; degenerate model dims {dims:?}"))
}

fn report_commands() -> Vec<Vec<String>> {
    let h2 = input("heisenberg2.crj");
    let mut cmds: Vec<Vec<&str>> = vec![
        vec!["analyze", &h2, "--scan", "z=0,1/2;s=0,1/3"],
        vec!["aut", &h2, "--degree", "2"],
        vec!["reflect", &h2, &h2, "ISO"],
        vec!["reconstruct", "PLANAR", "PLANAR_JET", "--points", "4", "--taylor", "3"],
    ];
    let iso = input("isotropy.crj");
    let planar = input("planar_exponential.crj");
    let planar_jet = input("planar_exponential_jet.crj");
    for c in &mut cmds {
        for a in c.iter_mut() {
            *a = match *a {
                "ISO" => &iso,
                "PLANAR" => &planar,
                "PLANAR_JET" => &planar_jet,
                other => other,
            };
        }
    }
    let mut out: Vec<Vec<String>> = cmds.into_iter().map(|c| c.into_iter().map(String::from).collect()).collect();
    for file in ["heisenberg3.crj", "m3.crj", "m2.crj", "cubic.crj"] {
        out.push(vec!["analyze".into(), input(file)]);
    }
    for id in ["frame", "l1.13", "l1.18", "p1.24", "p3.18k1"] {
        out.push(vec!["verify".into(), h2.clone(), "--identity".into(), id.into()]);
    }
    out.push(vec!["verify".into(), input("m3.crj"), "--identity".into(), "p1.24".into()]);
    out.push(vec!["aut".into(), input("m3.crj"), "--degree".into(), "1".into()]);
    out
}

/// Byte-identical reports across runs and thread counts.
fn determinism() -> Outcome {
    let cmds = report_commands();
    let render = |c: &Vec<String>, json: bool| {
        let mut args = vec!["crjet".to_string()];
        args.extend(c.iter().cloned());
        if json {
            args.push("--json".into());
        }
        crjet::run(args)
    };
    let mut compared = 0;
    for c in &cmds {
        for json in [false, true] {
            let base = render(c, json);
            ensure(base.code != crjet::EXIT_ERROR, || format!("{c:?}: {}", base.stderr))?;
            ensure(render(c, json) == base, || format!("{c:?}: second run differs"))?;
            for threads in [1, 4] {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
                let out = pool.install(|| render(c, json));
                ensure(out == base, || format!("{c:?}: differs with {threads} threads"))?;
            }
            compared += 1;
        }
    }
    // documents of random models render the same way every time
    let m = models::random(42, 3, 6).unwrap();
    ensure(graph_document(m.phi(), 3) == graph_document(m.phi(), 3), || "document rendering differs".into())?;
    Ok(format!("{compared} reports identical over two runs and 1, 4 and default threads"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Heisenberg invariants", heisenberg_invariants),
        ("M3 invariants", m3_invariants),
        ("M2 invariants", m2_invariants),
        ("identity suites", identity_suites),
        ("reflection suite", reflection_suite),
        ("commutator certificates", certificates),
        ("integrator", integrator),
        ("jet injectivity", jet_injectivity),
        ("automorphism dimensions", aut_dimensions),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
