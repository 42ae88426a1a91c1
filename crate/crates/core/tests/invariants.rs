use crjet_core::hypersurface::{build_frame, exterior_derivative};
use crjet_core::invariants::{
    analyze, commutator_certificate, extrinsic_k0, h_tensor, intrinsic_filtration, nondegeneracy_scan,
    scan_grid, verify_chain_recursion, verify_commutator_tensor_relation, verify_frame,
    verify_leading_tensor_derivatives, Bounded, FiltrationOptions, Slot,
};
use crjet_core::scalar::{rat, CScalar};
use crjet_core::{models, Exec};

#[test]
fn m3_is_two_nondegenerate_by_both_routes() {
    let m = models::m3(8).unwrap();
    let a = analyze(&m, FiltrationOptions::defaults(3)).unwrap();
    assert_eq!(a.filtration.ek_dims, vec![1, 2, 3]);
    assert_eq!(a.filtration.fk_dims, vec![2, 1, 0]);
    assert_eq!(a.filtration.k0, Bounded::Finite(2));
    assert_eq!(a.extrinsic.k0, Bounded::Finite(2));
    assert_eq!(a.filtration.levi_rank, 1);
    assert!(a.filtration.m0.finite().unwrap() <= 3);
    assert!(a.filtration.consistency_violations(3).is_empty());
}

#[test]
fn cubic_has_ell0_two() {
    let m = models::cubic(8).unwrap();
    let a = analyze(&m, FiltrationOptions::with_kmax(2)).unwrap();
    assert_eq!(a.filtration.k0, Bounded::Finite(2));
    assert_eq!(a.extrinsic.k0, Bounded::Finite(2));
    assert_eq!(a.filtration.ell0, Bounded::Finite(2));
    assert_eq!(a.filtration.ell1, Bounded::Finite(2));
    assert_eq!(a.filtration.levi_rank, 0);
    let f = build_frame(&m).unwrap();
    let lead = verify_leading_tensor_derivatives(&f, 3, Exec::Sequential).unwrap();
    assert!(!lead.vacuous && lead.passed(), "{:?}", lead.violations);
    let rel = verify_commutator_tensor_relation(&f, 3, Exec::Sequential).unwrap();
    assert!(rel.passed(), "{:?}", rel.violations);
}

#[test]
fn m2_levi_entry_vanishes_and_scan_separates_points() {
    let m = models::m2(8).unwrap();
    let f = build_frame(&m).unwrap();
    let h = h_tensor(&f, 1).unwrap();
    assert!(h.get(&[0], Slot::D(0)).unwrap().constant_term().is_zero());
    let lead = verify_leading_tensor_derivatives(&f, 3, Exec::Sequential).unwrap();
    assert!(lead.vacuous);

    let zs: Vec<CScalar> = [rat(1, 2), rat(-1, 2), rat(1, 4), rat(-1, 4), rat(0, 1)]
        .into_iter()
        .map(CScalar::real)
        .collect();
    let ss = [rat(0, 1), rat(1, 2), rat(-1, 2)];
    let samples = scan_grid(1, &zs, &ss);
    let report = nondegeneracy_scan(&m, &samples, 1, Exec::Sequential).unwrap();
    for p in &report.points {
        assert_eq!(p.k0 == Bounded::Finite(1), !p.z[0].is_zero(), "at {:?}", p.z);
    }
    assert_eq!(report.nondegenerate_count(), 12);
}

#[test]
fn heisenberg_scan_is_everywhere_levi_nondegenerate() {
    let m = models::heisenberg(3, 6).unwrap();
    let zs = [CScalar::zero(), CScalar::from_ratios((1, 2), (1, 3))];
    let report = nondegeneracy_scan(&m, &scan_grid(2, &zs, &[rat(1, 3)]), 1, Exec::Sequential).unwrap();
    assert!(report.points.iter().all(|p| p.k0 == Bounded::Finite(1)));
}

#[test]
fn identity_suites_on_random_hypersurfaces() {
    for seed in 0..20u64 {
        for big_n in [2usize, 3] {
            let m = models::random(seed, big_n, 6).unwrap();
            let f = build_frame(&m).unwrap();
            let frame = verify_frame(&f).unwrap();
            assert!(frame.passed(), "seed {seed}: {:?}", frame.violations);
            for k in 0..=2 {
                let r = verify_chain_recursion(&f, k, Exec::Sequential).unwrap();
                assert!(r.passed(), "seed {seed} N={big_n} k={k}: {:?}", r.violations);
            }
            let lmax = 3;
            let lead = verify_leading_tensor_derivatives(&f, lmax, Exec::Sequential).unwrap();
            assert!(lead.passed(), "seed {seed} N={big_n}: {:?}", lead.violations);
            let rel = verify_commutator_tensor_relation(&f, lmax, Exec::Sequential).unwrap();
            assert!(rel.passed(), "seed {seed} N={big_n}: {:?}", rel.violations);
        }
    }
}

#[test]
fn intrinsic_and_extrinsic_k0_agree_on_random_hypersurfaces() {
    for seed in 0..12u64 {
        for big_n in [2usize, 3] {
            let kmax = big_n as u32;
            let m = models::random(seed, big_n, 2 * (kmax + 2)).unwrap();
            let f = build_frame(&m).unwrap();
            let r = intrinsic_filtration(&f, FiltrationOptions::with_kmax(kmax)).unwrap();
            let e = extrinsic_k0(&m, kmax).unwrap();
            assert_eq!(r.k0, e.k0, "seed {seed} N={big_n}");
            assert!(r.consistency_violations(big_n).is_empty(), "seed {seed}: {:?}", r.consistency_violations(big_n));
        }
    }
}

#[test]
fn tensors_are_symmetric_on_the_previous_kernel() {
    for seed in 0..10u64 {
        let m = models::random(seed, 3, 8).unwrap();
        let f = build_frame(&m).unwrap();
        let r = intrinsic_filtration(&f, FiltrationOptions::with_kmax(3)).unwrap();
        for k in 2..=3usize {
            let h = h_tensor(&f, k).unwrap();
            let v = h.symmetry_violations(&r.fk_bases[k - 1]);
            assert!(v.is_empty(), "seed {seed} k={k}: {v:?}");
        }
    }
}

#[test]
fn scaling_theta_scales_directional_entries_only() {
    let m = models::m3(8).unwrap();
    let f = build_frame(&m).unwrap();
    let c = rat(3, 1);
    let g = f.with_scaled_theta(&c).unwrap();
    let hf = h_tensor(&f, 2).unwrap();
    let hg = h_tensor(&g, 2).unwrap();
    for ((tuple, slot), v) in &hf.entries {
        let w = hg.get(tuple, *slot).unwrap();
        let expected = match slot {
            Slot::D(_) => v.scale_rational(&c),
            Slot::T => v.clone(),
        };
        assert_eq!(w.try_sub(&expected).unwrap().is_zero(), true, "{tuple:?} {slot:?}");
    }
    let a = intrinsic_filtration(&f, FiltrationOptions::defaults(3)).unwrap();
    let b = intrinsic_filtration(&g, FiltrationOptions::defaults(3)).unwrap();
    assert_eq!(a.ek_dims, b.ek_dims);
    assert_eq!((a.k0, a.ell0, a.ell1, a.m0), (b.k0, b.ell0, b.ell1, b.m0));
}

#[test]
fn levi_entry_matches_exterior_derivative_on_random_hypersurfaces() {
    for seed in 0..5u64 {
        let m = models::random(seed, 3, 6).unwrap();
        let f = build_frame(&m).unwrap();
        let h = h_tensor(&f, 1).unwrap();
        let dtheta = exterior_derivative(f.theta());
        for a in 0..2 {
            for d in 0..2 {
                let oracle = dtheta.eval(&f.lbar()[a], &f.l()[d]).unwrap();
                let got = h.get(&[a], Slot::D(d)).unwrap();
                assert!(got.try_sub(&oracle).unwrap().is_zero());
            }
        }
    }
}

#[test]
fn heisenberg_certificates() {
    let m = models::heisenberg(2, 12).unwrap();
    let f = build_frame(&m).unwrap();
    for m_len in 2..=3 {
        let cert = commutator_certificate(&f, &vec![0; m_len], 5, Exec::Sequential).unwrap();
        assert!(cert.passed(), "{:?}", cert.violations());
        let (_, want, got) = &cert.expansion.top[0];
        assert_eq!(got, want);
        assert_eq!(
            got.constant_term(),
            CScalar::from_ratios((0, 1), (-2 * m_len as i64, 1))
        );
    }
    let m3 = models::heisenberg(3, 12).unwrap();
    let f3 = build_frame(&m3).unwrap();
    let cert = commutator_certificate(&f3, &[0, 1], 4, Exec::Sequential).unwrap();
    assert!(cert.passed(), "{:?}", cert.violations());
    assert_eq!(cert.weighted.len(), 2);
}

#[test]
fn certificates_on_a_curved_levi_nondegenerate_model() {
    // random graphs have nonconstant Levi entries, so lower-order terms appear
    let mut found = false;
    for seed in 0..40u64 {
        let m = models::random(seed, 2, 10).unwrap();
        let f = build_frame(&m).unwrap();
        let h = h_tensor(&f, 1).unwrap();
        if h.get(&[0], Slot::D(0)).unwrap().constant_term().is_zero() {
            continue;
        }
        let cert = commutator_certificate(&f, &[0, 0], 3, Exec::Sequential).unwrap();
        assert!(cert.passed(), "seed {seed}: {:?}", cert.violations());
        found = true;
        break;
    }
    assert!(found);
}
