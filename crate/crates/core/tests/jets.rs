use std::collections::BTreeMap;

use crjet_core::jets::{
    heisenberg_family, integrate, jet_injectivity_demo, observed_order, reduce_to_first_order, taylor_propagate,
    CompleteSystem, Grid, IntegrationOptions, JetVector,
};
use crjet_core::scalar::{rat, CScalar};
use crjet_core::{models, Exec, MultiIndex, Order, TruncatedSeries};

fn system(q: usize, m: usize, k: u32, entries: Vec<(Vec<u32>, TruncatedSeries)>) -> CompleteSystem {
    let map: BTreeMap<_, _> = entries.into_iter().map(|(a, p)| ((0, MultiIndex::from_slice(&a)), p)).collect();
    CompleteSystem::polynomial(q, m, k, map).unwrap()
}

fn var(nv: usize, j: usize) -> TruncatedSeries {
    TruncatedSeries::var(nv, j, Order::Exact)
}

fn c(r: (i64, i64)) -> CScalar {
    CScalar::real(rat(r.0, r.1))
}

/// `f′ = f`.
fn exponential() -> CompleteSystem {
    system(1, 1, 0, vec![(vec![1], var(2, 1))])
}

/// `∂₁f = f`, `∂₂f = 2f`.
fn planar_exponential() -> CompleteSystem {
    system(2, 1, 0, vec![(vec![1, 0], var(3, 2)), (vec![0, 1], var(3, 2).scale(&c((2, 1))))])
}

#[test]
fn exponential_on_the_unit_interval() {
    let jet = JetVector::from_values(1, 1, 0, vec![rat(1, 1)]).unwrap();
    let grid = Grid::uniform(1, 0.0, 1.0, 11).unwrap();
    let res = integrate(&exponential(), &jet, &grid, &IntegrationOptions::with_step(1, 1e-4)).unwrap();
    let err = res.max_deviation(|x| vec![x[0].exp()]);
    assert!(err <= 1e-9, "{err}");
}

#[test]
fn straight_line_on_the_unit_interval() {
    let s = system(1, 1, 1, vec![(vec![2], TruncatedSeries::zero(3, Order::Exact))]);
    let jet = JetVector::from_values(1, 1, 1, vec![rat(-3, 4), rat(5, 2)]).unwrap();
    let grid = Grid::uniform(1, 0.0, 1.0, 11).unwrap();
    let res = integrate(&s, &jet, &grid, &IntegrationOptions::with_step(1, 1e-4)).unwrap();
    assert!(res.max_deviation(|x| vec![-0.75 + 2.5 * x[0]]) <= 1e-8);
}

#[test]
fn planar_exponential_on_the_unit_square() {
    let jet = JetVector::from_values(2, 1, 0, vec![rat(3, 2)]).unwrap();
    let grid = Grid::uniform(2, 0.0, 1.0, 6).unwrap();
    let res = integrate(&planar_exponential(), &jet, &grid, &IntegrationOptions::with_step(2, 1e-4)).unwrap();
    let err = res.max_deviation(|x| vec![1.5 * (x[0] + 2.0 * x[1]).exp()]);
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn fourth_order_convergence() {
    let jet = JetVector::from_values(1, 1, 0, vec![rat(1, 1)]).unwrap();
    let grid = Grid::new(vec![vec![1.0]]).unwrap();
    let error = |h: f64| {
        let r = integrate(&exponential(), &jet, &grid, &IntegrationOptions::with_step(1, h)).unwrap();
        r.max_deviation(|x| vec![x[0].exp()])
    };
    for h in [0.1, 0.05] {
        let p = observed_order(error(h), error(h / 2.0));
        assert!((p - 4.0).abs() <= 0.2, "h = {h}: order {p}");
    }
}

#[test]
fn equal_jets_give_equal_grids_in_every_sweep_order() {
    // jets of 3/2·e^{x₁+2x₂} from the closed form and from a product of Taylor series
    let closed = JetVector::from_values(2, 1, 0, vec![rat(3, 2)]).unwrap();
    let ex = TruncatedSeries::from_terms(2, Order::Finite(3), (0..=3u32).map(|d| {
        (MultiIndex::from_slice(&[d, 0]), c((1, [1, 1, 2, 6][d as usize])))
    }));
    let ey = TruncatedSeries::from_terms(2, Order::Finite(3), (0..=3u32).map(|d| {
        (MultiIndex::from_slice(&[0, d]), c((2i64.pow(d), [1, 1, 2, 6][d as usize])))
    }));
    let product = ex.try_mul(&ey).unwrap().scale(&c((3, 2)));
    let from_series = JetVector::from_series(&[product], 0).unwrap();
    assert_eq!(closed, from_series);

    let s = planar_exponential();
    let grid = Grid::uniform(2, -0.5, 0.5, 5).unwrap();
    let mut runs = Vec::new();
    for jet in [&closed, &from_series] {
        for order in [vec![0, 1], vec![1, 0]] {
            let opts = IntegrationOptions { step: 1e-4, axis_order: order };
            runs.push(integrate(&s, jet, &grid, &opts).unwrap());
        }
    }
    for r in &runs[1..] {
        assert!(runs[0].max_difference(r).unwrap() <= 1e-8);
    }
    let again = integrate(&s, &closed, &grid, &IntegrationOptions::with_step(2, 1e-4)).unwrap();
    assert_eq!(again, runs[0]);
}

/// `P = 1 + x₁ − 2x₂ + 3x₁² + x₁x₂ − x₂²/2` solves a first-order-in-jets system
/// whose right-hand sides depend on the unknowns; variables are
/// `(x₁, x₂, f, ∂₂f, ∂₁f)`.
fn manufactured() -> (CompleteSystem, TruncatedSeries) {
    let nv = 5;
    let x1 = var(nv, 0);
    let x2 = var(nv, 1);
    let one = TruncatedSeries::one(nv, Order::Exact);
    let p = &(&(&(&one + &x1) - &x2.scale(&c((2, 1)))) + &(&x1 * &x1).scale(&c((3, 1))))
        + &(&(&x1 * &x2) - &(&x2 * &x2).scale(&c((1, 2))));
    let p1 = &(&(&one + &x1.scale(&c((6, 1)))) + &x2);
    let p2 = &(&(&x1 - &x2) - &one.scale(&c((2, 1))));
    let f = var(nv, 2);
    let f2 = var(nv, 3);
    let f1 = var(nv, 4);
    let r20 = &one.scale(&c((6, 1))) + &(&f1 - p1);
    let r11 = &one + &(&(&f - &p) * &x2);
    let r02 = &(&f2 - p2) - &one;
    let s = system(2, 1, 1, vec![(vec![2, 0], r20), (vec![1, 1], r11), (vec![0, 2], r02)]);
    let oracle = TruncatedSeries::from_terms(
        2,
        Order::Exact,
        p.terms().map(|(m, v)| (MultiIndex::from_slice(&m.to_vec()[..2]), v.clone())),
    );
    (s, oracle)
}

#[test]
fn manufactured_polynomial_is_reproduced() {
    let (s, p) = manufactured();
    let jet = JetVector::from_series(&[p.clone()], 1).unwrap();

    let prop = taylor_propagate(&s, &jet, 5).unwrap();
    assert_eq!(prop.jet, JetVector::from_series(&[p.clone()], 5).unwrap());
    assert!(prop.consistency_checks > 0);

    let grid = Grid::uniform(2, 0.0, 1.0, 5).unwrap();
    let res = integrate(&s, &jet, &grid, &IntegrationOptions::with_step(2, 1e-3)).unwrap();
    let eval = |x: &[f64]| vec![p.eval_f64(x).0];
    assert!(res.max_deviation(eval) <= 1e-8);
    // the reduced unknowns are the first derivatives of the solution
    let d1 = p.derive(0).unwrap();
    let d2 = p.derive(1).unwrap();
    for pt in 0..grid.len() {
        let x = grid.point(pt);
        let g1 = res.derivative(pt, 0, &MultiIndex::from_slice(&[1, 0])).unwrap();
        let g2 = res.derivative(pt, 0, &MultiIndex::from_slice(&[0, 1])).unwrap();
        assert!((g1 - d1.eval_f64(&x).0).abs() <= 1e-8);
        assert!((g2 - d2.eval_f64(&x).0).abs() <= 1e-8);
    }
    let reduced = reduce_to_first_order(&s).unwrap();
    assert_eq!((reduced.m(), reduced.k()), (3, 0));
}

#[test]
fn exponential_jets_propagate_to_ones() {
    let jet = JetVector::from_values(1, 1, 0, vec![rat(1, 1)]).unwrap();
    let p = taylor_propagate(&exponential(), &jet, 9).unwrap();
    assert!(p.jet.values().iter().all(|v| *v == rat(1, 1)));
    let jet2 = JetVector::from_values(2, 1, 0, vec![rat(1, 1)]).unwrap();
    let p2 = taylor_propagate(&planar_exponential(), &jet2, 4).unwrap();
    for (idx, v) in p2.jet.values().iter().enumerate() {
        let (_, b) = p2.jet.layout().entry(idx);
        assert_eq!(*v, rat(2i64.pow(b.get(1)), 1));
    }
}

#[test]
fn taylor_and_integration_agree_within_the_remainder() {
    let jet = JetVector::from_values(1, 1, 0, vec![rat(1, 1)]).unwrap();
    let order = 12;
    let poly = taylor_propagate(&exponential(), &jet, order).unwrap().jet.to_series();
    let grid = Grid::uniform(1, 0.0, 0.5, 6).unwrap();
    let res = integrate(&exponential(), &jet, &grid, &IntegrationOptions::with_step(1, 1e-3)).unwrap();
    let fact: f64 = (1..=order + 1).map(f64::from).product();
    for p in 0..grid.len() {
        let x = grid.point(p);
        let bound = x[0].exp() * x[0].powi(order as i32 + 1) / fact;
        let diff = (res.values(p)[0] - poly[0].eval_f64(&x).0).abs();
        assert!(diff <= bound + 1e-12, "x = {x:?}: {diff} > {bound}");
    }
}

#[test]
fn heisenberg_automorphisms_are_determined_by_two_jets() {
    let m = models::heisenberg(2, 8).unwrap();
    let family = heisenberg_family(&m, 8).unwrap();
    assert_eq!(family.len(), 10);
    let report = jet_injectivity_demo(&family, 2, 8, Exec::Sequential).unwrap();
    assert!(report.passed(), "{:?}", report.violations);
    assert_eq!(report.pairs.len(), 45);
    let equal: Vec<(usize, usize)> =
        report.pairs.iter().filter(|p| p.jets_equal).map(|p| (p.first, p.second)).collect();
    assert_eq!(equal, vec![(0, 1), (6, 7)]);
    assert!(report.pairs.iter().all(|p| p.params_equal == p.jets_equal));

    // first-order jets do not separate the isotropy parameter r
    let coarse = jet_injectivity_demo(&family, 1, 8, Exec::Parallel).unwrap();
    assert!(coarse.violations.iter().any(|v| v.contains("isotropy a, r = 1")));
}
