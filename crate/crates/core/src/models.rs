//! Standard test hypersurfaces and a seeded generator of random polynomial ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hypersurface::{ambient_var, Hypersurface};
use crate::multiindex::MultiIndex;
use crate::scalar::{rat, CScalar};
use crate::series::{Order, Pairing, TruncatedSeries};

/// Intrinsic variable `(z₁…zₙ, z̄₁…z̄ₙ, s)[idx]` as an exact polynomial.
pub fn iv(n: usize, idx: usize) -> TruncatedSeries {
    TruncatedSeries::var(2 * n + 1, idx, Order::Exact)
}

fn z(n: usize, j: usize) -> TruncatedSeries {
    iv(n, j)
}

fn zb(n: usize, j: usize) -> TruncatedSeries {
    iv(n, n + j)
}

fn re(a: &TruncatedSeries, n: usize) -> TruncatedSeries {
    let c = a.conjugate(&Pairing::intrinsic(n)).expect("intrinsic layout");
    (a + &c).scale(&CScalar::real(rat(1, 2)))
}

/// `Im w = Σ |z_j|²` in `ℂ^N`.
pub fn heisenberg(big_n: usize, order: u32) -> Result<Hypersurface> {
    let n = big_n - 1;
    let mut phi = TruncatedSeries::zero(2 * n + 1, Order::Exact);
    for j in 0..n {
        phi = &phi + &(&z(n, j) * &zb(n, j));
    }
    Hypersurface::from_graph(&phi, big_n, order)
}

/// `Im w = |z₁|² + Re(z₁² z̄₂)` in `ℂ³`, 2-nondegenerate.
pub fn m3(order: u32) -> Result<Hypersurface> {
    let n = 2;
    let phi = &(&z(n, 0) * &zb(n, 0)) + &re(&(&z(n, 0).pow(2) * &zb(n, 1)), n);
    Hypersurface::from_graph(&phi, 3, order)
}

/// `Im w = |z|⁴` in `ℂ²`: of finite type 4, not finitely nondegenerate.
pub fn m2(order: u32) -> Result<Hypersurface> {
    let phi = (&z(1, 0) * &zb(1, 0)).pow(2);
    Hypersurface::from_graph(&phi, 2, order)
}

/// `Im w = Re(z² z̄)` in `ℂ²`: Levi form vanishes at 0, 2-nondegenerate there.
pub fn cubic(order: u32) -> Result<Hypersurface> {
    let phi = re(&(&z(1, 0).pow(2) * &zb(1, 0)), 1);
    Hypersurface::from_graph(&phi, 2, order)
}

/// `Im w = |z₁|²` in `ℂ³`: holomorphically degenerate (no `z₂` dependence).
pub fn levi_degenerate(order: u32) -> Result<Hypersurface> {
    let n = 2;
    let phi = &z(n, 0) * &zb(n, 0);
    Hypersurface::from_graph(&phi, 3, order)
}

/// `(Im w)(1 + Re w) − |z|² = 0` in `ℂ²`; its graph function is not a polynomial.
pub fn newton_example(order: u32) -> Result<Hypersurface> {
    let big_n = 2;
    let w = ambient_var(big_n, 1, Order::Exact);
    let wb = ambient_var(big_n, 3, Order::Exact);
    let zz = &ambient_var(big_n, 0, Order::Exact) * &ambient_var(big_n, 2, Order::Exact);
    let im_w = (&w - &wb).scale(&CScalar::from_ratios((0, 1), (-1, 2)));
    let re_w = (&w + &wb).scale(&CScalar::real(rat(1, 2)));
    let one = TruncatedSeries::one(4, Order::Exact);
    let rho = &(&im_w * &(&one + &re_w)) - &zz;
    Hypersurface::from_defining(&rho, big_n, order)
}

/// Seeded random real polynomial graph function `φ` of degree 2–4 in `ℂ^N`.
///
/// `φ = P + conj(P)` for a sparse `P` with small rational coefficients and
/// no constant or linear part. Roughly a third of the draws omit quadratic
/// terms and some include `s`.
pub fn random_phi(seed: u64, big_n: usize) -> TruncatedSeries {
    let n = big_n - 1;
    let nv = 2 * n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skip_quadratic = rng.random_range(0..3) == 0;
    let nterms = rng.random_range(2..=4);
    let mut terms = Vec::new();
    while terms.len() < nterms {
        let degree = rng.random_range(2..=4u32);
        if skip_quadratic && degree == 2 {
            continue;
        }
        let mut exps = vec![0u32; nv];
        for _ in 0..degree {
            let idx = if rng.random_range(0..6) == 0 { 2 * n } else { rng.random_range(0..2 * n) };
            exps[idx] += 1;
        }
        let num_re = rng.random_range(-3..=3i64);
        let num_im = rng.random_range(-3..=3i64);
        let den = rng.random_range(1..=3i64);
        let c = CScalar::from_ratios((num_re, den), (num_im, den));
        if c.is_zero() {
            continue;
        }
        terms.push((MultiIndex::from_slice(&exps), c));
    }
    let p = TruncatedSeries::from_terms(nv, Order::Exact, terms);
    let pc = p.conjugate(&Pairing::intrinsic(n)).expect("intrinsic layout");
    &p + &pc
}

pub fn random(seed: u64, big_n: usize, order: u32) -> Result<Hypersurface> {
    Hypersurface::from_graph(&random_phi(seed, big_n), big_n, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_are_real_graphs() {
        for seed in 0..10 {
            for big_n in [2, 3] {
                let phi = random_phi(seed, big_n);
                assert!(phi.is_real(&Pairing::intrinsic(big_n - 1)));
                assert!(phi.valuation().unwrap_or(2) >= 2);
                let m = random(seed, big_n, 5).unwrap();
                assert_eq!(m.phi(), &phi);
            }
        }
        assert_eq!(random_phi(7, 3), random_phi(7, 3));
    }
}
