//! Shared generators and independent oracles for the integration suites.
//!
//! Everything here is deliberately decoupled from the crate's own numerics:
//! densities are scalar closed forms, the total-variation oracle is adaptive
//! quadrature, and expected distances come from per-coordinate formulas.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use wdp_lti_core::lti::LtiSystem;
use wdp_lti_core::Gaussian;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// SPD matrix with eigenvalues drawn uniformly from `eig_range`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, eig_range: (f64, f64)) -> DMatrix<f64> {
    let v = random_orthogonal(rng, n);
    let eigs = DVector::from_fn(n, |_, _| rng.random_range(eig_range.0..eig_range.1));
    let m = &v * DMatrix::from_diagonal(&eigs) * v.transpose();
    (&m + m.transpose()) * 0.5
}

/// Gaussian with a random SPD covariance and mean entries in `mean_range`.
pub fn random_gaussian(
    rng: &mut ChaCha8Rng,
    n: usize,
    eig_range: (f64, f64),
    mean_range: (f64, f64),
) -> Gaussian {
    let mean = DVector::from_fn(n, |_, _| rng.random_range(mean_range.0..mean_range.1));
    let cov = random_spd(rng, n, eig_range);
    Gaussian::new(mean, cov).expect("generated covariance is SPD")
}

/// Random state-space system with the given dimensions, entries in (-1, 1).
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, q: usize) -> LtiSystem {
    let mut mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    LtiSystem::new(mat(n, n), mat(n, m), mat(q, n), mat(q, m)).expect("consistent dimensions")
}

/// Closed-form scalar 2-Wasserstein distance.
pub fn scalar_w2(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    ((m1 - m2).powi(2) + (v1.sqrt() - v2.sqrt()).powi(2)).sqrt()
}

/// Closed-form scalar KL divergence `KL(N(m1,v1) || N(m2,v2))`.
pub fn scalar_kl(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    0.5 * ((m1 - m2).powi(2) / v2 + v1 / v2 - 1.0 + (v2 / v1).ln())
}

/// Per-coordinate 2-Wasserstein oracle for Gaussians with diagonal
/// covariances: `W2^2 = sum_i (dm_i^2 + (s1_i - s2_i)^2)`.
pub fn diagonal_w2(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    m1.iter()
        .zip(m2)
        .zip(v1.iter().zip(v2))
        .map(|((a, b), (va, vb))| (a - b).powi(2) + (va.sqrt() - vb.sqrt()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Analytic total variation for equal-variance scalar Gaussians:
/// `2 Phi(|dm| / (2 sigma)) - 1`.
pub fn tv_equal_variance(dm: f64, sigma: f64) -> f64 {
    2.0 * normal_cdf(dm.abs() / (2.0 * sigma)) - 1.0
}

fn scalar_density(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
}

/// Quadrature oracle for the total variation between scalar Gaussians:
/// `0.5 * integral |p - q|`.
pub fn tv_quadrature(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let spread = v1.max(v2).sqrt();
    let lo = (m1.min(m2)) - 12.0 * spread;
    let hi = (m1.max(m2)) + 12.0 * spread;
    let f = |x: f64| (scalar_density(x, m1, v1) - scalar_density(x, m2, v2)).abs();
    let fa = f(lo);
    let fb = f(hi);
    let fm = f(0.5 * (lo + hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    0.5 * adaptive_simpson(&f, lo, hi, fa, fm, fb, whole, 1e-12, 40)
}
