//! Seeded Gaussian sampling, log-densities, Monte Carlo total-variation
//! estimation, and empirical verification of a calibrated (0, delta)
//! guarantee.
//!
//! Sampling is deterministic in `(distribution, n, seed)` regardless of how
//! many threads execute it: the sample budget is split into fixed chunks of
//! `2^16` draws, each chunk gets its own ChaCha stream keyed by hashing the
//! root seed with the chunk index, and chunk results are merged either in
//! index order (sample lists) or by a commutative sum (acceptance counts).
//! `WDP_LTI_THREADS` caps the worker count (0 or unset = automatic).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::calibrate::{NoiseSpec, PrivacySpec};
use crate::error::{Error, Result};
use crate::lti::{pushforward, StackedMaps};
use crate::matgauss::{symmetrized_kl, Gaussian};

/// Draws per deterministic chunk.
pub const CHUNK_SIZE: usize = 1 << 16;

const STREAM_PRIMARY: u64 = 0;
const STREAM_SECONDARY: u64 = 1;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a root seed and a stream tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut state = seed ^ tag.wrapping_mul(0xA076_1D64_78BD_642F);
    splitmix64(&mut state)
}

fn chunk_rng(seed: u64, stream: u64, chunk: u64) -> ChaCha8Rng {
    let mut state = derive_seed(derive_seed(seed, stream), chunk);
    let mut key = [0u8; 32];
    for word in key.chunks_exact_mut(8) {
        word.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn thread_cap() -> Option<usize> {
    std::env::var("WDP_LTI_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Map chunk indices through `f`, possibly in parallel; the returned vector
/// is always in chunk-index order.
fn run_chunks<T, F>(n_chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match thread_cap() {
        Some(1) => (0..n_chunks).map(f).collect(),
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map(|pool| pool.install(|| (0..n_chunks).into_par_iter().map(&f).collect()))
            .unwrap_or_else(|_| (0..n_chunks).map(&f).collect()),
        None => (0..n_chunks).into_par_iter().map(&f).collect(),
    }
}

/// Any factor `L` with `L L^T = cov`, from the symmetric eigendecomposition
/// with round-off clipping; works for singular covariances.
fn cov_factor(p: &Gaussian) -> DMatrix<f64> {
    let n = p.dim();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = p.cov().clone().symmetric_eigen();
    let scales = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&scales)
}

fn draw(mean: &DVector<f64>, factor: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    mean + factor * z
}

/// `n` independent draws from `p`, bit-identical for identical
/// `(p, n, seed)` across runs and thread counts.
pub fn sample(p: &Gaussian, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let factor = cov_factor(p);
    let n_chunks = n.div_ceil(CHUNK_SIZE);
    let chunks = run_chunks(n_chunks, |ci| {
        let count = CHUNK_SIZE.min(n - ci * CHUNK_SIZE);
        let mut rng = chunk_rng(seed, STREAM_PRIMARY, ci as u64);
        (0..count)
            .map(|_| draw(p.mean(), &factor, &mut rng))
            .collect::<Vec<_>>()
    });
    chunks.into_iter().flatten().collect()
}

/// Cached whitening transform for repeated density evaluation.
pub struct DensityEvaluator {
    mean: DVector<f64>,
    /// `diag(1/sqrt(lambda)) V^T`, so `|white (x - mean)|^2` is the
    /// Mahalanobis distance.
    white: DMatrix<f64>,
    log_norm: f64,
}

impl DensityEvaluator {
    pub fn new(p: &Gaussian) -> Result<Self> {
        p.require_positive_definite()?;
        let n = p.dim();
        let eig = p.cov().clone().symmetric_eigen();
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        let white = DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        let log_det: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        Ok(Self {
            mean: p.mean().clone(),
            white,
            log_norm: -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * (&self.white * (x - &self.mean)).norm_squared()
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.mean.len() {
            return Err(Error::dim("density argument", self.mean.len(), x.len()));
        }
        Ok(self.eval(x))
    }
}

/// Log of the multivariate normal density of `p` at `x`.
pub fn log_density(p: &Gaussian, x: &DVector<f64>) -> Result<f64> {
    DensityEvaluator::new(p)?.log_density(x)
}

/// Monte Carlo total-variation estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    /// `P(A) - Q(A)` over the acceptance region `A = {log p > log q}`; may
    /// be slightly negative from sampling noise.
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Estimate `TV(P, Q)` from `n` draws of each distribution using the
/// likelihood-ratio acceptance region `A = {x : log p(x) > log q(x)}`, for
/// which `TV = P(A) - Q(A)` exactly.
pub fn tv_monte_carlo(p: &Gaussian, q: &Gaussian, n: usize, seed: u64) -> Result<TvEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::dim("Gaussian pair", p.dim(), q.dim()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    let dens_p = DensityEvaluator::new(p)?;
    let dens_q = DensityEvaluator::new(q)?;
    let factor_p = cov_factor(p);
    let factor_q = cov_factor(q);

    let n_chunks = n.div_ceil(CHUNK_SIZE);
    let counts = run_chunks(n_chunks, |ci| {
        let count = CHUNK_SIZE.min(n - ci * CHUNK_SIZE);
        let mut rng_p = chunk_rng(seed, STREAM_PRIMARY, ci as u64);
        let mut rng_q = chunk_rng(seed, STREAM_SECONDARY, ci as u64);
        let mut hits_p = 0u64;
        let mut hits_q = 0u64;
        for _ in 0..count {
            let x = draw(p.mean(), &factor_p, &mut rng_p);
            if dens_p.eval(&x) > dens_q.eval(&x) {
                hits_p += 1;
            }
            let y = draw(q.mean(), &factor_q, &mut rng_q);
            if dens_p.eval(&y) > dens_q.eval(&y) {
                hits_q += 1;
            }
        }
        (hits_p, hits_q)
    });
    let (hits_p, hits_q) = counts
        .into_iter()
        .fold((0u64, 0u64), |(a, b), (x, y)| (a + x, b + y));

    let nf = n as f64;
    let p_hat = hits_p as f64 / nf;
    let q_hat = hits_q as f64 / nf;
    let std_error = (p_hat * (1.0 - p_hat) / nf + q_hat * (1.0 - q_hat) / nf).sqrt();
    Ok(TvEstimate {
        value: p_hat - q_hat,
        std_error,
        n_samples: n as u64,
        seed,
    })
}

/// Outcome of an empirical (0, delta) verification run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyReport {
    pub tv: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
    pub delta: f64,
    pub pass: bool,
    /// `0.5 sqrt(sym KL)` between the two output distributions; the analytic
    /// bound the Monte Carlo estimate must respect.
    pub pinsker_bound: f64,
}

/// Push both input pairs through the noisy mechanism and check empirically
/// that the total variation between the output distributions stays within
/// `delta` (plus a 3-standard-error statistical margin).
#[allow(clippy::too_many_arguments)]
pub fn dp_verify(
    maps: &StackedMaps,
    px0: &Gaussian,
    pu: &Gaussian,
    px0_alt: &Gaussian,
    pu_alt: &Gaussian,
    noise: &NoiseSpec,
    privacy: &PrivacySpec,
    n: usize,
    seed: u64,
) -> Result<VerifyReport> {
    privacy.require_zero_epsilon()?;
    if noise.lambda_min() <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    let noise_cov = noise.materialize(maps.output_dim())?;
    let out = pushforward(maps, px0, pu, &noise_cov)?;
    let out_alt = pushforward(maps, px0_alt, pu_alt, &noise_cov)?;
    let tv = tv_monte_carlo(&out, &out_alt, n, seed)?;
    let pinsker_bound = 0.5 * symmetrized_kl(&out, &out_alt)?.max(0.0).sqrt();
    Ok(VerifyReport {
        tv: tv.value,
        std_error: tv.std_error,
        n: tv.n_samples,
        seed,
        delta: privacy.delta(),
        pass: tv.value <= privacy.delta() + 3.0 * tv.std_error,
        pinsker_bound,
    })
}
