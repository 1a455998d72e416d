//! Multivariate Gaussian distributions, SPD matrix utilities, and the
//! closed-form statistical distances between Gaussians.
//!
//! Everything downstream (stacked-output pushforwards, noise calibration,
//! Monte Carlo verification) works with the [`Gaussian`] type defined here.
//! Covariances are kept symmetric positive semidefinite by construction:
//! small asymmetry is symmetrized away, eigenvalues inside a round-off band
//! are clipped to zero, and anything worse is a typed error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_CLIP_REL * lambda_max, 0)` are treated as round-off
/// and clipped to zero; anything below the band is rejected.
pub const PSD_CLIP_REL: f64 = 1e-10;
/// A covariance counts as singular when `lambda_min < SINGULAR_REL_TOL * lambda_max`.
pub const SINGULAR_REL_TOL: f64 = 1e-12;

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Validate symmetry to within [`SYMMETRY_REL_TOL`] (relative to the largest
/// entry) and return the symmetrized matrix.
pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim("symmetric matrix", m.nrows(), m.ncols()));
    }
    let scale = max_abs(m);
    let asymmetry = max_asymmetry(m);
    let tolerance = SYMMETRY_REL_TOL * scale.max(1.0);
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    Ok(symmetrize(m))
}

/// Symmetric positive semidefinite square root via eigendecomposition.
///
/// Eigenvalues inside the round-off band are clipped to zero, so the result
/// satisfies `S * S = M` up to `1e-10` relative Frobenius error for any PSD
/// input, including singular ones.
pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = check_symmetric(m)?;
    if sym.is_empty() {
        return Ok(sym);
    }
    let eig = sym.symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    let band = PSD_CLIP_REL * lambda_max.max(0.0);
    let lambda_min = eig.eigenvalues.min();
    if lambda_min < -band {
        return Err(Error::NotPsd {
            eigenvalue: lambda_min,
            band,
        });
    }
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let s = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    Ok(symmetrize(&s))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let sym = check_symmetric(m)?;
    if sym.is_empty() {
        return Err(Error::InvalidParameter(
            "eig_extremes requires a non-empty matrix".into(),
        ));
    }
    let ev = sym.symmetric_eigenvalues();
    Ok((ev.min(), ev.max()))
}

/// A multivariate Gaussian given by its mean and covariance.
///
/// The covariance is symmetrized on construction and validated to be PSD
/// within the round-off band; degenerate (singular) covariances are allowed,
/// so the Dirac limit of a deterministic value is representable as zero
/// covariance. Instances are immutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Gaussian {
    /// Build a Gaussian, validating dimensions and positive semidefiniteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::dim("covariance matrix", cov.nrows(), cov.ncols()));
        }
        if cov.nrows() != mean.len() {
            return Err(Error::dim("mean vs covariance", cov.nrows(), mean.len()));
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "Gaussian parameters must be finite".into(),
            ));
        }
        let mut cov = check_symmetric(&cov)?;
        if !cov.is_empty() {
            let eig = cov.clone().symmetric_eigen();
            let lambda_max = eig.eigenvalues.max();
            let band = PSD_CLIP_REL * lambda_max.max(0.0);
            let lambda_min = eig.eigenvalues.min();
            if lambda_min < -band {
                return Err(Error::NotPsd {
                    eigenvalue: lambda_min,
                    band,
                });
            }
            if lambda_min < 0.0 {
                let clipped = eig.eigenvalues.map(|l| l.max(0.0));
                cov = symmetrize(
                    &(&eig.eigenvectors
                        * DMatrix::from_diagonal(&clipped)
                        * eig.eigenvectors.transpose()),
                );
            }
        }
        Ok(Self { mean, cov })
    }

    /// Point mass at `mean` (zero covariance).
    pub fn dirac(mean: DVector<f64>) -> Self {
        let n = mean.len();
        Self {
            mean,
            cov: DMatrix::zeros(n, n),
        }
    }

    /// Gaussian with covariance `sigma2 * I`.
    pub fn isotropic(mean: DVector<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "isotropic variance must be finite and nonnegative, got {sigma2}"
            )));
        }
        let n = mean.len();
        Self::new(mean, DMatrix::identity(n, n) * sigma2)
    }

    /// One-dimensional Gaussian.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Smallest and largest covariance eigenvalue.
    pub fn cov_extremes(&self) -> (f64, f64) {
        if self.dim() == 0 {
            return (0.0, 0.0);
        }
        let ev = self.cov.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    /// Strict positive-definiteness check used by the KL-divergence family.
    pub(crate) fn require_positive_definite(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        let (lambda_min, lambda_max) = self.cov_extremes();
        if lambda_min <= 0.0 || lambda_min < SINGULAR_REL_TOL * lambda_max {
            return Err(Error::SingularCovariance {
                lambda_min,
                lambda_max,
            });
        }
        Ok(())
    }
}

/// JSON shape: `{"mean": [..], "cov": [[..]]}` with a row-major covariance.
#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for Gaussian {
    type Error = Error;

    fn try_from(repr: GaussianRepr) -> Result<Self> {
        let cov = matrix_from_rows(&repr.cov)?;
        Gaussian::new(DVector::from_vec(repr.mean), cov)
    }
}

impl From<Gaussian> for GaussianRepr {
    fn from(g: Gaussian) -> Self {
        GaussianRepr {
            mean: g.mean.iter().copied().collect(),
            cov: matrix_to_rows(&g.cov),
        }
    }
}

/// Row-major nested-vector view of a matrix (the JSON encoding).
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Matrix from row-major nested vectors; rejects ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidParameter(
            "matrix rows have unequal lengths".into(),
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn check_same_dim(p: &Gaussian, q: &Gaussian) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::dim("Gaussian pair", p.dim(), q.dim()));
    }
    Ok(())
}

/// 2-Wasserstein distance between Gaussians:
/// `W2^2 = |m1 - m2|^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`.
///
/// Degenerate covariances are supported, so the distance between point
/// masses reduces to the Euclidean distance of the means. The trace term is
/// clipped at zero if rounding pushes it slightly negative.
pub fn w2_distance(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    check_same_dim(p, q)?;
    if p.dim() == 0 {
        return Ok(0.0);
    }
    let mean_sq = (p.mean() - q.mean()).norm_squared();
    let s1 = spd_sqrt(p.cov())?;
    let inner = &s1 * q.cov() * &s1;
    let cross = spd_sqrt(&inner)?;
    let trace_sum = p.cov().trace() + q.cov().trace();
    let mut trace_term = trace_sum - 2.0 * cross.trace();
    // The cancellation above leaves eigensolver round-off of order
    // 1e-15 * trace_sum; below that floor the term is indistinguishable
    // from zero and taking sqrt would amplify the noise.
    if trace_term < 1e-13 * trace_sum {
        trace_term = 0.0;
    }
    Ok((mean_sq + trace_term).sqrt())
}

/// KL divergence `KL(P || Q)` between strictly positive definite Gaussians.
///
/// Log-determinants are accumulated from each covariance's eigenvalues
/// separately, which stays finite for dimensions well beyond what a product
/// of determinants would allow.
pub fn kl_divergence(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    check_same_dim(p, q)?;
    p.require_positive_definite()?;
    q.require_positive_definite()?;
    let n = p.dim();
    if n == 0 {
        return Ok(0.0);
    }

    let eig_q = q.cov().clone().symmetric_eigen();
    let log_det_q: f64 = eig_q.eigenvalues.iter().map(|l| l.ln()).sum();
    let log_det_p: f64 = p
        .cov()
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.ln())
        .sum();

    // Quadratic form (m2 - m1)^T S2^{-1} (m2 - m1) in Q's eigenbasis.
    let diff = eig_q.eigenvectors.transpose() * (q.mean() - p.mean());
    let quad: f64 = diff
        .iter()
        .zip(eig_q.eigenvalues.iter())
        .map(|(d, l)| d * d / l)
        .sum();

    // tr(S2^{-1} S1) = sum_i (V^T S1 V)_{ii} / lambda_i.
    let rotated = eig_q.eigenvectors.transpose() * p.cov() * &eig_q.eigenvectors;
    let trace: f64 = (0..n)
        .map(|i| rotated[(i, i)] / eig_q.eigenvalues[i])
        .sum();

    Ok(0.5 * (quad + trace - n as f64 + log_det_q - log_det_p))
}

/// Symmetrized KL divergence `KL(P || Q) + KL(Q || P)`.
pub fn symmetrized_kl(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    Ok(kl_divergence(p, q)? + kl_divergence(q, p)?)
}

/// The four quantities of the symmetrized-KL vs Wasserstein bound and the
/// total-variation bound derived from them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TvBoundReport {
    /// Symmetrized KL divergence between the pair.
    pub sym_kl: f64,
    /// 2-Wasserstein distance between the pair.
    pub w2: f64,
    /// `2 / min(lambda_min(S1), lambda_min(S2)) * w2^2`, the upper bound on
    /// `sym_kl`.
    pub lemma1_rhs: f64,
    /// `0.5 * sqrt(sym_kl)`, the Pinsker bound on total variation.
    pub pinsker_tv_bound: f64,
}

/// Evaluate the symmetrized-KL bound and the Pinsker total-variation bound
/// for a strictly positive definite pair.
pub fn lemma1_bound(p: &Gaussian, q: &Gaussian) -> Result<TvBoundReport> {
    check_same_dim(p, q)?;
    p.require_positive_definite()?;
    q.require_positive_definite()?;
    let sym_kl = symmetrized_kl(p, q)?;
    let w2 = w2_distance(p, q)?;
    let lambda_floor = p.cov_extremes().0.min(q.cov_extremes().0);
    let lemma1_rhs = if p.dim() == 0 {
        0.0
    } else {
        2.0 / lambda_floor * w2 * w2
    };
    Ok(TvBoundReport {
        sym_kl,
        w2,
        lemma1_rhs,
        pinsker_tv_bound: 0.5 * sym_kl.max(0.0).sqrt(),
    })
}

/// Independent product of two Gaussians: concatenated means, block-diagonal
/// covariance.
pub fn product(p: &Gaussian, q: &Gaussian) -> Gaussian {
    let np = p.dim();
    let nq = q.dim();
    let mut mean = DVector::zeros(np + nq);
    mean.rows_mut(0, np).copy_from(p.mean());
    mean.rows_mut(np, nq).copy_from(q.mean());
    let mut cov = DMatrix::zeros(np + nq, np + nq);
    cov.view_mut((0, 0), (np, np)).copy_from(p.cov());
    cov.view_mut((np, np), (nq, nq)).copy_from(q.cov());
    Gaussian::new(mean, cov).expect("block-diagonal of valid covariances is PSD")
}
