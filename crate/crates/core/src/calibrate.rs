//! Adjacency checking and the noise-design rules for (0, delta) differential
//! privacy of the stacked measurement mechanism.
//!
//! Three routes are provided: a pair-specific sufficient condition on the
//! output covariances, a uniform isotropic design from the combined-map
//! sensitivity, and a sharper design for the case where the initial-state
//! distribution is public. `achievable_delta` inverts the designs to report
//! the smallest certified delta for given noise.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{pushforward, sensitivity, StackedMaps};
use crate::matgauss::{check_symmetric, eig_extremes, w2_distance, Gaussian, PSD_CLIP_REL};

/// Adjacency radius `c` under the 2-Wasserstein distance.
///
/// Only order `p = 2` is supported; other orders are rejected at
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjacencySpec {
    c: f64,
    p: u32,
}

impl AdjacencySpec {
    pub fn new(c: f64, p: u32) -> Result<Self> {
        if p != 2 {
            return Err(Error::InvalidParameter(format!(
                "only the 2-Wasserstein adjacency is supported, got p = {p}"
            )));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "adjacency radius must be finite and positive, got c = {c}"
            )));
        }
        Ok(Self { c, p })
    }

    /// 2-Wasserstein adjacency with radius `c`.
    pub fn w2(c: f64) -> Result<Self> {
        Self::new(c, 2)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> u32 {
        self.p
    }
}

/// Privacy target `(epsilon, delta)`. All calibration rules require
/// `epsilon = 0`; nonzero values are rejected where they would be used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacySpec {
    epsilon: f64,
    delta: f64,
}

impl PrivacySpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    /// The `(0, delta)` regime every calibration rule targets.
    pub fn zero_epsilon(delta: f64) -> Result<Self> {
        Self::new(0.0, delta)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub(crate) fn require_zero_epsilon(&self) -> Result<()> {
        if self.epsilon != 0.0 {
            return Err(Error::UnsupportedEpsilon {
                epsilon: self.epsilon,
            });
        }
        Ok(())
    }
}

/// Output-noise covariance: either isotropic `sigma2 * I` or a full matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Isotropic { sigma2: f64 },
    Full { cov: DMatrix<f64> },
}

impl NoiseSpec {
    pub fn isotropic(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and nonnegative, got {sigma2}"
            )));
        }
        Ok(NoiseSpec::Isotropic { sigma2 })
    }

    pub fn full(cov: DMatrix<f64>) -> Result<Self> {
        let sym = check_symmetric(&cov)?;
        if !sym.is_empty() {
            let (lo, hi) = eig_extremes(&sym)?;
            let band = PSD_CLIP_REL * hi.max(0.0);
            if lo < -band {
                return Err(Error::NotPsd {
                    eigenvalue: lo,
                    band,
                });
            }
        }
        Ok(NoiseSpec::Full { cov: sym })
    }

    /// Concrete covariance matrix for a `dim`-dimensional output.
    pub fn materialize(&self, dim: usize) -> Result<DMatrix<f64>> {
        match self {
            NoiseSpec::Isotropic { sigma2 } => Ok(DMatrix::identity(dim, dim) * *sigma2),
            NoiseSpec::Full { cov } => {
                if cov.nrows() != dim {
                    return Err(Error::dim("noise covariance", dim, cov.nrows()));
                }
                Ok(cov.clone())
            }
        }
    }

    /// Smallest eigenvalue of the noise covariance.
    pub fn lambda_min(&self) -> f64 {
        match self {
            NoiseSpec::Isotropic { sigma2 } => *sigma2,
            NoiseSpec::Full { cov } => {
                if cov.is_empty() {
                    0.0
                } else {
                    eig_extremes(cov).expect("validated symmetric").0
                }
            }
        }
    }

    /// Isotropic variance, if this is an isotropic spec.
    pub fn sigma2(&self) -> Option<f64> {
        match self {
            NoiseSpec::Isotropic { sigma2 } => Some(*sigma2),
            NoiseSpec::Full { .. } => None,
        }
    }
}

/// Check whether a pair of (product) input distributions is `c`-adjacent;
/// returns the flag together with the computed 2-Wasserstein distance.
pub fn check_adjacent(
    p: &Gaussian,
    q: &Gaussian,
    spec: &AdjacencySpec,
) -> Result<(bool, f64)> {
    let w2 = w2_distance(p, q)?;
    Ok((w2 <= spec.c(), w2))
}

fn noise_floor(lambda_max: f64, spec: &AdjacencySpec, privacy: &PrivacySpec) -> f64 {
    spec.c() * spec.c() * lambda_max / (2.0 * privacy.delta() * privacy.delta())
}

/// Pair-specific sufficient condition: the smaller of the two output
/// covariance floors must reach `c^2 lambda_max(gram) / (2 delta^2)`.
///
/// Returns `(satisfied, lhs, rhs)`. A `true` result certifies (0, delta)
/// privacy for this particular pair; uniform certification over the whole
/// adjacency set is what [`corollary1_noise`] provides.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_check(
    maps: &StackedMaps,
    px0: &Gaussian,
    pu: &Gaussian,
    px0_alt: &Gaussian,
    pu_alt: &Gaussian,
    noise: &NoiseSpec,
    spec: &AdjacencySpec,
    privacy: &PrivacySpec,
) -> Result<(bool, f64, f64)> {
    privacy.require_zero_epsilon()?;
    let noise_cov = noise.materialize(maps.output_dim())?;
    let out = pushforward(maps, px0, pu, &noise_cov)?;
    let out_alt = pushforward(maps, px0_alt, pu_alt, &noise_cov)?;
    let lhs = out.cov_extremes().0.min(out_alt.cov_extremes().0);
    let rhs = noise_floor(sensitivity(maps), spec, privacy);
    Ok((lhs >= rhs, lhs, rhs))
}

/// Minimal isotropic noise that is (0, delta)-private uniformly over the
/// whole `c`-adjacency set: `sigma2 = c^2 lambda_max(gram) / (2 delta^2)`.
pub fn corollary1_noise(
    maps: &StackedMaps,
    spec: &AdjacencySpec,
    privacy: &PrivacySpec,
) -> Result<NoiseSpec> {
    privacy.require_zero_epsilon()?;
    NoiseSpec::isotropic(noise_floor(sensitivity(maps), spec, privacy))
}

fn public_state_floor(maps: &StackedMaps, sigma_x0: &DMatrix<f64>) -> Result<f64> {
    let n = maps.from_state().ncols();
    if sigma_x0.nrows() != n || sigma_x0.ncols() != n {
        return Err(Error::dim("public x0 covariance", n, sigma_x0.nrows()));
    }
    let sym = check_symmetric(sigma_x0)?;
    if !sym.is_empty() {
        let (lo, hi) = eig_extremes(&sym)?;
        let band = PSD_CLIP_REL * hi.max(0.0);
        if lo < -band {
            return Err(Error::NotPsd {
                eigenvalue: lo,
                band,
            });
        }
    }
    let projected = maps.from_state() * sym * maps.from_state().transpose();
    Ok(eig_extremes(&projected)?.0.max(0.0))
}

/// Minimal isotropic noise when the initial-state distribution is public
/// information shared by both sides of every adjacent pair:
/// `sigma2 = max(0, c^2 lambda_max(N^T N) / (2 delta^2) - lambda_min(F S_x0 F^T))`.
pub fn theorem2_noise(
    maps: &StackedMaps,
    sigma_x0: &DMatrix<f64>,
    spec: &AdjacencySpec,
    privacy: &PrivacySpec,
) -> Result<NoiseSpec> {
    privacy.require_zero_epsilon()?;
    let floor = noise_floor(maps.input_sensitivity(), spec, privacy);
    let public_term = public_state_floor(maps, sigma_x0)?;
    NoiseSpec::isotropic((floor - public_term).max(0.0))
}

/// Smallest delta certified by the applicable design rule for the given
/// noise; inverts [`corollary1_noise`] (no public state) or
/// [`theorem2_noise`] (public state covariance supplied).
pub fn achievable_delta(
    maps: &StackedMaps,
    noise: &NoiseSpec,
    spec: &AdjacencySpec,
    public_x0: Option<&DMatrix<f64>>,
) -> Result<f64> {
    match public_x0 {
        None => {
            let lambda_noise = noise.lambda_min();
            if lambda_noise <= 0.0 {
                return Err(Error::ZeroNoise);
            }
            Ok(spec.c() * (sensitivity(maps) / (2.0 * lambda_noise)).sqrt())
        }
        Some(sigma_x0) => {
            let floor = public_state_floor(maps, sigma_x0)? + noise.lambda_min();
            if floor <= 0.0 {
                return Err(Error::ZeroNoise);
            }
            Ok(spec.c() * (maps.input_sensitivity() / (2.0 * floor)).sqrt())
        }
    }
}

/// Which design rule produced a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationRule {
    #[serde(rename = "corollary1")]
    Corollary1,
    #[serde(rename = "theorem2")]
    Theorem2,
}

/// Machine-readable calibration summary.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub rule: CalibrationRule,
    pub c: f64,
    pub delta: f64,
    /// `lambda_max(gram)` for the uniform rule, `lambda_max(N^T N)` for the
    /// public-state rule.
    pub lambda_max: f64,
    /// `lambda_min(F S_x0 F^T)` when the public-state rule applies.
    pub lambda_min_public_term: Option<f64>,
    pub sigma2: f64,
    pub sigma: f64,
}

impl CalibrationReport {
    pub fn corollary1(
        maps: &StackedMaps,
        spec: &AdjacencySpec,
        privacy: &PrivacySpec,
    ) -> Result<Self> {
        let noise = corollary1_noise(maps, spec, privacy)?;
        let sigma2 = noise.sigma2().expect("corollary1 noise is isotropic");
        Ok(Self {
            rule: CalibrationRule::Corollary1,
            c: spec.c(),
            delta: privacy.delta(),
            lambda_max: sensitivity(maps),
            lambda_min_public_term: None,
            sigma2,
            sigma: sigma2.sqrt(),
        })
    }

    pub fn theorem2(
        maps: &StackedMaps,
        sigma_x0: &DMatrix<f64>,
        spec: &AdjacencySpec,
        privacy: &PrivacySpec,
    ) -> Result<Self> {
        let noise = theorem2_noise(maps, sigma_x0, spec, privacy)?;
        let sigma2 = noise.sigma2().expect("theorem2 noise is isotropic");
        Ok(Self {
            rule: CalibrationRule::Theorem2,
            c: spec.c(),
            delta: privacy.delta(),
            lambda_max: maps.input_sensitivity(),
            lambda_min_public_term: Some(public_state_floor(maps, sigma_x0)?),
            sigma2,
            sigma: sigma2.sqrt(),
        })
    }
}
