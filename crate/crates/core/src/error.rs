//! Error types shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Typed failure modes for construction and calibration.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A matrix expected to be symmetric had asymmetry beyond tolerance.
    #[error("matrix is not symmetric: max |M - M^T| = {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    /// A matrix expected to be positive semidefinite had an eigenvalue below
    /// the round-off clip band.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.6e} is below the clip band -{band:.3e}")]
    NotPsd { eigenvalue: f64, band: f64 },

    /// Operands have incompatible dimensions.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A covariance required to be strictly positive definite is (numerically)
    /// singular.
    #[error("covariance is singular: lambda_min = {lambda_min:.6e} with lambda_max = {lambda_max:.6e}")]
    SingularCovariance { lambda_min: f64, lambda_max: f64 },

    /// Noise with no strictly positive definite component where one is
    /// required (division by zero in the inverse calibration).
    #[error("noise covariance has no strictly positive component in the required directions")]
    ZeroNoise,

    /// Calibration rules only cover the (0, delta) regime.
    #[error("epsilon = {epsilon} is not supported; calibration targets (0, delta) only")]
    UnsupportedEpsilon { epsilon: f64 },

    /// Any other invalid argument (out-of-range scalar, ragged matrix, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
