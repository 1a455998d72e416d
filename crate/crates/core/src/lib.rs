//! Calibration and verification toolkit for differentially private release
//! of LTI measurement sequences whose *statistical* inputs are the secret.
//!
//! The pipeline: model the system ([`lti`]), describe the input
//! distributions and their 2-Wasserstein adjacency ([`matgauss`],
//! [`calibrate`]), design Gaussian output noise achieving (0, delta)
//! differential privacy over the adjacency set ([`calibrate`]), and verify
//! the guarantee empirically by Monte Carlo total-variation estimation
//! ([`verify`]). The [`building`] module packages the CO2 occupancy case
//! study end to end.

pub mod building;
pub mod calibrate;
pub mod error;
pub mod lti;
pub mod matgauss;
pub mod verify;

pub use error::{Error, Result};
pub use matgauss::Gaussian;
