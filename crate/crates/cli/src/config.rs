//! Run configuration: the JSON schema accepted by every subcommand and the
//! resolution logic that turns it into core types.

use nalgebra::DMatrix;
use serde::Deserialize;

use wdp_lti_core::building::BuildingScenario;
use wdp_lti_core::calibrate::{
    corollary1_noise, theorem2_noise, AdjacencySpec, NoiseSpec, PrivacySpec,
};
use wdp_lti_core::lti::{LtiSystem, StackedMaps};
use wdp_lti_core::matgauss::matrix_from_rows;
use wdp_lti_core::Gaussian;

use crate::Failure;

/// Top-level configuration file. Which fields must be present depends on the
/// subcommand; resolution helpers below enforce that.
#[derive(Debug, Default, Deserialize)]
pub struct RunConfig {
    pub system: Option<LtiSystem>,
    pub horizon: Option<usize>,
    pub adjacency: Option<AdjacencyCfg>,
    pub privacy: Option<PrivacyCfg>,
    pub x0: Option<Gaussian>,
    pub inputs: Option<Vec<Gaussian>>,
    pub scenario: Option<BuildingScenario>,
    pub occupancies: Option<[u32; 2]>,
    pub noise: Option<NoiseCfg>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct AdjacencyCfg {
    pub c: f64,
    pub p: Option<u32>,
}

#[derive(Debug, Deserialize)]
pub struct PrivacyCfg {
    pub delta: f64,
    pub epsilon: Option<f64>,
}

/// Noise source: exactly one of an explicit isotropic variance, an explicit
/// full covariance, or an embedded calibration rule.
#[derive(Debug, Deserialize)]
pub struct NoiseCfg {
    pub sigma2: Option<f64>,
    pub cov: Option<Vec<Vec<f64>>>,
    pub rule: Option<String>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("malformed config {}: {e}", path.display())))
    }

    pub fn adjacency(&self) -> Result<AdjacencySpec, Failure> {
        let cfg = self
            .adjacency
            .as_ref()
            .ok_or_else(|| Failure::config("config is missing \"adjacency\""))?;
        AdjacencySpec::new(cfg.c, cfg.p.unwrap_or(2)).map_err(Failure::from)
    }

    pub fn privacy(&self) -> Result<PrivacySpec, Failure> {
        let cfg = self
            .privacy
            .as_ref()
            .ok_or_else(|| Failure::config("config is missing \"privacy\""))?;
        PrivacySpec::new(cfg.epsilon.unwrap_or(0.0), cfg.delta).map_err(Failure::from)
    }

    /// The system and horizon, from either the explicit encoding or the
    /// scenario block.
    pub fn system_and_horizon(&self) -> Result<(LtiSystem, usize), Failure> {
        if let Some(sc) = &self.scenario {
            return Ok((sc.to_lti(), sc.horizon()));
        }
        let sys = self
            .system
            .clone()
            .ok_or_else(|| Failure::config("config needs either \"system\" or \"scenario\""))?;
        let horizon = self
            .horizon
            .ok_or_else(|| Failure::config("config is missing \"horizon\""))?;
        Ok((sys, horizon))
    }

    /// Initial-state distribution, from the explicit field or the scenario.
    pub fn x0(&self) -> Result<Gaussian, Failure> {
        if let Some(x0) = &self.x0 {
            return Ok(x0.clone());
        }
        if let Some(sc) = &self.scenario {
            return Ok(sc.x0().clone());
        }
        Err(Failure::config("config is missing \"x0\""))
    }

    /// Exactly two Gaussian encodings under "inputs".
    pub fn input_pair(&self) -> Result<(Gaussian, Gaussian), Failure> {
        let inputs = self
            .inputs
            .as_ref()
            .ok_or_else(|| Failure::config("config is missing \"inputs\""))?;
        if inputs.len() != 2 {
            return Err(Failure::config(format!(
                "\"inputs\" must hold exactly two distributions, got {}",
                inputs.len()
            )));
        }
        Ok((inputs[0].clone(), inputs[1].clone()))
    }

    /// Resolve the noise covariance: explicit values win, otherwise an
    /// embedded calibration rule runs (default: the public-state rule when a
    /// scenario provides x0, the uniform rule otherwise). `adjacency` and
    /// `privacy` are only required on the calibration paths.
    pub fn resolve_noise(
        &self,
        maps: &StackedMaps,
        x0_cov: Option<&DMatrix<f64>>,
        adjacency: Option<&AdjacencySpec>,
        privacy: Option<&PrivacySpec>,
    ) -> Result<NoiseSpec, Failure> {
        let rule_of = |name: &str| -> Result<NoiseSpec, Failure> {
            let adjacency = adjacency
                .ok_or_else(|| Failure::config("embedded calibration needs \"adjacency\""))?;
            let privacy =
                privacy.ok_or_else(|| Failure::config("embedded calibration needs \"privacy\""))?;
            match name {
                "corollary1" => corollary1_noise(maps, adjacency, privacy).map_err(Failure::from),
                "theorem2" => {
                    let cov = x0_cov.ok_or_else(|| {
                        Failure::config("the theorem2 rule needs an x0 distribution")
                    })?;
                    theorem2_noise(maps, cov, adjacency, privacy).map_err(Failure::from)
                }
                other => Err(Failure::config(format!(
                    "unknown noise rule {other:?}; use \"corollary1\" or \"theorem2\""
                ))),
            }
        };
        match &self.noise {
            Some(cfg) => {
                let set = [
                    cfg.sigma2.is_some(),
                    cfg.cov.is_some(),
                    cfg.rule.is_some(),
                ];
                if set.iter().filter(|&&s| s).count() != 1 {
                    return Err(Failure::config(
                        "\"noise\" must set exactly one of sigma2, cov, rule",
                    ));
                }
                if let Some(sigma2) = cfg.sigma2 {
                    return NoiseSpec::isotropic(sigma2).map_err(Failure::from);
                }
                if let Some(rows) = &cfg.cov {
                    let cov = matrix_from_rows(rows).map_err(Failure::from)?;
                    return NoiseSpec::full(cov).map_err(Failure::from);
                }
                rule_of(cfg.rule.as_deref().unwrap())
            }
            None => {
                if x0_cov.is_some() {
                    rule_of("theorem2")
                } else {
                    rule_of("corollary1")
                }
            }
        }
    }
}
