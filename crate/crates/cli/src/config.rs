//! Run configuration: strict TOML with one section per solver component.
//!
//! Unknown keys are rejected everywhere so golden configuration files stay
//! meaningful. The derived [`NoiseModel`] is rebuilt through its validated
//! constructor; the growth constant is never read from the file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use preytaxis_core::galerkin::StepConfig;
use preytaxis_core::noise::NoiseShape;
use preytaxis_core::spectral::{build_basis, BasisSet};
use preytaxis_core::{Domain, ModelParams, NoiseModel};

use crate::ensemble::InitialCondition;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Extent per axis; one entry for 1D, two for 2D.
    pub lengths: Vec<f64>,
    pub grid_points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub n_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub n_noise_modes: usize,
    pub beta0: f64,
    pub gamma: f64,
    pub shape: NoiseShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    pub master_seed: u64,
    pub initial: InitialCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    #[serde(default = "default_format")]
    pub format: FileFormat,
}

fn default_format() -> FileFormat {
    FileFormat::Bin
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { directory: PathBuf::from("out"), format: FileFormat::Bin }
    }
}

/// Complete run description, loaded from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub domain: DomainSpec,
    pub basis: BasisSpec,
    pub noise: NoiseSpec,
    pub step: StepConfig,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate_shallow()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Desk-scale defaults: 1D unit interval, 16 modes on 128 points,
    /// default model and noise, 64 trajectories.
    pub fn desk_scale() -> Self {
        let mut step = StepConfig::new(1e-4, 0.5, 100);
        step.record_increments = false;
        RunConfig {
            model: ModelParams::default_set(),
            domain: DomainSpec { lengths: vec![1.0], grid_points: vec![128] },
            basis: BasisSpec { n_modes: 16 },
            noise: NoiseSpec { n_noise_modes: 16, beta0: 0.1, gamma: 1.0, shape: NoiseShape::Linear },
            step,
            ensemble: EnsembleSpec {
                n_traj: 64,
                master_seed: 7,
                initial: InitialCondition::SmoothBump {
                    u1_base: 1.0,
                    u1_amp: 0.9,
                    u2_base: 2.0,
                    u2_amp: 0.5,
                },
            },
            output: OutputSpec::default(),
        }
    }

    fn validate_shallow(&self) -> Result<(), Error> {
        self.model.validate().map_err(Error::Core)?;
        if self.ensemble.n_traj == 0 {
            return Err(Error::Config("ensemble.n_traj must be >= 1".into()));
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Domain, Error> {
        let d = match (self.domain.lengths.as_slice(), self.domain.grid_points.as_slice()) {
            ([l], [g]) => Domain::new_1d(*l, *g),
            ([la, lb], [ga, gb]) => Domain::new_2d([*la, *lb], [*ga, *gb]),
            _ => {
                return Err(Error::Config(
                    "domain.lengths and domain.grid_points must both have 1 or 2 entries".into(),
                ))
            }
        };
        d.map_err(Error::Core)
    }

    pub fn build_basis(&self) -> Result<BasisSet, Error> {
        build_basis(&self.build_domain()?, self.basis.n_modes).map_err(Error::Core)
    }

    pub fn build_noise(&self) -> Result<NoiseModel, Error> {
        NoiseModel::new(
            self.noise.n_noise_modes,
            self.noise.beta0,
            self.noise.gamma,
            self.noise.shape,
        )
        .map_err(Error::Core)
    }

    /// Canonical serialization used for hashing and config echo.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Content hash of the canonical serialization (hex SHA-256).
    ///
    /// Output plumbing is excluded: two runs that produce the same numbers
    /// into different directories or formats share a hash.
    pub fn content_hash(&self) -> String {
        let mut normalized = self.clone();
        normalized.output = OutputSpec::default();
        let digest = Sha256::digest(normalized.canonical_toml().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(out, "{byte:02x}").unwrap();
        }
        out
    }
}
