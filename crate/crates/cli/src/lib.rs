//! Batch tooling around the `preytaxis-core` solver: configuration files,
//! Monte Carlo ensembles, paired stability runs, refinement studies,
//! trajectory file IO, and the verification suite behind `preytaxis verify`.

pub mod config;
pub mod ensemble;
pub mod trajfile;
pub mod verify;

use preytaxis_core::Error as CoreError;

/// Errors of the batch layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("trajectory {trajectory}: {source}")]
    Trajectory {
        trajectory: u64,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("inadmissible initial condition: {0}")]
    Inadmissible(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("trajectory file: {0}")]
    Format(String),
}
