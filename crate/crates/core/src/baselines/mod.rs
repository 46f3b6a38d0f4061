//! Reference scenario generators to compare the federated model against: a
//! Gaussian copula over empirical marginals and a centralized (non-federated)
//! adversarial trainer.

mod central;
mod copula;

pub use central::{train_centralized, CentralConfig, CentralRun};
pub use copula::{fit_copula, sample_copula, CopulaMeta, CopulaModel, MarginalTable};

use thiserror::Error;

use crate::genmodel::GenError;
use crate::metrics::MetricError;

/// Errors from baseline fitting, sampling, and training.
#[derive(Debug, Error)]
pub enum BaselineError {
    /// Not enough training scenarios to fit a model.
    #[error("need at least {need} training scenarios, got {got}")]
    TooFew { need: usize, got: usize },
    /// Configuration violates an invariant.
    #[error("invalid baseline config: {0}")]
    BadConfig(String),
    /// A serialized model is malformed.
    #[error("bad model container: {0}")]
    Model(String),
    /// An underlying model error.
    #[error(transparent)]
    Gen(#[from] GenError),
    /// An underlying data-handling error.
    #[error(transparent)]
    Metric(#[from] MetricError),
}
