//! Federated least-squares GAN training and evaluation for renewable
//! power scenario generation.
//!
//! The crate is organized around the lifecycle of a scenario-generation
//! experiment:
//!
//! - [`data`]: ingest or synthesize per-site power series and window them
//!   into normalized 24x24 scenario grids.
//! - [`genmodel`]: the convolutional generator/discriminator pair, LSGAN and
//!   cross-entropy GAN losses, Adam updates, and the per-client local epoch.
//! - [`federation`]: the client/server loop — client selection, local epochs,
//!   periodic parameter averaging and broadcast to all clients.
//! - [`metrics`]: the evaluation battery (FID, MMD, 1-NN two-sample test,
//!   energy score, CRPS, MAE/RMSE, autocorrelation, Pearson matrices,
//!   k-means clustering).
//! - [`baselines`]: Gaussian-copula scenario sampling and centralized GAN
//!   training for comparison runs.
//!
//! All training and evaluation entry points are deterministic given their
//! seed; parallel and single-threaded execution produce bit-identical
//! results.

pub mod baselines;
pub mod data;
pub mod federation;
pub mod genmodel;
mod linalg;
pub mod metrics;
pub mod rng;

pub use baselines::{CentralConfig, CentralRun, CopulaModel};
pub use data::{ClientDataset, NormStats, ScenarioWindow, TimeSeries};
pub use federation::{FederationConfig, FederationRun, FederationState};
pub use genmodel::{LossCoding, ModelParams, NetConfig, OptState};
pub use metrics::{MetricReport, ScenarioSet};
