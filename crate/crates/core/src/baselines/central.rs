//! Centralized adversarial training on a single pooled dataset.
//!
//! Runs the same per-epoch local step as a federation client, with the same
//! seed derivation, so a one-client federated run that synchronizes every
//! epoch produces bit-identical parameters.

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::data::ClientDataset;
use crate::federation::EpochRecord;
use crate::genmodel::{
    init_params, local_train_epoch, AdamHyper, ModelParams, NetConfig, OptState, TrainLoss,
};
use crate::rng::{self, Stream};

/// Hyperparameters of a centralized run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralConfig {
    /// Number of training epochs.
    pub epochs: usize,
    /// Minibatch size.
    pub batch_size: usize,
    /// Adam hyperparameters for both optimizers.
    pub adam: AdamHyper,
    /// Master seed for initialization, shuffling, and noise.
    pub seed: u64,
}

impl Default for CentralConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            adam: AdamHyper::default(),
            seed: 0,
        }
    }
}

impl CentralConfig {
    /// Checks the configuration invariants.
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.epochs < 1 {
            return Err(BaselineError::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(BaselineError::BadConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a centralized run: final parameters plus per-epoch losses.
#[derive(Debug, Clone)]
pub struct CentralRun {
    pub params_g: ModelParams,
    pub params_d: ModelParams,
    /// One record per epoch; `synced` is always false (there is no server).
    pub history: Vec<EpochRecord>,
}

/// Trains a generator/discriminator pair on one dataset.
pub fn train_centralized(
    data: &ClientDataset,
    net: &NetConfig,
    loss: &TrainLoss,
    cfg: &CentralConfig,
) -> Result<CentralRun, BaselineError> {
    cfg.validate()?;
    let (mut params_g, mut params_d) = init_params(net, cfg.seed)?;
    let mut opt_g = OptState::new(&params_g, cfg.adam);
    let mut opt_d = OptState::new(&params_d, cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let epoch_seed = rng::mix(
            cfg.seed,
            Stream::Train,
            &[epoch as u64, data.client_id as u64],
        );
        let trace = local_train_epoch(
            data,
            net,
            &mut params_g,
            &mut params_d,
            &mut opt_g,
            &mut opt_d,
            loss,
            cfg.batch_size,
            epoch_seed,
        )?;
        let n = trace.len() as f64;
        history.push(EpochRecord {
            epoch,
            client_id: data.client_id,
            d_loss: trace.iter().map(|b| b.d_loss).sum::<f64>() / n,
            g_loss: trace.iter().map(|b| b.g_loss).sum::<f64>() / n,
            synced: false,
        });
    }
    Ok(CentralRun {
        params_g,
        params_d,
        history,
    })
}
