//! Convolutional generator/discriminator pair, GAN losses, Adam updates and
//! the one-epoch local training step run by each federation client.
//!
//! Parameters are value-semantic named-tensor maps ([`ModelParams`]); every
//! forward, loss, and update entry point is a pure function of its inputs
//! except where a `&mut` signature advertises the side effect (train-mode
//! forwards advance batch-norm running statistics, `adam_step` edits weights
//! and optimizer moments in place).

mod adam;
mod checkpoint;
mod layers;
mod loss;
mod nets;
mod params;
mod train;

pub use adam::{adam_step, AdamHyper, OptState};
pub use checkpoint::{
    checkpoint_models, restore_models, CheckpointMeta, ContainerEntry, TensorContainer,
    CONTAINER_MAGIC, CONTAINER_VERSION,
};
pub use loss::{
    d_loss_gan, d_loss_gan_score_grads, d_loss_lsgan, d_loss_lsgan_grads, g_loss_gan,
    g_loss_gan_score_grad, g_loss_lsgan, g_loss_lsgan_grad, LossCoding, PROB_EPS,
};
pub use nets::{
    discriminator_backward, discriminator_forward, discriminator_forward_train,
    generator_backward, generator_forward, generator_forward_train, init_params,
    sample_generator, DiscCache, GenCache, Mode, NetConfig, NoiseBatch,
};
pub use params::{ModelParams, ParamGrads, Role, TensorMap};
pub use train::{local_train_epoch, BatchLoss, TrainLoss};

use thiserror::Error;

/// Errors from model construction, training, and checkpointing.
#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid net config: {0}")]
    BadConfig(String),
    #[error("parameter {name}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGrad(String),
    #[error("non-finite value in parameter {0}")]
    NonFiniteParam(String),
    #[error("noise batch has dim {got}, net expects {expected}")]
    NoiseDimMismatch { got: usize, expected: usize },
    #[error("labels {state} but net has conditional={conditional}")]
    LabelMismatch {
        state: &'static str,
        conditional: bool,
    },
    #[error("label batch shape {got:?}, expected [{m}, {n_labels}]")]
    LabelShape {
        got: Vec<usize>,
        m: usize,
        n_labels: usize,
    },
    #[error("batch of {got} grids with side {side}, net expects side {expected}")]
    GridShape {
        got: usize,
        side: usize,
        expected: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("client {client_id}: {n} training windows < batch size {m}")]
    TooFewTrainWindows { client_id: usize, n: usize, m: usize },
    #[error("client {client_id}: conditional net but dataset has no label")]
    MissingLabel { client_id: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
