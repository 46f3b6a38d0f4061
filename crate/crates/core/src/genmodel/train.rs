//! One local training epoch: a single pass over a client's training windows,
//! one discriminator update then one generator update per minibatch.

use super::adam::{adam_step, OptState};
use super::loss::*;
use super::nets::{
    discriminator_backward, discriminator_forward_train, generator_backward,
    generator_forward_train, NetConfig, NoiseBatch,
};
use super::params::ModelParams;
use super::GenError;
use crate::data::ClientDataset;
use crate::rng::{self, Stream};
use ndarray::{Array1, Array2, Array4};
use rand::seq::SliceRandom;

/// Which adversarial objective drives the updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainLoss {
    /// Least-squares targets; the discriminator output is used raw.
    LeastSquares(LossCoding),
    /// Cross-entropy on sigmoid(score) — the classic GAN baseline.
    CrossEntropy,
}

/// Losses observed on one minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub d_loss: f64,
    pub g_loss: f64,
}

fn window_batch(
    client: &ClientDataset,
    order: &[usize],
    start: usize,
    m: usize,
    side: usize,
) -> Array4<f64> {
    let mut batch = Array4::zeros((m, 1, side, side));
    for (bi, &wi) in order[start..start + m].iter().enumerate() {
        batch
            .slice_mut(ndarray::s![bi, 0, .., ..])
            .assign(client.train[wi].grid());
    }
    batch
}

fn sigmoid_scores(s: &Array1<f64>) -> Array1<f64> {
    s.mapv(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Run one epoch of Adam updates on `client`'s training windows.
///
/// Per minibatch (⌊|train|/m⌋ of them, over a seeded shuffle of the windows):
/// draw fresh noise, update the discriminator on the real batch versus the
/// generated batch, then draw fresh noise and update the generator through
/// the freshly-updated discriminator. The RNG consumption order is fixed —
/// shuffle, then per minibatch the discriminator-step noise followed by the
/// generator-step noise — so identical inputs and seed give identical
/// outputs.
#[allow(clippy::too_many_arguments)]
pub fn local_train_epoch(
    client: &ClientDataset,
    cfg: &NetConfig,
    params_g: &mut ModelParams,
    params_d: &mut ModelParams,
    opt_g: &mut OptState,
    opt_d: &mut OptState,
    loss: &TrainLoss,
    m: usize,
    seed: u64,
) -> Result<Vec<BatchLoss>, GenError> {
    let n = client.train.len();
    if m == 0 {
        return Err(GenError::EmptyBatch);
    }
    if n < m {
        return Err(GenError::TooFewTrainWindows {
            client_id: client.client_id,
            n,
            m,
        });
    }
    let labels: Option<Array2<f64>> = if cfg.conditional {
        let label = client
            .label
            .as_ref()
            .ok_or(GenError::MissingLabel { client_id: client.client_id })?;
        if label.len() != cfg.n_labels {
            return Err(GenError::LabelShape {
                got: vec![1, label.len()],
                m,
                n_labels: cfg.n_labels,
            });
        }
        let mut l = Array2::zeros((m, cfg.n_labels));
        for mut row in l.rows_mut() {
            row.assign(&Array1::from_vec(label.clone()));
        }
        Some(l)
    } else {
        None
    };
    let labels = labels.as_ref();

    let mut rng = rng::derive(seed, Stream::Train, &[]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let n_batches = n / m;
    let mut trace = Vec::with_capacity(n_batches);
    for bi in 0..n_batches {
        let real = window_batch(client, &order, bi * m, m, cfg.grid_side);

        // Discriminator step.
        let z_d = NoiseBatch::draw(&mut rng, m, cfg.noise_dim);
        let (fake, _) = generator_forward_train(params_g, cfg, &z_d, labels)?;
        let (s_real, cache_r) = discriminator_forward_train(params_d, cfg, &real, labels)?;
        let (s_fake, cache_f) = discriminator_forward_train(params_d, cfg, &fake, labels)?;
        let (d_loss, dreal, dfake) = match loss {
            TrainLoss::LeastSquares(coding) => {
                let value = d_loss_lsgan(&s_real, &s_fake, coding);
                let (dr, df) = d_loss_lsgan_grads(&s_real, &s_fake, coding);
                (value, dr, df)
            }
            TrainLoss::CrossEntropy => {
                let value = d_loss_gan(&sigmoid_scores(&s_real), &sigmoid_scores(&s_fake));
                let (dr, df) = d_loss_gan_score_grads(&s_real, &s_fake);
                (value, dr, df)
            }
        };
        let (mut d_grads, _) = discriminator_backward(params_d, cfg, &cache_r, &dreal);
        let (fake_grads, _) = discriminator_backward(params_d, cfg, &cache_f, &dfake);
        d_grads.add_assign(&fake_grads)?;
        adam_step(params_d, &d_grads, opt_d)?;

        // Generator step, through the updated discriminator.
        let z_g = NoiseBatch::draw(&mut rng, m, cfg.noise_dim);
        let (fake2, g_cache) = generator_forward_train(params_g, cfg, &z_g, labels)?;
        let (s, d_cache) = discriminator_forward_train(params_d, cfg, &fake2, labels)?;
        let (g_loss, dscores) = match loss {
            TrainLoss::LeastSquares(coding) => (
                g_loss_lsgan(&s, coding),
                g_loss_lsgan_grad(&s, coding),
            ),
            TrainLoss::CrossEntropy => (
                g_loss_gan(&sigmoid_scores(&s)),
                g_loss_gan_score_grad(&s),
            ),
        };
        let (_, dfake2) = discriminator_backward(params_d, cfg, &d_cache, &dscores);
        let g_grads = generator_backward(params_g, cfg, &g_cache, &dfake2);
        adam_step(params_g, &g_grads, opt_g)?;

        trace.push(BatchLoss { d_loss, g_loss });
    }
    Ok(trace)
}
