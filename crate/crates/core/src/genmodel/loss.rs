//! Least-squares and cross-entropy adversarial losses with their score
//! gradients.
//!
//! The least-squares pair works on raw discriminator scores against target
//! codes `a` (fake), `b` (real), `c` (what the generator wants fakes to
//! score). The cross-entropy pair works on probabilities; its gradients are
//! taken w.r.t. pre-sigmoid scores, which keeps them bounded.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// Target codes of the least-squares objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossCoding {
    /// Discriminator target for generated samples.
    pub a: f64,
    /// Discriminator target for real samples.
    pub b: f64,
    /// Generator target for generated samples.
    pub c: f64,
}

impl Default for LossCoding {
    fn default() -> Self {
        Self { a: 0.0, b: 1.0, c: 1.0 }
    }
}

/// Probability floor/ceiling inside cross-entropy losses.
pub const PROB_EPS: f64 = 1e-7;

fn half_mean_sq_dev(scores: &Array1<f64>, target: f64) -> f64 {
    0.5 * scores.iter().map(|s| (s - target) * (s - target)).sum::<f64>() / scores.len() as f64
}

/// `½·mean((s_real − b)²) + ½·mean((s_fake − a)²)`.
pub fn d_loss_lsgan(scores_real: &Array1<f64>, scores_fake: &Array1<f64>, coding: &LossCoding) -> f64 {
    half_mean_sq_dev(scores_real, coding.b) + half_mean_sq_dev(scores_fake, coding.a)
}

/// `½·mean((s_fake − c)²)`.
pub fn g_loss_lsgan(scores_fake: &Array1<f64>, coding: &LossCoding) -> f64 {
    half_mean_sq_dev(scores_fake, coding.c)
}

/// Gradients of [`d_loss_lsgan`] w.r.t. each score: `(s − target)/m` per
/// batch.
pub fn d_loss_lsgan_grads(
    scores_real: &Array1<f64>,
    scores_fake: &Array1<f64>,
    coding: &LossCoding,
) -> (Array1<f64>, Array1<f64>) {
    let mr = scores_real.len() as f64;
    let mf = scores_fake.len() as f64;
    (
        scores_real.mapv(|s| (s - coding.b) / mr),
        scores_fake.mapv(|s| (s - coding.a) / mf),
    )
}

/// Gradient of [`g_loss_lsgan`] w.r.t. each fake score.
pub fn g_loss_lsgan_grad(scores_fake: &Array1<f64>, coding: &LossCoding) -> Array1<f64> {
    let m = scores_fake.len() as f64;
    scores_fake.mapv(|s| (s - coding.c) / m)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `−mean(log p_real) − mean(log(1 − p_fake))`, probabilities clamped away
/// from 0 and 1 by [`PROB_EPS`].
pub fn d_loss_gan(p_real: &Array1<f64>, p_fake: &Array1<f64>) -> f64 {
    let lr = p_real.iter().map(|p| clamp_prob(*p).ln()).sum::<f64>() / p_real.len() as f64;
    let lf = p_fake.iter().map(|p| (1.0 - clamp_prob(*p)).ln()).sum::<f64>() / p_fake.len() as f64;
    -lr - lf
}

/// `mean(log(1 − p_fake))` — the saturating generator objective.
pub fn g_loss_gan(p_fake: &Array1<f64>) -> f64 {
    p_fake.iter().map(|p| (1.0 - clamp_prob(*p)).ln()).sum::<f64>() / p_fake.len() as f64
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Gradients of [`d_loss_gan`] w.r.t. pre-sigmoid scores:
/// `(σ(s_real) − 1)/m` and `σ(s_fake)/m`.
pub fn d_loss_gan_score_grads(
    scores_real: &Array1<f64>,
    scores_fake: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let mr = scores_real.len() as f64;
    let mf = scores_fake.len() as f64;
    (
        scores_real.mapv(|s| (sigmoid(s) - 1.0) / mr),
        scores_fake.mapv(|s| sigmoid(s) / mf),
    )
}

/// Gradient of [`g_loss_gan`] w.r.t. pre-sigmoid fake scores: `−σ(s)/m`.
pub fn g_loss_gan_score_grad(scores_fake: &Array1<f64>) -> Array1<f64> {
    let m = scores_fake.len() as f64;
    scores_fake.mapv(|s| -sigmoid(s) / m)
}
