//! The DC-style generator/discriminator pair and their analytic backwards.
//!
//! Generator: fully-connected projection of the noise vector to a
//! `c1 x (side/4) x (side/4)` feature map, then two 4x4 stride-2 transposed
//! convolutions (`c1 -> c2 -> 1`), batch norm + ReLU between layers, sigmoid
//! output — spatial path `side/4 -> side/2 -> side`.
//!
//! Discriminator: two 4x4 stride-2 convolutions (`1 -> d1 -> d2`) with
//! LeakyReLU (batch norm on the second), then a fully-connected layer to one
//! unbounded scalar per sample — the least-squares objective needs a linear
//! output, and the cross-entropy baseline applies its sigmoid in the loss.
//!
//! The conditional variant appends a one-hot site label to the noise vector
//! and feeds the discriminator the same label as extra constant input
//! channels.

use super::layers::*;
use super::params::{ModelParams, ParamGrads, Role, TensorMap};
use super::GenError;
use crate::rng::{self, Stream};
use ndarray::{Array1, Array2, Array3, Array4, ArrayD, IxDyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Kernel size of every (transposed) convolution.
const KERNEL: usize = 4;
/// Stride of every (transposed) convolution.
const STRIDE: usize = 2;
/// Padding of every (transposed) convolution.
const PAD: usize = 1;
/// Standard deviation of weight initialization.
const INIT_STD: f64 = 0.02;

/// Architecture hyperparameters shared by generator and discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Length of the generator's noise input z.
    pub noise_dim: usize,
    /// Side of the square scenario grid; must be a multiple of 4.
    pub grid_side: usize,
    /// Generator channel widths (projection, mid layer).
    pub g_channels: (usize, usize),
    /// Discriminator channel widths (first conv, second conv).
    pub d_channels: (usize, usize),
    /// Negative-side slope of the discriminator's LeakyReLU.
    pub leaky_slope: f64,
    /// Whether both nets take a one-hot site label.
    pub conditional: bool,
    /// Label length; zero exactly when `conditional` is false.
    pub n_labels: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            noise_dim: 100,
            grid_side: 24,
            g_channels: (128, 64),
            d_channels: (64, 128),
            leaky_slope: 0.2,
            conditional: false,
            n_labels: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.noise_dim == 0 {
            return Err(GenError::BadConfig("noise_dim must be >= 1".into()));
        }
        if self.grid_side < 8 || self.grid_side % 4 != 0 {
            return Err(GenError::BadConfig(format!(
                "grid_side must be a multiple of 4 and >= 8, got {}",
                self.grid_side
            )));
        }
        if self.g_channels.0 == 0
            || self.g_channels.1 == 0
            || self.d_channels.0 == 0
            || self.d_channels.1 == 0
        {
            return Err(GenError::BadConfig("channel counts must be >= 1".into()));
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope <= 0.0 || self.leaky_slope >= 1.0 {
            return Err(GenError::BadConfig(format!(
                "leaky_slope must be in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        if self.conditional != (self.n_labels > 0) {
            return Err(GenError::BadConfig(format!(
                "conditional={} requires n_labels {} 0, got {}",
                self.conditional,
                if self.conditional { ">" } else { "=" },
                self.n_labels
            )));
        }
        Ok(())
    }

    /// Side of the generator's projected feature map.
    pub(crate) fn s0(&self) -> usize {
        self.grid_side / 4
    }

    /// Generator input width: noise plus optional label.
    pub(crate) fn g_in(&self) -> usize {
        self.noise_dim + self.n_labels
    }

    /// Discriminator input channels: the grid plus optional label planes.
    pub(crate) fn d_in_ch(&self) -> usize {
        1 + self.n_labels
    }
}

/// A batch of standard-normal noise vectors, one per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBatch {
    /// `[m, noise_dim]`, row-major draw order.
    pub vectors: Array2<f64>,
}

impl NoiseBatch {
    /// Draw `m` vectors of length `noise_dim` in a fixed row-major order.
    pub fn draw(rng: &mut impl Rng, m: usize, noise_dim: usize) -> Self {
        let data: Vec<f64> = (0..m * noise_dim)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        Self {
            vectors: Array2::from_shape_vec((m, noise_dim), data).expect("length matches shape"),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Forward-pass normalization behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch-norm layers use the current batch's statistics.
    Train,
    /// Batch-norm layers use stored running statistics; outputs are
    /// per-sample deterministic.
    Eval,
}

/// Ordered (name, shape) schema for one role under a config.
pub(crate) fn schema(cfg: &NetConfig, role: Role) -> Vec<(String, Vec<usize>)> {
    let s0 = cfg.s0();
    match role {
        Role::Generator => {
            let (c1, c2) = cfg.g_channels;
            vec![
                ("g.fc.w".into(), vec![cfg.g_in(), c1 * s0 * s0]),
                ("g.fc.b".into(), vec![c1 * s0 * s0]),
                ("g.bn0.gamma".into(), vec![c1]),
                ("g.bn0.beta".into(), vec![c1]),
                ("g.bn0.running_mean".into(), vec![c1]),
                ("g.bn0.running_var".into(), vec![c1]),
                ("g.tconv1.w".into(), vec![c1, c2, KERNEL, KERNEL]),
                ("g.tconv1.b".into(), vec![c2]),
                ("g.bn1.gamma".into(), vec![c2]),
                ("g.bn1.beta".into(), vec![c2]),
                ("g.bn1.running_mean".into(), vec![c2]),
                ("g.bn1.running_var".into(), vec![c2]),
                ("g.tconv2.w".into(), vec![c2, 1, KERNEL, KERNEL]),
                ("g.tconv2.b".into(), vec![1]),
            ]
        }
        Role::Discriminator => {
            let (d1, d2) = cfg.d_channels;
            vec![
                ("d.conv1.w".into(), vec![d1, cfg.d_in_ch(), KERNEL, KERNEL]),
                ("d.conv1.b".into(), vec![d1]),
                ("d.conv2.w".into(), vec![d2, d1, KERNEL, KERNEL]),
                ("d.conv2.b".into(), vec![d2]),
                ("d.bn2.gamma".into(), vec![d2]),
                ("d.bn2.beta".into(), vec![d2]),
                ("d.bn2.running_mean".into(), vec![d2]),
                ("d.bn2.running_var".into(), vec![d2]),
                ("d.fc.w".into(), vec![d2 * s0 * s0, 1]),
                ("d.fc.b".into(), vec![1]),
            ]
        }
    }
}

/// Check `params` against the schema implied by `cfg` and its role.
pub fn check_params(params: &ModelParams, cfg: &NetConfig) -> Result<(), GenError> {
    let expected = schema(cfg, params.role);
    if params.len() != expected.len() {
        return Err(GenError::UnknownParam(format!(
            "{:?} has {} tensors, schema has {}",
            params.role,
            params.len(),
            expected.len()
        )));
    }
    for ((name, shape), (pname, tensor)) in expected.iter().zip(params.iter()) {
        if name != pname {
            return Err(GenError::UnknownParam(pname.to_string()));
        }
        if tensor.shape() != shape.as_slice() {
            return Err(GenError::ShapeMismatch {
                name: name.clone(),
                expected: shape.clone(),
                got: tensor.shape().to_vec(),
            });
        }
    }
    Ok(())
}

/// Initialize both networks: weights `N(0, 0.02^2)`, biases zero, batch-norm
/// scale 1 / shift 0, running stats at the identity. Deterministic per seed.
pub fn init_params(cfg: &NetConfig, seed: u64) -> Result<(ModelParams, ModelParams), GenError> {
    cfg.validate()?;
    let build = |role: Role, stream_ctx: u64| -> ModelParams {
        let mut rng = rng::derive(seed, Stream::Init, &[stream_ctx]);
        let mut map = TensorMap::new();
        for (name, shape) in schema(cfg, role) {
            let tensor = if name.ends_with(".w") {
                let data: Vec<f64> = (0..shape.iter().product::<usize>())
                    .map(|_| {
                        let z: f64 = rng.sample(rand_distr::StandardNormal);
                        INIT_STD * z
                    })
                    .collect();
                ArrayD::from_shape_vec(IxDyn(&shape), data).expect("length matches shape")
            } else if name.ends_with(".gamma") || name.ends_with(".running_var") {
                ArrayD::from_elem(IxDyn(&shape), 1.0)
            } else {
                ArrayD::zeros(IxDyn(&shape))
            };
            map.insert(name, tensor);
        }
        ModelParams::new(role, map)
    };
    Ok((build(Role::Generator, 0), build(Role::Discriminator, 1)))
}

fn t<'a>(params: &'a ModelParams, name: &str) -> &'a ArrayD<f64> {
    params.get(name).expect("schema checked before use")
}

fn check_labels(
    cfg: &NetConfig,
    labels: Option<&Array2<f64>>,
    m: usize,
) -> Result<(), GenError> {
    match (cfg.conditional, labels) {
        (false, Some(_)) => Err(GenError::LabelMismatch {
            state: "present",
            conditional: false,
        }),
        (true, None) => Err(GenError::LabelMismatch {
            state: "absent",
            conditional: true,
        }),
        (true, Some(l)) if l.dim() != (m, cfg.n_labels) => Err(GenError::LabelShape {
            got: vec![l.dim().0, l.dim().1],
            m,
            n_labels: cfg.n_labels,
        }),
        _ => Ok(()),
    }
}

/// Noise (plus optional label columns) as the generator's FC input.
fn gen_input(
    cfg: &NetConfig,
    noise: &NoiseBatch,
    labels: Option<&Array2<f64>>,
) -> Result<Array2<f64>, GenError> {
    let (m, dim) = noise.vectors.dim();
    if m == 0 {
        return Err(GenError::EmptyBatch);
    }
    if dim != cfg.noise_dim {
        return Err(GenError::NoiseDimMismatch {
            got: dim,
            expected: cfg.noise_dim,
        });
    }
    check_labels(cfg, labels, m)?;
    let mut x0 = Array2::zeros((m, cfg.g_in()));
    x0.slice_mut(ndarray::s![.., ..dim]).assign(&noise.vectors);
    if let Some(l) = labels {
        x0.slice_mut(ndarray::s![.., dim..]).assign(l);
    }
    Ok(x0)
}

/// Grid batch (plus optional constant label planes) as discriminator input.
fn disc_input(
    cfg: &NetConfig,
    grids: &Array4<f64>,
    labels: Option<&Array2<f64>>,
) -> Result<Array4<f64>, GenError> {
    let (m, ch, h, w) = grids.dim();
    if m == 0 {
        return Err(GenError::EmptyBatch);
    }
    if ch != 1 || h != cfg.grid_side || w != cfg.grid_side {
        return Err(GenError::GridShape {
            got: m,
            side: h,
            expected: cfg.grid_side,
        });
    }
    check_labels(cfg, labels, m)?;
    if cfg.n_labels == 0 {
        return Ok(grids.clone());
    }
    let mut x = Array4::zeros((m, cfg.d_in_ch(), h, w));
    x.slice_mut(ndarray::s![.., 0..1, .., ..]).assign(grids);
    if let Some(l) = labels {
        for ni in 0..m {
            for li in 0..cfg.n_labels {
                x.slice_mut(ndarray::s![ni, 1 + li, .., ..]).fill(l[[ni, li]]);
            }
        }
    }
    Ok(x)
}

/// Everything the generator backward needs from its forward.
#[derive(Debug, Clone)]
pub struct GenCache {
    x0: Array2<f64>,
    bn0: BnCache,
    pre0: Array4<f64>,
    a0: Array4<f64>,
    bn1: BnCache,
    pre1: Array4<f64>,
    a1: Array4<f64>,
    /// Sigmoid output `[m, 1, side, side]`.
    pub y: Array4<f64>,
}

/// Train-mode generator forward with cache: uses batch statistics in the
/// normalization layers and advances their running statistics in place.
pub fn generator_forward_train(
    params: &mut ModelParams,
    cfg: &NetConfig,
    noise: &NoiseBatch,
    labels: Option<&Array2<f64>>,
) -> Result<(Array4<f64>, GenCache), GenError> {
    check_params(params, cfg)?;
    let x0 = gen_input(cfg, noise, labels)?;
    let m = x0.dim().0;
    let (c1, _c2) = cfg.g_channels;
    let s0 = cfg.s0();

    let h = linear_fwd(&x0, t(params, "g.fc.w"), t(params, "g.fc.b"));
    let h4 = h
        .into_shape_with_order((m, c1, s0, s0))
        .expect("fc output is standard layout");

    let bn_train = |params: &mut ModelParams, layer: &str, x: &Array4<f64>| {
        let gamma = t(params, &format!("{layer}.gamma")).clone();
        let beta = t(params, &format!("{layer}.beta")).clone();
        let mut rm = t(params, &format!("{layer}.running_mean")).clone();
        let mut rv = t(params, &format!("{layer}.running_var")).clone();
        let out = bn_train_fwd(x, &gamma, &beta, &mut rm, &mut rv);
        *params.get_mut(&format!("{layer}.running_mean")).unwrap() = rm;
        *params.get_mut(&format!("{layer}.running_var")).unwrap() = rv;
        out
    };

    let (pre0, bn0) = bn_train(params, "g.bn0", &h4);
    let a0 = relu_fwd(&pre0);
    let t1 = tconv_fwd(&a0, t(params, "g.tconv1.w"), t(params, "g.tconv1.b"), STRIDE, PAD);
    let (pre1, bn1) = bn_train(params, "g.bn1", &t1);
    let a1 = relu_fwd(&pre1);
    let t2 = tconv_fwd(&a1, t(params, "g.tconv2.w"), t(params, "g.tconv2.b"), STRIDE, PAD);
    let y = sigmoid_fwd(&t2);
    Ok((
        y.clone(),
        GenCache {
            x0,
            bn0,
            pre0,
            a0,
            bn1,
            pre1,
            a1,
            y,
        },
    ))
}

/// Generator forward as a pure function: `Eval` uses running statistics;
/// `Train` uses batch statistics but leaves the stored running statistics
/// untouched (it normalizes through a private copy). Returns `[m, side,
/// side]` grids with every cell in `[0, 1]`.
pub fn generator_forward(
    params: &ModelParams,
    cfg: &NetConfig,
    noise: &NoiseBatch,
    labels: Option<&Array2<f64>>,
    mode: Mode,
) -> Result<Array3<f64>, GenError> {
    let y = match mode {
        Mode::Train => {
            let mut scratch = params.clone();
            generator_forward_train(&mut scratch, cfg, noise, labels)?.0
        }
        Mode::Eval => {
            check_params(params, cfg)?;
            let x0 = gen_input(cfg, noise, labels)?;
            let m = x0.dim().0;
            let (c1, _) = cfg.g_channels;
            let s0 = cfg.s0();
            let h = linear_fwd(&x0, t(params, "g.fc.w"), t(params, "g.fc.b"));
            let h4 = h
                .into_shape_with_order((m, c1, s0, s0))
                .expect("fc output is standard layout");
            let bn = |layer: &str, x: &Array4<f64>| {
                bn_eval_fwd(
                    x,
                    t(params, &format!("{layer}.gamma")),
                    t(params, &format!("{layer}.beta")),
                    t(params, &format!("{layer}.running_mean")),
                    t(params, &format!("{layer}.running_var")),
                )
            };
            let a0 = relu_fwd(&bn("g.bn0", &h4));
            let t1 = tconv_fwd(&a0, t(params, "g.tconv1.w"), t(params, "g.tconv1.b"), STRIDE, PAD);
            let a1 = relu_fwd(&bn("g.bn1", &t1));
            let t2 = tconv_fwd(&a1, t(params, "g.tconv2.w"), t(params, "g.tconv2.b"), STRIDE, PAD);
            sigmoid_fwd(&t2)
        }
    };
    let (m, _, h, w) = y.dim();
    Ok(y
        .into_shape_with_order((m, h, w))
        .expect("single output channel"))
}

/// Draws `count` scenarios from a trained generator in eval mode and returns
/// them as `[count, side*side]` rows, each grid flattened row-major (time
/// order matches the training windows).
///
/// Noise comes from one stream seeded by `seed` and is consumed in fixed
/// order, so scenario `i` depends only on `(seed, i)`; calls that differ only
/// in `label` therefore reuse the same noise vectors, which keeps per-label
/// sets comparable row by row. Batches the forward passes to bound memory.
pub fn sample_generator(
    params: &ModelParams,
    cfg: &NetConfig,
    count: usize,
    seed: u64,
    label: Option<usize>,
) -> Result<Array2<f64>, GenError> {
    cfg.validate()?;
    if count == 0 {
        return Err(GenError::EmptyBatch);
    }
    match label {
        Some(l) if !cfg.conditional || l >= cfg.n_labels => {
            return Err(GenError::BadConfig(format!(
                "label {l} invalid for a net with n_labels {}",
                cfg.n_labels
            )));
        }
        None if cfg.conditional => {
            return Err(GenError::LabelMismatch {
                state: "absent",
                conditional: true,
            });
        }
        _ => {}
    }
    let side = cfg.grid_side;
    let mut rows = Array2::zeros((count, side * side));
    let mut rng = rng::derive(seed, Stream::Generate, &[]);
    const CHUNK: usize = 64;
    let mut done = 0;
    while done < count {
        let m = CHUNK.min(count - done);
        let noise = NoiseBatch::draw(&mut rng, m, cfg.noise_dim);
        let labels = label.map(|l| {
            let mut one_hot = Array2::zeros((m, cfg.n_labels));
            one_hot.column_mut(l).fill(1.0);
            one_hot
        });
        let grids = generator_forward(params, cfg, &noise, labels.as_ref(), Mode::Eval)?;
        for i in 0..m {
            for (j, v) in grids.index_axis(ndarray::Axis(0), i).iter().enumerate() {
                rows[[done + i, j]] = *v;
            }
        }
        done += m;
    }
    Ok(rows)
}

/// Backpropagate `dy` (gradient w.r.t. the sigmoid output, `[m, 1, side,
/// side]`) through the cached generator forward. Running-statistic entries
/// get zero gradients.
pub fn generator_backward(
    params: &ModelParams,
    cfg: &NetConfig,
    cache: &GenCache,
    dy: &Array4<f64>,
) -> ParamGrads {
    let m = dy.dim().0;
    let (c1, _) = cfg.g_channels;
    let s0 = cfg.s0();

    let dt2 = sigmoid_bwd(dy, &cache.y);
    let dw2 = tconv_bwd_weight(&cache.a1, &dt2, KERNEL, STRIDE, PAD);
    let db2 = bias_grad(&dt2);
    let da1 = tconv_bwd_input(&dt2, t(params, "g.tconv2.w"), STRIDE, PAD);

    let dpre1 = relu_bwd(&da1, &cache.pre1);
    let (dt1, dg1, dbeta1) = bn_bwd(&dpre1, t(params, "g.bn1.gamma"), &cache.bn1);

    let dw1 = tconv_bwd_weight(&cache.a0, &dt1, KERNEL, STRIDE, PAD);
    let db1 = bias_grad(&dt1);
    let da0 = tconv_bwd_input(&dt1, t(params, "g.tconv1.w"), STRIDE, PAD);

    let dpre0 = relu_bwd(&da0, &cache.pre0);
    let (dh4, dg0, dbeta0) = bn_bwd(&dpre0, t(params, "g.bn0.gamma"), &cache.bn0);
    let dh = dh4
        .into_shape_with_order((m, c1 * s0 * s0))
        .expect("standard layout");
    let (_dx0, dfw, dfb) = linear_bwd(&dh, &cache.x0, t(params, "g.fc.w"));

    let zeros = |n: usize| ArrayD::<f64>::zeros(IxDyn(&[n]));
    let mut grads = TensorMap::new();
    grads.insert("g.fc.w", dfw);
    grads.insert("g.fc.b", dfb);
    grads.insert("g.bn0.gamma", dg0);
    grads.insert("g.bn0.beta", dbeta0);
    grads.insert("g.bn0.running_mean", zeros(c1));
    grads.insert("g.bn0.running_var", zeros(c1));
    grads.insert("g.tconv1.w", dw1);
    grads.insert("g.tconv1.b", db1);
    let c2 = cfg.g_channels.1;
    grads.insert("g.bn1.gamma", dg1);
    grads.insert("g.bn1.beta", dbeta1);
    grads.insert("g.bn1.running_mean", zeros(c2));
    grads.insert("g.bn1.running_var", zeros(c2));
    grads.insert("g.tconv2.w", dw2);
    grads.insert("g.tconv2.b", db2);
    grads
}

/// Everything the discriminator backward needs from its forward.
#[derive(Debug, Clone)]
pub struct DiscCache {
    x_in: Array4<f64>,
    pre1: Array4<f64>,
    a1: Array4<f64>,
    bn2: BnCache,
    bnout: Array4<f64>,
    a2flat: Array2<f64>,
}

/// Train-mode discriminator forward with cache; advances batch-norm running
/// statistics in place. `grids` is `[m, 1, side, side]`.
pub fn discriminator_forward_train(
    params: &mut ModelParams,
    cfg: &NetConfig,
    grids: &Array4<f64>,
    labels: Option<&Array2<f64>>,
) -> Result<(Array1<f64>, DiscCache), GenError> {
    check_params(params, cfg)?;
    let x_in = disc_input(cfg, grids, labels)?;
    let m = x_in.dim().0;
    let (_, d2) = cfg.d_channels;
    let s0 = cfg.s0();

    let pre1 = conv_fwd(&x_in, t(params, "d.conv1.w"), t(params, "d.conv1.b"), STRIDE, PAD);
    let a1 = leaky_fwd(&pre1, cfg.leaky_slope);
    let c2out = conv_fwd(&a1, t(params, "d.conv2.w"), t(params, "d.conv2.b"), STRIDE, PAD);

    let gamma = t(params, "d.bn2.gamma").clone();
    let beta = t(params, "d.bn2.beta").clone();
    let mut rm = t(params, "d.bn2.running_mean").clone();
    let mut rv = t(params, "d.bn2.running_var").clone();
    let (bnout, bn2) = bn_train_fwd(&c2out, &gamma, &beta, &mut rm, &mut rv);
    *params.get_mut("d.bn2.running_mean").unwrap() = rm;
    *params.get_mut("d.bn2.running_var").unwrap() = rv;

    let a2 = leaky_fwd(&bnout, cfg.leaky_slope);
    let a2flat = a2
        .into_shape_with_order((m, d2 * s0 * s0))
        .expect("standard layout");
    let scores2 = linear_fwd(&a2flat, t(params, "d.fc.w"), t(params, "d.fc.b"));
    let scores = scores2.column(0).to_owned();
    Ok((
        scores,
        DiscCache {
            x_in,
            pre1,
            a1,
            bn2,
            bnout,
            a2flat,
        },
    ))
}

/// Discriminator forward as a pure function of its inputs; one unbounded
/// finite scalar per grid. `Train` normalizes with batch statistics through
/// a private copy; `Eval` uses stored running statistics.
pub fn discriminator_forward(
    params: &ModelParams,
    cfg: &NetConfig,
    grids: &Array3<f64>,
    labels: Option<&Array2<f64>>,
    mode: Mode,
) -> Result<Array1<f64>, GenError> {
    let (m, h, w) = grids.dim();
    let g4 = grids
        .to_owned()
        .into_shape_with_order((m, 1, h, w))
        .expect("standard layout");
    match mode {
        Mode::Train => {
            let mut scratch = params.clone();
            Ok(discriminator_forward_train(&mut scratch, cfg, &g4, labels)?.0)
        }
        Mode::Eval => {
            check_params(params, cfg)?;
            let x_in = disc_input(cfg, &g4, labels)?;
            let (_, d2) = cfg.d_channels;
            let s0 = cfg.s0();
            let pre1 = conv_fwd(&x_in, t(params, "d.conv1.w"), t(params, "d.conv1.b"), STRIDE, PAD);
            let a1 = leaky_fwd(&pre1, cfg.leaky_slope);
            let c2out = conv_fwd(&a1, t(params, "d.conv2.w"), t(params, "d.conv2.b"), STRIDE, PAD);
            let bnout = bn_eval_fwd(
                &c2out,
                t(params, "d.bn2.gamma"),
                t(params, "d.bn2.beta"),
                t(params, "d.bn2.running_mean"),
                t(params, "d.bn2.running_var"),
            );
            let a2 = leaky_fwd(&bnout, cfg.leaky_slope);
            let a2flat = a2
                .into_shape_with_order((m, d2 * s0 * s0))
                .expect("standard layout");
            let scores2 = linear_fwd(&a2flat, t(params, "d.fc.w"), t(params, "d.fc.b"));
            Ok(scores2.column(0).to_owned())
        }
    }
}

/// Backpropagate per-sample score gradients through the cached discriminator
/// forward. Returns the parameter gradients and the gradient w.r.t. the
/// input grids (`[m, 1, side, side]`), which is how generator updates reach
/// through the discriminator.
pub fn discriminator_backward(
    params: &ModelParams,
    cfg: &NetConfig,
    cache: &DiscCache,
    dscores: &Array1<f64>,
) -> (ParamGrads, Array4<f64>) {
    let m = dscores.len();
    let (d1, d2) = cfg.d_channels;
    let s0 = cfg.s0();
    let side = cfg.grid_side;

    let dy2 = dscores.clone().into_shape_with_order((m, 1)).expect("column");
    let (dflat, dfcw, dfcb) = linear_bwd(&dy2, &cache.a2flat, t(params, "d.fc.w"));
    let da2 = dflat
        .into_shape_with_order((m, d2, s0, s0))
        .expect("standard layout");
    let dbnout = leaky_bwd(&da2, &cache.bnout, cfg.leaky_slope);
    let (dc2, dg2, dbeta2) = bn_bwd(&dbnout, t(params, "d.bn2.gamma"), &cache.bn2);

    let dw2 = conv_bwd_weight(&cache.a1, &dc2, KERNEL, STRIDE, PAD);
    let db2 = bias_grad(&dc2);
    let da1 = conv_bwd_input(&dc2, t(params, "d.conv2.w"), STRIDE, PAD, side / 2, side / 2);

    let dpre1 = leaky_bwd(&da1, &cache.pre1, cfg.leaky_slope);
    let dw1 = conv_bwd_weight(&cache.x_in, &dpre1, KERNEL, STRIDE, PAD);
    let db1 = bias_grad(&dpre1);
    let dx_in = conv_bwd_input(&dpre1, t(params, "d.conv1.w"), STRIDE, PAD, side, side);

    let mut grads = TensorMap::new();
    grads.insert("d.conv1.w", dw1);
    grads.insert("d.conv1.b", db1);
    grads.insert("d.conv2.w", dw2);
    grads.insert("d.conv2.b", db2);
    grads.insert("d.bn2.gamma", dg2);
    grads.insert("d.bn2.beta", dbeta2);
    grads.insert("d.bn2.running_mean", ArrayD::zeros(IxDyn(&[d2])));
    grads.insert("d.bn2.running_var", ArrayD::zeros(IxDyn(&[d2])));
    grads.insert("d.fc.w", dfcw);
    grads.insert("d.fc.b", dfcb);
    let _ = d1;

    let dgrids = dx_in.slice(ndarray::s![.., 0..1, .., ..]).to_owned();
    (grads, dgrids)
}
