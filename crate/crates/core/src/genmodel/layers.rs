//! Dense layer primitives on f64 batch tensors: convolution and transposed
//! convolution via im2col + GEMM, batch normalization, fully-connected
//! layers, and pointwise activations — each with an exact analytic backward.
//!
//! Convolution and its transpose share one set of kernels: a transposed
//! convolution's forward pass is the adjoint (input-gradient) of a
//! convolution, so `tconv_forward` calls [`conv_bwd_input`], its input
//! gradient calls [`conv_fwd_raw`], and its weight gradient calls
//! [`conv_bwd_weight`] with the roles of activation and gradient swapped.

use ndarray::{Array1, Array2, Array4, ArrayView2};

/// Output spatial size of a convolution: `(h + 2p - k)/s + 1`.
pub(crate) fn conv_out(h: usize, k: usize, stride: usize, pad: usize) -> usize {
    (h + 2 * pad - k) / stride + 1
}

/// Output spatial size of a transposed convolution: `(h - 1)s - 2p + k`.
pub(crate) fn tconv_out(h: usize, k: usize, stride: usize, pad: usize) -> usize {
    (h - 1) * stride + k - 2 * pad
}

/// Gather `k`x`k` patches of a padded `[N, C, H, W]` tensor into a
/// `[C*k*k, N*OH*OW]` matrix. Column `(n*OH + i)*OW + j` holds the patch at
/// output position `(i, j)` of sample `n`; out-of-bounds taps read zero.
fn im2col(x: &Array4<f64>, k: usize, stride: usize, pad: usize) -> Array2<f64> {
    let (n, c, h, w) = x.dim();
    let oh = conv_out(h, k, stride, pad);
    let ow = conv_out(w, k, stride, pad);
    let mut cols = Array2::zeros((c * k * k, n * oh * ow));
    for ni in 0..n {
        for ci in 0..c {
            for kh in 0..k {
                for kw in 0..k {
                    let row = (ci * k + kh) * k + kw;
                    for i in 0..oh {
                        let ih = i * stride + kh;
                        if ih < pad || ih >= h + pad {
                            continue;
                        }
                        for j in 0..ow {
                            let iw = j * stride + kw;
                            if iw < pad || iw >= w + pad {
                                continue;
                            }
                            cols[[row, (ni * oh + i) * ow + j]] =
                                x[[ni, ci, ih - pad, iw - pad]];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add inverse of [`im2col`]: accumulate patch columns back into a
/// `[N, C, H, W]` tensor.
fn col2im(
    cols: &Array2<f64>,
    (n, c, h, w): (usize, usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    let oh = conv_out(h, k, stride, pad);
    let ow = conv_out(w, k, stride, pad);
    let mut x = Array4::zeros((n, c, h, w));
    for ni in 0..n {
        for ci in 0..c {
            for kh in 0..k {
                for kw in 0..k {
                    let row = (ci * k + kh) * k + kw;
                    for i in 0..oh {
                        let ih = i * stride + kh;
                        if ih < pad || ih >= h + pad {
                            continue;
                        }
                        for j in 0..ow {
                            let iw = j * stride + kw;
                            if iw < pad || iw >= w + pad {
                                continue;
                            }
                            x[[ni, ci, ih - pad, iw - pad]] +=
                                cols[[row, (ni * oh + i) * ow + j]];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Reorder `[N, F, OH, OW]` into the `[F, N*OH*OW]` layout GEMM wants.
fn to_feature_major(y: &Array4<f64>) -> Array2<f64> {
    let (n, f, oh, ow) = y.dim();
    let mut m = Array2::zeros((f, n * oh * ow));
    for ni in 0..n {
        for fi in 0..f {
            for i in 0..oh {
                for j in 0..ow {
                    m[[fi, (ni * oh + i) * ow + j]] = y[[ni, fi, i, j]];
                }
            }
        }
    }
    m
}

/// Inverse of [`to_feature_major`].
fn from_feature_major(m: &Array2<f64>, n: usize, oh: usize, ow: usize) -> Array4<f64> {
    let f = m.dim().0;
    let mut y = Array4::zeros((n, f, oh, ow));
    for ni in 0..n {
        for fi in 0..f {
            for i in 0..oh {
                for j in 0..ow {
                    y[[ni, fi, i, j]] = m[[fi, (ni * oh + i) * ow + j]];
                }
            }
        }
    }
    y
}

fn weight_matrix(w: &ndarray::ArrayD<f64>) -> ArrayView2<'_, f64> {
    let shape = w.shape();
    let (f, c, kh, kw) = (shape[0], shape[1], shape[2], shape[3]);
    w.view()
        .into_shape_with_order((f, c * kh * kw))
        .expect("weights are standard layout")
}

/// Convolution forward without bias: weight `[F, C, K, K]`, input
/// `[N, C, H, W]` → output `[N, F, OH, OW]`.
pub(crate) fn conv_fwd_raw(
    x: &Array4<f64>,
    w: &ndarray::ArrayD<f64>,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    let k = w.shape()[2];
    let (n, _, h, wd) = x.dim();
    let cols = im2col(x, k, stride, pad);
    let ym = weight_matrix(w).dot(&cols);
    from_feature_major(&ym, n, conv_out(h, k, stride, pad), conv_out(wd, k, stride, pad))
}

/// Convolution forward with per-feature bias.
pub(crate) fn conv_fwd(
    x: &Array4<f64>,
    w: &ndarray::ArrayD<f64>,
    b: &ndarray::ArrayD<f64>,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    let mut y = conv_fwd_raw(x, w, stride, pad);
    for (fi, mut lane) in y.axis_iter_mut(ndarray::Axis(1)).enumerate() {
        lane += b[[fi]];
    }
    y
}

/// Gradient of a convolution w.r.t. its input: `dy [N, F, OH, OW]` →
/// `dx [N, C, H, W]`. This is also the forward pass of the transposed
/// convolution whose weight is `w` viewed as `[Cin=F, Cout=C, K, K]`.
pub(crate) fn conv_bwd_input(
    dy: &Array4<f64>,
    w: &ndarray::ArrayD<f64>,
    stride: usize,
    pad: usize,
    h: usize,
    wd: usize,
) -> Array4<f64> {
    let k = w.shape()[2];
    let c = w.shape()[1];
    let (n, _, _, _) = dy.dim();
    let dym = to_feature_major(dy);
    let dcols = weight_matrix(w).t().dot(&dym);
    col2im(&dcols, (n, c, h, wd), k, stride, pad)
}

/// Gradient of a convolution w.r.t. its weight: activation `x [N, C, H, W]`
/// and output gradient `dy [N, F, OH, OW]` → `dw [F, C, K, K]`.
pub(crate) fn conv_bwd_weight(
    x: &Array4<f64>,
    dy: &Array4<f64>,
    k: usize,
    stride: usize,
    pad: usize,
) -> ndarray::ArrayD<f64> {
    let c = x.dim().1;
    let f = dy.dim().1;
    let cols = im2col(x, k, stride, pad);
    let dym = to_feature_major(dy);
    let dwm = dym.dot(&cols.t());
    dwm.into_shape_with_order(ndarray::IxDyn(&[f, c, k, k]))
        .expect("gemm output is standard layout")
}

/// Per-feature bias gradient: sum of `dy` over batch and space.
pub(crate) fn bias_grad(dy: &Array4<f64>) -> ndarray::ArrayD<f64> {
    let f = dy.dim().1;
    let mut db = ndarray::ArrayD::zeros(ndarray::IxDyn(&[f]));
    for (fi, lane) in dy.axis_iter(ndarray::Axis(1)).enumerate() {
        db[[fi]] = lane.sum();
    }
    db
}

/// Transposed-convolution forward: input `[N, Cin, H, W]`, weight
/// `[Cin, Cout, K, K]`, per-`Cout` bias → `[N, Cout, OH, OW]`.
pub(crate) fn tconv_fwd(
    x: &Array4<f64>,
    w: &ndarray::ArrayD<f64>,
    b: &ndarray::ArrayD<f64>,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    let k = w.shape()[2];
    let (_, _, h, wd) = x.dim();
    let mut y = conv_bwd_input(x, w, stride, pad, tconv_out(h, k, stride, pad), tconv_out(wd, k, stride, pad));
    for (ci, mut lane) in y.axis_iter_mut(ndarray::Axis(1)).enumerate() {
        lane += b[[ci]];
    }
    y
}

/// Transposed-convolution input gradient: a plain convolution of `dy` by the
/// same weight.
pub(crate) fn tconv_bwd_input(
    dy: &Array4<f64>,
    w: &ndarray::ArrayD<f64>,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    conv_fwd_raw(dy, w, stride, pad)
}

/// Transposed-convolution weight gradient: the convolution weight gradient
/// with activation and gradient roles swapped.
pub(crate) fn tconv_bwd_weight(
    x: &Array4<f64>,
    dy: &Array4<f64>,
    k: usize,
    stride: usize,
    pad: usize,
) -> ndarray::ArrayD<f64> {
    conv_bwd_weight(dy, x, k, stride, pad)
}

/// Fully-connected forward: `x [N, IN] · w [IN, OUT] + b [OUT]`.
pub(crate) fn linear_fwd(
    x: &Array2<f64>,
    w: &ndarray::ArrayD<f64>,
    b: &ndarray::ArrayD<f64>,
) -> Array2<f64> {
    let (ind, out) = (w.shape()[0], w.shape()[1]);
    let wm = w
        .view()
        .into_shape_with_order((ind, out))
        .expect("weights are standard layout");
    let mut y = x.dot(&wm);
    for (oi, mut col) in y.axis_iter_mut(ndarray::Axis(1)).enumerate() {
        col += b[[oi]];
    }
    y
}

/// Fully-connected backward → `(dx, dw, db)`.
pub(crate) fn linear_bwd(
    dy: &Array2<f64>,
    x: &Array2<f64>,
    w: &ndarray::ArrayD<f64>,
) -> (Array2<f64>, ndarray::ArrayD<f64>, ndarray::ArrayD<f64>) {
    let (ind, out) = (w.shape()[0], w.shape()[1]);
    let wm = w
        .view()
        .into_shape_with_order((ind, out))
        .expect("weights are standard layout");
    let dx_raw = dy.dot(&wm.t());
    // GEMM against a transposed view can come back with reversed strides;
    // later reshapes need standard layout.
    let dx = if dx_raw.is_standard_layout() {
        dx_raw
    } else {
        Array2::from_shape_vec(dx_raw.dim(), dx_raw.iter().copied().collect())
            .expect("length matches shape")
    };
    let dw = x.t().dot(dy).into_dyn();
    let mut db = ndarray::ArrayD::zeros(ndarray::IxDyn(&[out]));
    for (oi, col) in dy.axis_iter(ndarray::Axis(1)).enumerate() {
        db[[oi]] = col.sum();
    }
    (dx, dw, db)
}

/// Numerical floor inside batch-norm standard deviations.
pub(crate) const BN_EPS: f64 = 1e-5;
/// Exponential factor for batch-norm running statistics.
pub(crate) const BN_MOMENTUM: f64 = 0.1;

/// What the batch-norm backward needs from its forward.
#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub xhat: Array4<f64>,
    pub inv_std: Array1<f64>,
}

/// Train-mode batch norm over channel axis 1: normalize with the current
/// batch's per-channel mean and (biased) variance, then scale/shift by
/// `gamma`/`beta`. Running statistics move toward the batch statistics by
/// [`BN_MOMENTUM`].
pub(crate) fn bn_train_fwd(
    x: &Array4<f64>,
    gamma: &ndarray::ArrayD<f64>,
    beta: &ndarray::ArrayD<f64>,
    running_mean: &mut ndarray::ArrayD<f64>,
    running_var: &mut ndarray::ArrayD<f64>,
) -> (Array4<f64>, BnCache) {
    let (n, c, h, w) = x.dim();
    let m = (n * h * w) as f64;
    let mut y = Array4::zeros((n, c, h, w));
    let mut xhat = Array4::zeros((n, c, h, w));
    let mut inv_std = Array1::zeros(c);
    for ci in 0..c {
        let lane = x.index_axis(ndarray::Axis(1), ci);
        let mean = lane.sum() / m;
        let var = lane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let istd = 1.0 / (var + BN_EPS).sqrt();
        inv_std[ci] = istd;
        let (g, b) = (gamma[[ci]], beta[[ci]]);
        for ni in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let xh = (x[[ni, ci, i, j]] - mean) * istd;
                    xhat[[ni, ci, i, j]] = xh;
                    y[[ni, ci, i, j]] = g * xh + b;
                }
            }
        }
        running_mean[[ci]] = (1.0 - BN_MOMENTUM) * running_mean[[ci]] + BN_MOMENTUM * mean;
        running_var[[ci]] = (1.0 - BN_MOMENTUM) * running_var[[ci]] + BN_MOMENTUM * var;
    }
    (y, BnCache { xhat, inv_std })
}

/// Eval-mode batch norm: normalize with stored running statistics, making
/// each sample's output independent of the rest of the batch.
pub(crate) fn bn_eval_fwd(
    x: &Array4<f64>,
    gamma: &ndarray::ArrayD<f64>,
    beta: &ndarray::ArrayD<f64>,
    running_mean: &ndarray::ArrayD<f64>,
    running_var: &ndarray::ArrayD<f64>,
) -> Array4<f64> {
    let (n, c, h, w) = x.dim();
    let mut y = Array4::zeros((n, c, h, w));
    for ci in 0..c {
        let istd = 1.0 / (running_var[[ci]] + BN_EPS).sqrt();
        let (mean, g, b) = (running_mean[[ci]], gamma[[ci]], beta[[ci]]);
        for ni in 0..n {
            for i in 0..h {
                for j in 0..w {
                    y[[ni, ci, i, j]] = g * (x[[ni, ci, i, j]] - mean) * istd + b;
                }
            }
        }
    }
    y
}

/// Train-mode batch-norm backward → `(dx, dgamma, dbeta)`.
///
/// Uses the reduced closed form: with `s1 = Σ dy`, `s2 = Σ dy·x̂` per channel
/// over M = N·H·W elements, `dx = γ·inv_std·(dy − s1/M − x̂·s2/M)`.
pub(crate) fn bn_bwd(
    dy: &Array4<f64>,
    gamma: &ndarray::ArrayD<f64>,
    cache: &BnCache,
) -> (Array4<f64>, ndarray::ArrayD<f64>, ndarray::ArrayD<f64>) {
    let (n, c, h, w) = dy.dim();
    let m = (n * h * w) as f64;
    let mut dx = Array4::zeros((n, c, h, w));
    let mut dgamma = ndarray::ArrayD::zeros(ndarray::IxDyn(&[c]));
    let mut dbeta = ndarray::ArrayD::zeros(ndarray::IxDyn(&[c]));
    for ci in 0..c {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for ni in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let d = dy[[ni, ci, i, j]];
                    s1 += d;
                    s2 += d * cache.xhat[[ni, ci, i, j]];
                }
            }
        }
        dbeta[[ci]] = s1;
        dgamma[[ci]] = s2;
        let coeff = gamma[[ci]] * cache.inv_std[ci];
        for ni in 0..n {
            for i in 0..h {
                for j in 0..w {
                    dx[[ni, ci, i, j]] = coeff
                        * (dy[[ni, ci, i, j]] - s1 / m - cache.xhat[[ni, ci, i, j]] * s2 / m);
                }
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub(crate) fn relu_fwd(x: &Array4<f64>) -> Array4<f64> {
    x.mapv(|v| v.max(0.0))
}

pub(crate) fn relu_bwd(dy: &Array4<f64>, x: &Array4<f64>) -> Array4<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub(crate) fn leaky_fwd(x: &Array4<f64>, slope: f64) -> Array4<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub(crate) fn leaky_bwd(dy: &Array4<f64>, x: &Array4<f64>, slope: f64) -> Array4<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |d, &v| {
        if v <= 0.0 {
            *d *= slope;
        }
    });
    dx
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub(crate) fn sigmoid_fwd(x: &Array4<f64>) -> Array4<f64> {
    x.mapv(sigmoid)
}

/// Sigmoid backward in terms of the forward output `y`.
pub(crate) fn sigmoid_bwd(dy: &Array4<f64>, y: &Array4<f64>) -> Array4<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &v| *d *= v * (1.0 - v));
    dx
}
