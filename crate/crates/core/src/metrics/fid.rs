//! Fréchet distance between Gaussian fits of two scenario sets.

use log::warn;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_same_width, MetricError, ScenarioSet};
use crate::linalg::{rebuild_sym, sym_eigen};

/// How the mean-difference term enters the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanNorm {
    /// `‖μ_real − μ_gen‖²`, the standard Fréchet form.
    #[default]
    Squared,
    /// `‖μ_real − μ_gen‖`, as occasionally reported.
    Unsquared,
}

/// Options for [`fid_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FidOptions {
    pub mean_norm: MeanNorm,
}

/// Fréchet distance with default options (squared mean term).
pub fn fid(real: &ScenarioSet, gen: &ScenarioSet) -> Result<f64, MetricError> {
    fid_with(real, gen, FidOptions::default())
}

/// Fréchet distance between the Gaussian fits of the two sets:
/// `‖μ_r − μ_g‖² + Tr(Σ_r + Σ_g − 2(Σ_r Σ_g)^{1/2})`.
///
/// The cross square root uses the symmetric form `√Σ_r · Σ_g · √Σ_r` with
/// eigenvalues clipped at zero. If the product matrix is indefinite beyond
/// `1e-6 · trace`, a warning is logged and the clipped value is still
/// returned. Tiny negative totals from eigensolver round-off clamp to zero.
pub fn fid_with(
    real: &ScenarioSet,
    gen: &ScenarioSet,
    opts: FidOptions,
) -> Result<f64, MetricError> {
    check_same_width(real, gen)?;
    let got = real.len().min(gen.len());
    if got < 2 {
        return Err(MetricError::TooFew { need: 2, got });
    }

    let (mu_r, cov_r) = moments(real.matrix());
    let (mu_g, cov_g) = moments(gen.matrix());

    let sqrt_r = sqrt_psd(&cov_r);
    let mut cross = sqrt_r.dot(&cov_g).dot(&sqrt_r);
    symmetrize(&mut cross);
    let tr_cross_sqrt = trace_sqrt_clipped(&cross);

    let diff = &mu_r - &mu_g;
    let mean_sq: f64 = diff.iter().map(|d| d * d).sum();
    let mean_term = match opts.mean_norm {
        MeanNorm::Squared => mean_sq,
        MeanNorm::Unsquared => mean_sq.sqrt(),
    };

    let value = mean_term + trace(&cov_r) + trace(&cov_g) - 2.0 * tr_cross_sqrt;
    Ok(value.max(0.0))
}

/// Row mean and unbiased sample covariance of a `[n, d]` matrix.
fn moments(x: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = x.nrows() as f64;
    let mu = x.mean_axis(Axis(0)).expect("non-empty set");
    let centered = x - &mu.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (n - 1.0);
    (mu, cov)
}

fn trace(a: &Array2<f64>) -> f64 {
    a.diag().sum()
}

fn symmetrize(a: &mut Array2<f64>) {
    let at = a.t().to_owned();
    *a += &at;
    *a *= 0.5;
}

/// Symmetric PSD square root via eigendecomposition, eigenvalues clipped
/// at zero.
fn sqrt_psd(a: &Array2<f64>) -> Array2<f64> {
    let (vals, vecs) = sym_eigen(a);
    let sqrt_vals: Vec<f64> = vals.iter().map(|l| l.max(0.0).sqrt()).collect();
    rebuild_sym(&sqrt_vals, &vecs)
}

/// `Tr(√A)` for symmetric `A`, clipping negative eigenvalues to zero and
/// warning when the indefiniteness exceeds `1e-6 · trace(A)`.
fn trace_sqrt_clipped(a: &Array2<f64>) -> f64 {
    let (vals, _) = sym_eigen(a);
    let tr: f64 = vals.iter().sum();
    let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-6 * tr.abs().max(f64::MIN_POSITIVE);
    if min_eig < -tol {
        warn!(
            "covariance product indefinite beyond tolerance (min eigenvalue {min_eig:.3e}, trace {tr:.3e}); clipping"
        );
    }
    vals.iter().map(|l| l.max(0.0).sqrt()).sum()
}
