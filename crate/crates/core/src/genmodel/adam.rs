//! Bias-corrected adaptive-moment (Adam) parameter updates.

use super::params::{ModelParams, ParamGrads, TensorMap};
use super::GenError;
use serde::{Deserialize, Serialize};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamHyper {
    /// Learning rate α.
    pub alpha: f64,
    /// First-moment decay β₁.
    pub beta1: f64,
    /// Second-moment decay β₂.
    pub beta2: f64,
    /// Denominator floor ε, added after the square root.
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            alpha: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub hyper: AdamHyper,
    /// Completed update steps.
    pub t: u64,
    m: TensorMap,
    v: TensorMap,
}

impl OptState {
    /// Fresh zeroed state matching a parameter schema.
    pub fn new(params: &ModelParams, hyper: AdamHyper) -> Self {
        Self {
            hyper,
            t: 0,
            m: params.tensors().zeros_like(),
            v: params.tensors().zeros_like(),
        }
    }

    pub fn first_moments(&self) -> &TensorMap {
        &self.m
    }

    pub fn second_moments(&self) -> &TensorMap {
        &self.v
    }
}

/// One Adam step in place:
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − α·(m/(1−β₁ᵗ)) / (√(v/(1−β₂ᵗ)) + ε)`.
///
/// Errors on the first non-finite gradient value, naming the parameter, and
/// leaves params and state untouched in that case.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ParamGrads,
    opt: &mut OptState,
) -> Result<(), GenError> {
    if !params.tensors().same_schema(grads) {
        let name = grads
            .names()
            .find(|n| params.get(n).map(|t| t.shape() != grads.get(n).unwrap().shape()).unwrap_or(true))
            .unwrap_or("<schema length>")
            .to_string();
        return Err(GenError::UnknownParam(name));
    }
    for (name, g) in grads.iter() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(GenError::NonFiniteGrad(name.to_string()));
        }
    }
    opt.t += 1;
    let t = opt.t as i32;
    let AdamHyper { alpha, beta1, beta2, eps } = opt.hyper;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (name, g) in grads.iter() {
        let m = opt.m.get_mut(name).expect("schema checked");
        let v = opt.v.get_mut(name).expect("schema checked");
        let p = params.get_mut(name).expect("schema checked");
        ndarray::Zip::from(p)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= alpha * mhat / (vhat.sqrt() + eps);
            });
    }
    Ok(())
}
