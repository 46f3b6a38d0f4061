//! Gaussian-copula scenario generation: empirical marginals coupled by a
//! Gaussian correlation structure.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::BaselineError;
use crate::genmodel::TensorContainer;
use crate::linalg::{psd_factor, rebuild_sym, sym_eigen};
use crate::metrics::{ScenarioSet, Source};
use crate::rng::{self, Stream};

/// Eigenvalue floor applied when repairing the correlation matrix.
const EIG_FLOOR: f64 = 1e-10;

/// One dimension's empirical CDF table.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    /// Training values in ascending order.
    pub values: Vec<f64>,
    /// Plotting positions `k/(n+1)` for `k = 1..=n`.
    pub positions: Vec<f64>,
    /// Constant training column; sampling returns the constant.
    pub degenerate: bool,
}

impl MarginalTable {
    /// Inverse empirical CDF with linear interpolation between table
    /// points; clamps to the endpoints, never extrapolating.
    pub fn inverse(&self, u: f64) -> f64 {
        let v = &self.values;
        if self.degenerate {
            return v[0];
        }
        let p = &self.positions;
        let n = v.len();
        if u <= p[0] {
            return v[0];
        }
        if u >= p[n - 1] {
            return v[n - 1];
        }
        let k = p.partition_point(|&pk| pk < u);
        let t = (u - p[k - 1]) / (p[k] - p[k - 1]);
        v[k - 1] + t * (v[k] - v[k - 1])
    }
}

/// Fitted copula: per-dimension marginal tables plus the correlation of the
/// Gaussian-transformed training data.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaModel {
    pub marginals: Vec<MarginalTable>,
    /// Symmetric, unit-diagonal, PSD (after repair) correlation matrix.
    pub corr: Array2<f64>,
    pub site_id: String,
    pub n_train: usize,
}

/// Fits marginals and Gaussian correlation to a training set.
///
/// Each column maps through its empirical CDF (midranks for ties, plotting
/// position `rank/(n+1)`) and the standard normal quantile; the correlation
/// of the transformed matrix is repaired to PSD by clipping eigenvalues at
/// `1e-10` and rescaling to unit diagonal. Constant columns are flagged
/// degenerate and excluded from the correlation (row/column zero).
pub fn fit_copula(train: &ScenarioSet) -> Result<CopulaModel, BaselineError> {
    let n = train.len();
    if n < 10 {
        return Err(BaselineError::TooFew { need: 10, got: n });
    }
    let d = train.width();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");

    let positions: Vec<f64> = (1..=n).map(|k| k as f64 / (n as f64 + 1.0)).collect();
    let mut z = Array2::zeros((n, d));
    let mut marginals = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| train.row(i)[j]).collect();
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let degenerate = sorted[0] == sorted[n - 1];
        if !degenerate {
            // Midranks: tied values share the average of their ranks so the
            // transform is well-defined on atoms (e.g. clamped night hours).
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite values"));
            let mut lo = 0;
            while lo < n {
                let mut hi = lo;
                while hi + 1 < n && col[order[hi + 1]] == col[order[lo]] {
                    hi += 1;
                }
                let midrank = (lo + hi) as f64 / 2.0 + 1.0;
                let p = midrank / (n as f64 + 1.0);
                let q = normal.inverse_cdf(p);
                for &idx in &order[lo..=hi] {
                    z[[idx, j]] = q;
                }
                lo = hi + 1;
            }
        }
        marginals.push(MarginalTable {
            values: sorted,
            positions: positions.clone(),
            degenerate,
        });
    }

    let degenerate: Vec<bool> = marginals.iter().map(|m| m.degenerate).collect();
    let corr = repair_psd(&transformed_correlation(&z, &degenerate));
    Ok(CopulaModel {
        marginals,
        corr,
        site_id: train.site_id.clone(),
        n_train: n,
    })
}

/// Pearson correlation of the columns of `z`; degenerate columns get zero
/// off-diagonals and a unit diagonal.
fn transformed_correlation(z: &Array2<f64>, degenerate: &[bool]) -> Array2<f64> {
    let (n, d) = z.dim();
    let mut standardized = z.clone();
    let mut valid = vec![true; d];
    for j in 0..d {
        if degenerate[j] {
            valid[j] = false;
            continue;
        }
        let col = z.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var <= 0.0 {
            valid[j] = false;
            continue;
        }
        let sd = var.sqrt();
        standardized
            .column_mut(j)
            .mapv_inplace(|v| (v - mean) / sd);
    }
    let mut corr = standardized.t().dot(&standardized) / n as f64;
    for j in 0..d {
        if !valid[j] {
            corr.row_mut(j).fill(0.0);
            corr.column_mut(j).fill(0.0);
        }
        corr[[j, j]] = 1.0;
    }
    corr
}

/// Clips eigenvalues at [`EIG_FLOOR`] and rescales back to unit diagonal.
pub(crate) fn repair_psd(corr: &Array2<f64>) -> Array2<f64> {
    let (vals, vecs) = sym_eigen(corr);
    let clipped: Vec<f64> = vals.iter().map(|&l| l.max(EIG_FLOOR)).collect();
    let mut repaired = rebuild_sym(&clipped, &vecs);
    let d = repaired.nrows();
    let scale: Vec<f64> = (0..d)
        .map(|i| repaired[[i, i]].max(EIG_FLOOR).sqrt())
        .collect();
    for i in 0..d {
        for j in 0..d {
            repaired[[i, j]] /= scale[i] * scale[j];
        }
    }
    // Exact symmetry and unit diagonal against round-off.
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (repaired[[i, j]] + repaired[[j, i]]);
            repaired[[i, j]] = v;
            repaired[[j, i]] = v;
        }
        repaired[[i, i]] = 1.0;
    }
    repaired
}

/// Draws `count` scenarios by inverse-transform sampling.
///
/// Scenario `i` uses its own stream derived from `(seed, i)`, so sampling
/// can split across workers without changing results.
pub fn sample_copula(
    model: &CopulaModel,
    count: usize,
    seed: u64,
) -> Result<ScenarioSet, BaselineError> {
    let d = model.marginals.len();
    let (vals, vecs) = sym_eigen(&model.corr);
    let factor = psd_factor(&vals, &vecs);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");

    let rows: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let mut rng = rng::derive(seed, Stream::Copula, &[i as u64]);
            let z: Vec<f64> = (0..d)
                .map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal))
                .collect();
            let x = factor.dot(&Array1::from(z));
            model
                .marginals
                .iter()
                .zip(x.iter())
                .map(|(marginal, &g)| marginal.inverse(normal.cdf(g)))
                .collect()
        })
        .collect();
    Ok(ScenarioSet::from_rows(
        &rows,
        Source::Generated,
        model.site_id.clone(),
    )?)
}

/// Container metadata for a serialized copula model.
#[derive(Debug, Serialize, Deserialize)]
pub struct CopulaMeta {
    pub kind: String,
    pub site_id: String,
    pub n_train: u64,
}

impl CopulaModel {
    /// Packs the model into the self-describing tensor container.
    pub fn to_container(&self) -> TensorContainer {
        let meta = CopulaMeta {
            kind: "copula".into(),
            site_id: self.site_id.clone(),
            n_train: self.n_train as u64,
        };
        let mut container =
            TensorContainer::new(serde_json::to_string(&meta).expect("meta serializes"));
        let d = self.marginals.len();
        let n = self.n_train;
        let mut values = Array2::zeros((d, n));
        let mut flags = Array1::zeros(d);
        for (j, marginal) in self.marginals.iter().enumerate() {
            for (k, &v) in marginal.values.iter().enumerate() {
                values[[j, k]] = v;
            }
            flags[j] = if marginal.degenerate { 1.0 } else { 0.0 };
        }
        container.push_tensor("copula.corr", &self.corr.clone().into_dyn());
        container.push_tensor("copula.values", &values.into_dyn());
        container.push_tensor("copula.degenerate", &flags.into_dyn());
        container
    }

    /// Rebuilds a model from a container written by [`Self::to_container`].
    pub fn from_container(container: &TensorContainer) -> Result<Self, BaselineError> {
        let meta: CopulaMeta = serde_json::from_str(&container.meta_json)
            .map_err(|e| BaselineError::Model(format!("bad metadata: {e}")))?;
        if meta.kind != "copula" {
            return Err(BaselineError::Model(format!(
                "expected kind \"copula\", got {:?}",
                meta.kind
            )));
        }
        let entry = |name: &str| {
            container
                .get(name)
                .ok_or_else(|| BaselineError::Model(format!("missing tensor {name}")))
        };
        let corr_e = entry("copula.corr")?;
        let values_e = entry("copula.values")?;
        let flags_e = entry("copula.degenerate")?;
        let n = meta.n_train as usize;
        let d = flags_e.data.len();
        if corr_e.shape != [d, d] || values_e.shape != [d, n] {
            return Err(BaselineError::Model("tensor shapes inconsistent".into()));
        }
        let corr = Array2::from_shape_vec((d, d), corr_e.data.clone())
            .map_err(|e| BaselineError::Model(e.to_string()))?;
        let positions: Vec<f64> = (1..=n).map(|k| k as f64 / (n as f64 + 1.0)).collect();
        let marginals = (0..d)
            .map(|j| MarginalTable {
                values: values_e.data[j * n..(j + 1) * n].to_vec(),
                positions: positions.clone(),
                degenerate: flags_e.data[j] != 0.0,
            })
            .collect();
        Ok(Self {
            marginals,
            corr,
            site_id: meta.site_id,
            n_train: n,
        })
    }
}
