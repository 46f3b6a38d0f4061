//! Quantitative evaluation of scenario sets.
//!
//! All metrics operate on flattened scenario vectors (one window = one
//! row), with no learned feature extractor: Fréchet distance ([`fid`]),
//! squared maximum mean discrepancy ([`mmd2`]), a leave-one-out 1-NN
//! two-sample test ([`one_nn_accuracy`]), the energy score
//! ([`energy_score`]), per-lead CRPS ([`crps`]), centroid-matched MAE/RMSE
//! ([`mae_rmse`]), autocorrelation, Pearson correlation matrices, and
//! seeded k-means.
//!
//! Every operation is pure and deterministic; where internals parallelize,
//! partial results are combined in a fixed order so the output is
//! independent of thread count.

mod corr;
mod fid;
mod kmeans;
mod mmd;
mod nn;
mod scores;

pub use corr::{autocorrelation, mean_autocorrelation, pearson_matrix};
pub use fid::{fid, fid_with, FidOptions, MeanNorm};
pub use kmeans::{kmeans, mae_rmse};
pub use mmd::{median_pairwise_distance, mmd2};
pub use nn::one_nn_accuracy;
pub use scores::{crps, energy_score};

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ScenarioWindow;

/// Errors from metric computation or scenario-set handling.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("scenario set is empty")]
    EmptySet,
    #[error("need at least {need} scenarios, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("set sizes must match: {real} real vs {gen} generated")]
    SizeMismatch { real: usize, gen: usize },
    #[error("vector width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("lead {lead} out of range for width {width}")]
    LeadOutOfRange { lead: usize, width: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("series length {len} must exceed max lag {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("k = {k} invalid for a set of {n} scenarios")]
    BadK { k: usize, n: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("bandwidth must be positive and finite, got {0}")]
    BadBandwidth(f64),
    #[error("{path}: line {line}: {msg}")]
    Csv {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether a scenario set holds measured or generated trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Generated,
}

/// A set of flattened scenario vectors, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    data: Array2<f64>,
    pub source: Source,
    pub site_id: String,
}

impl ScenarioSet {
    /// Wraps a `[count, width]` matrix after checking all entries finite.
    pub fn new(
        data: Array2<f64>,
        source: Source,
        site_id: impl Into<String>,
    ) -> Result<Self, MetricError> {
        for ((row, col), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(MetricError::NonFinite { row, col });
            }
        }
        Ok(Self {
            data,
            source,
            site_id: site_id.into(),
        })
    }

    /// Builds a set from equal-width rows.
    pub fn from_rows(
        rows: &[Vec<f64>],
        source: Source,
        site_id: impl Into<String>,
    ) -> Result<Self, MetricError> {
        let first = rows.first().ok_or(MetricError::EmptySet)?;
        let width = first.len();
        let mut data = Array2::zeros((rows.len(), width));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(MetricError::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        Self::new(data, source, site_id)
    }

    /// Flattens scenario windows into rows; the site id comes from the
    /// first window.
    pub fn from_windows(windows: &[ScenarioWindow], source: Source) -> Result<Self, MetricError> {
        let first = windows.first().ok_or(MetricError::EmptySet)?;
        let site_id = first.site_id.clone();
        let rows: Vec<Vec<f64>> = windows.iter().map(|w| w.flatten()).collect();
        Self::from_rows(&rows, source, site_id)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// Length of each scenario vector.
    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.data
    }

    /// Writes one scenario per line as bare comma-separated values.
    pub fn write_csv(&self, path: &Path) -> Result<(), MetricError> {
        let mut wtr = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| csv_err(path, 0, e))?;
        for row in self.data.rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            wtr.write_record(&fields).map_err(|e| csv_err(path, 0, e))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a headerless CSV of equal-width numeric rows.
    pub fn read_csv(
        path: &Path,
        source: Source,
        site_id: impl Into<String>,
    ) -> Result<Self, MetricError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| csv_err(path, 0, e))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| csv_err(path, i + 1, e))?;
            let row: Result<Vec<f64>, _> = record
                .iter()
                .map(|field| field.trim().parse::<f64>())
                .collect();
            rows.push(row.map_err(|e| MetricError::Csv {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        if rows.is_empty() {
            return Err(MetricError::EmptySet);
        }
        Self::from_rows(&rows, source, site_id)
    }
}

fn csv_err(path: &Path, line: usize, e: impl std::fmt::Display) -> MetricError {
    MetricError::Csv {
        path: path.display().to_string(),
        line,
        msg: e.to_string(),
    }
}

/// A single measured trajectory to score generated sets against.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub trajectory: Vec<f64>,
}

impl Observation {
    pub fn new(trajectory: Vec<f64>) -> Result<Self, MetricError> {
        if let Some(col) = trajectory.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite { row: 0, col });
        }
        Ok(Self { trajectory })
    }
}

/// All scores of one generated set against one real set, flat for JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub site_id: String,
    pub fid: f64,
    pub mmd2: f64,
    pub one_nn_acc: f64,
    pub es: f64,
    /// CRPS per evaluated lead index.
    pub crps: Vec<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub n_real: usize,
    pub n_gen: usize,
    pub seed: u64,
}

/// What [`evaluate_pair`] computes and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    /// Cluster count for centroid-matched MAE/RMSE; capped at the smaller
    /// set size.
    pub k_clusters: usize,
    /// Mean-term convention for the Fréchet distance.
    pub fid_mean_norm: MeanNorm,
    /// Lead indices for CRPS. Empty = every index.
    pub crps_leads: Vec<usize>,
    /// Seed for the clustering step.
    pub seed: u64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            k_clusters: 9,
            fid_mean_norm: MeanNorm::Squared,
            crps_leads: Vec::new(),
            seed: 0,
        }
    }
}

/// Runs the full metric battery for one real/generated pair.
///
/// The energy score averages over every real trajectory as the observation;
/// CRPS uses the real trajectories as observations at the requested leads.
/// The 1-NN test truncates both sets to the smaller size, and the cluster
/// count is capped at the smaller set size.
pub fn evaluate_pair(
    real: &ScenarioSet,
    gen: &ScenarioSet,
    spec: &EvalSpec,
) -> Result<MetricReport, MetricError> {
    check_same_width(real, gen)?;
    if real.is_empty() || gen.is_empty() {
        return Err(MetricError::EmptySet);
    }

    let fid_val = fid_with(real, gen, FidOptions { mean_norm: spec.fid_mean_norm })?;
    let mmd_val = mmd2(real, gen, None)?;

    let n_common = real.len().min(gen.len());
    let truncate = |set: &ScenarioSet| -> Result<ScenarioSet, MetricError> {
        let rows: Vec<Vec<f64>> = (0..n_common).map(|i| set.row(i).to_vec()).collect();
        ScenarioSet::from_rows(&rows, set.source, set.site_id.clone())
    };
    let one_nn = if real.len() == gen.len() {
        one_nn_accuracy(real, gen)?
    } else {
        one_nn_accuracy(&truncate(real)?, &truncate(gen)?)?
    };

    let observations: Vec<Observation> = (0..real.len())
        .map(|i| Observation::new(real.row(i).to_vec()))
        .collect::<Result<_, _>>()?;
    let es_mean = observations
        .iter()
        .map(|obs| energy_score(obs, gen))
        .sum::<Result<f64, _>>()?
        / observations.len() as f64;

    let leads: Vec<usize> = if spec.crps_leads.is_empty() {
        (0..gen.width()).collect()
    } else {
        spec.crps_leads.clone()
    };
    let crps_vals = crps(&observations, gen, &leads)?;

    let k = spec.k_clusters.min(n_common);
    let (mae, rmse) = mae_rmse(real, gen, k, spec.seed)?;

    Ok(MetricReport {
        site_id: real.site_id.clone(),
        fid: fid_val,
        mmd2: mmd_val,
        one_nn_acc: one_nn,
        es: es_mean,
        crps: crps_vals,
        mae,
        rmse,
        n_real: real.len(),
        n_gen: gen.len(),
        seed: spec.seed,
    })
}

/// Both sets must agree on vector width.
pub(crate) fn check_same_width(a: &ScenarioSet, b: &ScenarioSet) -> Result<(), MetricError> {
    if a.width() != b.width() {
        return Err(MetricError::WidthMismatch {
            expected: a.width(),
            got: b.width(),
        });
    }
    Ok(())
}

/// Squared Euclidean distance between two vectors.
pub(crate) fn dist2(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Euclidean distance between two vectors.
pub(crate) fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    dist2(a, b).sqrt()
}
