//! Per-site power time series: ingestion, normalization, windowing into
//! scenario grids, train/test splitting, and synthetic desk-scale data.
//!
//! The unit consumed and produced by every model in this crate is the
//! [`ScenarioWindow`]: 576 consecutive 5-minute samples (two days), min-max
//! normalized to `[0, 1]` and reshaped row-major into a 24x24 grid.

mod synth;

pub use synth::{fleet_driver, synth_site, synth_solar, synth_wind, SiteKind, SiteParams};

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use ndarray::Array2;
use std::path::Path;
use thiserror::Error;

/// Samples per scenario window (two days at 5-minute cadence).
pub const WINDOW_SAMPLES: usize = 576;
/// Side length of the square scenario grid.
pub const GRID_SIDE: usize = 24;
/// Sampling cadence in minutes.
pub const STEP_MINUTES: i64 = 5;
/// Fraction of each site's windows assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Errors from data ingestion and preparation.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: malformed row: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: non-{STEP_MINUTES}-minute step at sample {index} ({got_minutes} min)")]
    Cadence {
        path: String,
        index: usize,
        got_minutes: i64,
    },
    #[error("series is empty")]
    Empty,
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("site {site_id}: constant value {value} over the normalization prefix")]
    DegenerateNorm { site_id: String, value: f64 },
    #[error("train fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("series is not normalized: value {value} at sample {index}")]
    NotNormalized { index: usize, value: f64 },
    #[error("need at least {min} windows to split, got {got}")]
    TooFewWindows { got: usize, min: usize },
    #[error("grid cell ({row},{col}) = {value} outside [0, 1]")]
    CellOutOfRange { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One site's power output at a fixed 5-minute cadence, in MW.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub site_id: String,
    pub t0: DateTime<Utc>,
    pub step: Duration,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Build a series at the standard cadence, validating finiteness.
    pub fn new(
        site_id: impl Into<String>,
        t0: DateTime<Utc>,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(DataError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { index });
        }
        Ok(Self {
            site_id: site_id.into(),
            t0,
            step: Duration::minutes(STEP_MINUTES),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of sample `i`.
    pub fn time_at(&self, i: usize) -> DateTime<Utc> {
        self.t0 + self.step * i as i32
    }
}

/// Min-max statistics fitted on a training prefix, used to map MW to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormStats {
    pub vmin: f64,
    pub vmax: f64,
}

impl NormStats {
    pub fn range(&self) -> f64 {
        self.vmax - self.vmin
    }
}

/// A normalized 24x24 scenario grid. Cell `(r, c)` holds sample `24 * r + c`
/// of the underlying 576-sample window (row-major time order).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioWindow {
    grid: Array2<f64>,
    pub site_id: String,
    pub start: DateTime<Utc>,
}

impl ScenarioWindow {
    /// Validate cells in `[0, 1]` and wrap the grid.
    pub fn new(
        grid: Array2<f64>,
        site_id: impl Into<String>,
        start: DateTime<Utc>,
    ) -> Result<Self, DataError> {
        for ((row, col), &value) in grid.indexed_iter() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(DataError::CellOutOfRange { row, col, value });
            }
        }
        Ok(Self {
            grid,
            site_id: site_id.into(),
            start,
        })
    }

    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    /// The window as a flat 576-vector in time order.
    pub fn flatten(&self) -> Vec<f64> {
        self.grid.iter().copied().collect()
    }
}

/// One client's prepared data: normalized windows split into train/test,
/// the normalization stats, and an optional one-hot site label for the
/// conditional global model.
#[derive(Debug, Clone)]
pub struct ClientDataset {
    pub client_id: usize,
    pub train: Vec<ScenarioWindow>,
    pub test: Vec<ScenarioWindow>,
    pub stats: NormStats,
    pub label: Option<Vec<f64>>,
}

impl ClientDataset {
    /// Attach a one-hot label of length `n_clients`.
    pub fn with_label(mut self, index: usize, n_clients: usize) -> Self {
        let mut label = vec![0.0; n_clients];
        label[index] = 1.0;
        self.label = Some(label);
        self
    }
}

/// A loaded site CSV: the parsed series plus ingest diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    /// Number of negative raw samples clamped to zero.
    pub clamped_negative: usize,
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

/// Load one site's series from a `timestamp,power_mw` CSV.
///
/// Rows must be at a constant 5-minute cadence. Negative powers are clamped
/// to zero and counted in the returned [`LoadedSeries`].
pub fn load_site_csv(path: &Path, site_id: &str) -> Result<LoadedSeries, DataError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => DataError::Io(io),
            other => DataError::Parse {
                path: display.clone(),
                line: 0,
                msg: format!("{other:?}"),
            },
        })?;

    let mut t0: Option<DateTime<Utc>> = None;
    let mut prev: Option<DateTime<Utc>> = None;
    let mut values = Vec::new();
    let mut clamped_negative = 0usize;

    for (row_idx, record) in reader.records().enumerate() {
        // +2: one for the header, one for 1-based line numbers.
        let line = row_idx + 2;
        let record = record.map_err(|e| DataError::Parse {
            path: display.clone(),
            line,
            msg: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(DataError::Parse {
                path: display.clone(),
                line,
                msg: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let stamp = parse_timestamp(record[0].trim()).ok_or_else(|| DataError::Parse {
            path: display.clone(),
            line,
            msg: format!("bad timestamp {:?}", &record[0]),
        })?;
        let mut power: f64 = record[1].trim().parse().map_err(|_| DataError::Parse {
            path: display.clone(),
            line,
            msg: format!("bad power value {:?}", &record[1]),
        })?;
        if !power.is_finite() {
            return Err(DataError::Parse {
                path: display.clone(),
                line,
                msg: format!("non-finite power {power}"),
            });
        }
        if power < 0.0 {
            power = 0.0;
            clamped_negative += 1;
        }
        if let Some(prev_stamp) = prev {
            let gap = stamp - prev_stamp;
            if gap != Duration::minutes(STEP_MINUTES) {
                return Err(DataError::Cadence {
                    path: display,
                    index: values.len(),
                    got_minutes: gap.num_minutes(),
                });
            }
        } else {
            t0 = Some(stamp);
        }
        prev = Some(stamp);
        values.push(power);
    }

    let t0 = t0.ok_or(DataError::Empty)?;
    if clamped_negative > 0 {
        log::warn!("{display}: clamped {clamped_negative} negative samples to zero");
    }
    Ok(LoadedSeries {
        series: TimeSeries::new(site_id, t0, values)?,
        clamped_negative,
    })
}

/// Fit min-max stats on the first `⌊train_fraction * len⌋` samples.
pub fn fit_norm(series: &TimeSeries, train_fraction: f64) -> Result<NormStats, DataError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    let n = ((train_fraction * series.len() as f64).floor() as usize).max(1);
    let prefix = &series.values[..n.min(series.len())];
    let vmin = prefix.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = prefix.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if vmax <= vmin {
        return Err(DataError::DegenerateNorm {
            site_id: series.site_id.clone(),
            value: vmin,
        });
    }
    Ok(NormStats { vmin, vmax })
}

/// Map a series through `clamp((v - vmin) / (vmax - vmin), 0, 1)`.
pub fn normalize(series: &TimeSeries, stats: &NormStats) -> TimeSeries {
    let range = stats.range();
    let values = series
        .values
        .iter()
        .map(|v| ((v - stats.vmin) / range).clamp(0.0, 1.0))
        .collect();
    TimeSeries {
        site_id: series.site_id.clone(),
        t0: series.t0,
        step: series.step,
        values,
    }
}

/// Inverse of [`normalize`] for values that were inside `[vmin, vmax]`.
pub fn denormalize(series: &TimeSeries, stats: &NormStats) -> TimeSeries {
    let range = stats.range();
    let values = series.values.iter().map(|v| stats.vmin + v * range).collect();
    TimeSeries {
        site_id: series.site_id.clone(),
        t0: series.t0,
        step: series.step,
        values,
    }
}

/// Cut a normalized series into non-overlapping 576-sample windows, each
/// reshaped row-major into a 24x24 grid. The trailing remainder is dropped;
/// a series shorter than one window yields an empty list.
pub fn window(series: &TimeSeries) -> Result<Vec<ScenarioWindow>, DataError> {
    if let Some((index, &value)) = series
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(DataError::NotNormalized { index, value });
    }
    let n_windows = series.len() / WINDOW_SAMPLES;
    if n_windows == 0 {
        log::warn!(
            "{}: {} samples is shorter than one {WINDOW_SAMPLES}-sample window",
            series.site_id,
            series.len()
        );
        return Ok(Vec::new());
    }
    let mut windows = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let offset = w * WINDOW_SAMPLES;
        let chunk = &series.values[offset..offset + WINDOW_SAMPLES];
        let grid = Array2::from_shape_vec((GRID_SIDE, GRID_SIDE), chunk.to_vec())
            .expect("chunk length matches grid");
        windows.push(ScenarioWindow::new(
            grid,
            series.site_id.clone(),
            series.time_at(offset),
        )?);
    }
    Ok(windows)
}

/// Temporal 80/20 split: the first `⌊0.8 n⌋` windows train, the rest test.
pub fn split(
    windows: Vec<ScenarioWindow>,
) -> Result<(Vec<ScenarioWindow>, Vec<ScenarioWindow>), DataError> {
    const MIN_WINDOWS: usize = 5;
    if windows.len() < MIN_WINDOWS {
        return Err(DataError::TooFewWindows {
            got: windows.len(),
            min: MIN_WINDOWS,
        });
    }
    let n_train = (TRAIN_FRACTION * windows.len() as f64).floor() as usize;
    let mut train = windows;
    let test = train.split_off(n_train);
    Ok((train, test))
}

/// Full preparation pipeline for one site: fit stats on the training prefix,
/// normalize, window, and split.
pub fn build_client_dataset(raw: &TimeSeries, client_id: usize) -> Result<ClientDataset, DataError> {
    let stats = fit_norm(raw, TRAIN_FRACTION)?;
    let normalized = normalize(raw, &stats);
    let windows = window(&normalized)?;
    let (train, test) = split(windows)?;
    Ok(ClientDataset {
        client_id,
        train,
        test,
        stats,
        label: None,
    })
}
