//! The versioned `report.json` written by `run`: per-site metric reports
//! plus cross-site summary statistics. Serialization order is fixed and the
//! timestamp is the last field, so two runs of the same experiment differ
//! only in their final line.

use fedscen_core::metrics::MetricReport;
use serde::Serialize;

/// Format version written to `report.json`.
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Mean and population standard deviation of one metric across sites.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: impl Iterator<Item = f64>) -> Summary {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Summary { mean, std: var.sqrt() }
}

/// Cross-site aggregates; CRPS is averaged over leads first.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub fid: Summary,
    pub mmd2: Summary,
    pub one_nn_acc: Summary,
    pub es: Summary,
    pub crps: Summary,
    pub mae: Summary,
    pub rmse: Summary,
}

/// Top-level `report.json` document.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub method: &'static str,
    pub seed: u64,
    pub sites: Vec<MetricReport>,
    pub summary: ReportSummary,
    /// RFC 3339 write time; the only field that varies between identical runs.
    pub timestamp: String,
}

impl Report {
    pub fn new(method: &'static str, seed: u64, sites: Vec<MetricReport>) -> Self {
        let over = |f: fn(&MetricReport) -> f64| summarize(sites.iter().map(f));
        let summary = ReportSummary {
            fid: over(|r| r.fid),
            mmd2: over(|r| r.mmd2),
            one_nn_acc: over(|r| r.one_nn_acc),
            es: over(|r| r.es),
            crps: over(|r| r.crps.iter().sum::<f64>() / r.crps.len() as f64),
            mae: over(|r| r.mae),
            rmse: over(|r| r.rmse),
        };
        Report {
            format_version: REPORT_FORMAT_VERSION,
            method,
            seed,
            sites,
            summary,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
