//! Plot data emitted with every run (long-form CSVs) and optional SVG
//! renderings of the same curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fedscen_core::federation::EpochRecord;
use fedscen_core::metrics::{kmeans, mean_autocorrelation, pearson_matrix, MetricError, ScenarioSet};
use ndarray::Array2;

use crate::CliError;

/// Lags covered by the autocorrelation diagnostics (4 hours of 5-minute steps).
pub const ACF_MAX_LAG: usize = 48;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("writing {}: {e}", path.display()))
}

/// Mean autocorrelation of a set, or `None` when every row is degenerate
/// (e.g. a collapsed generator emitting constants).
fn acf_or_none(set: &ScenarioSet) -> Result<Option<Vec<f64>>, CliError> {
    match mean_autocorrelation(set.matrix(), ACF_MAX_LAG) {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::ZeroVariance) => Ok(None),
        Err(e) => Err(CliError::Runtime(format!("autocorrelation: {e}"))),
    }
}

/// `site,kind,lag,value` rows for real and generated sets of every site.
pub fn write_autocorrelation_csv(
    path: &Path,
    site_ids: &[String],
    real: &[ScenarioSet],
    gen: &[ScenarioSet],
) -> Result<Vec<(String, Option<Vec<f64>>, Option<Vec<f64>>)>, CliError> {
    let mut body = String::from("site,kind,lag,value\n");
    let mut curves = Vec::new();
    for (i, id) in site_ids.iter().enumerate() {
        let r = acf_or_none(&real[i])?;
        let g = acf_or_none(&gen[i])?;
        for (kind, curve) in [("real", &r), ("generated", &g)] {
            if let Some(values) = curve {
                for (lag, v) in values.iter().enumerate() {
                    writeln!(body, "{id},{kind},{lag},{v}").unwrap();
                }
            } else {
                log::warn!("{id}: {kind} set has no varying rows; omitting its autocorrelation");
            }
        }
        curves.push((id.clone(), r, g));
    }
    fs::write(path, body).map_err(|e| io_err(path, e))?;
    Ok(curves)
}

/// `site,lead,value` rows from the per-site CRPS vectors.
pub fn write_crps_csv(
    path: &Path,
    site_ids: &[String],
    leads: &[usize],
    crps: &[Vec<f64>],
) -> Result<(), CliError> {
    let mut body = String::from("site,lead,value\n");
    for (id, values) in site_ids.iter().zip(crps) {
        for (lead, v) in leads.iter().zip(values) {
            writeln!(body, "{id},{lead},{v}").unwrap();
        }
    }
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// `site,cluster,index,value` rows: k-means centroids of each generated set.
pub fn write_centroids_csv(
    path: &Path,
    site_ids: &[String],
    gen: &[ScenarioSet],
    k: usize,
    seed: u64,
) -> Result<(), CliError> {
    let mut body = String::from("site,cluster,index,value\n");
    for (id, set) in site_ids.iter().zip(gen) {
        let k = k.min(set.len());
        let (centroids, _) = kmeans(set, k, seed)
            .map_err(|e| CliError::Runtime(format!("clustering {id}: {e}")))?;
        for c in 0..centroids.nrows() {
            for (j, v) in centroids.row(c).iter().enumerate() {
                writeln!(body, "{id},{c},{j},{v}").unwrap();
            }
        }
    }
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// A labeled square correlation matrix: header `site,<id>...`, one row per site.
pub fn write_pearson_csv(
    path: &Path,
    site_ids: &[String],
    matrix: &Array2<f64>,
) -> Result<(), CliError> {
    let mut body = format!("site,{}\n", site_ids.join(","));
    for (i, id) in site_ids.iter().enumerate() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(body, "{id},{}", row.join(",")).unwrap();
    }
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Cross-site Pearson matrix over per-site sets: each site's rows are
/// concatenated into one long series; sets are truncated to the shortest
/// site's row count so the series stay aligned.
pub fn cross_site_pearson(sets: &[ScenarioSet]) -> Result<Array2<f64>, MetricError> {
    let n_common = sets.iter().map(ScenarioSet::len).min().unwrap_or(0);
    let series: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| {
            (0..n_common)
                .flat_map(|i| s.row(i).to_vec())
                .collect::<Vec<f64>>()
        })
        .collect();
    pearson_matrix(&series)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders labeled polylines into a self-contained SVG line chart.
pub fn render_line_svg(
    path: &Path,
    title: &str,
    series: &[(String, Vec<f64>)],
) -> Result<(), CliError> {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const ML: f64 = 60.0; // left margin
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 40.0;

    let n_max = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, v) in series {
        for &y in v {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    if !lo.is_finite() || n_max < 2 {
        return Err(CliError::Runtime(format!(
            "plot {title:?} has no drawable series"
        )));
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let x_of = |i: usize| ML + (W - ML - MR) * i as f64 / (n_max - 1) as f64;
    let y_of = |v: f64| H - MB - (H - MT - MB) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>").unwrap();
    writeln!(svg, "<text x=\"{ML}\" y=\"24\" font-size=\"15\">{title}</text>").unwrap();

    // Axes and four horizontal gridlines with value labels.
    writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        H - MB,
        W - MR
    )
    .unwrap();
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = y_of(v);
        writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            W - MR
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>",
            ML - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
        W - MR,
        H - MB + 16.0,
        n_max - 1
    )
    .unwrap();
    writeln!(svg, "<text x=\"{ML}\" y=\"{:.1}\">0</text>", H - MB + 16.0).unwrap();

    for (s, (label, values)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.1},{:.1}", x_of(i), y_of(v)))
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{label}</text>",
            W - MR - 150.0,
            MT + 14.0 * s as f64
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    fs::write(path, svg).map_err(|e| io_err(path, e))
}

/// Per-epoch mean discriminator/generator losses from a training history.
pub fn loss_curves(history: &[EpochRecord]) -> (Vec<f64>, Vec<f64>) {
    let max_epoch = history.iter().map(|r| r.epoch).max().unwrap_or(0);
    let mut d = vec![0.0; max_epoch];
    let mut g = vec![0.0; max_epoch];
    let mut counts = vec![0usize; max_epoch];
    for rec in history {
        d[rec.epoch - 1] += rec.d_loss;
        g[rec.epoch - 1] += rec.g_loss;
        counts[rec.epoch - 1] += 1;
    }
    for e in 0..max_epoch {
        if counts[e] > 0 {
            d[e] /= counts[e] as f64;
            g[e] /= counts[e] as f64;
        }
    }
    (d, g)
}
