//! Temporal autocorrelation and cross-site Pearson correlation.

use ndarray::Array2;

use super::MetricError;

/// Autocorrelation coefficients `R(τ)` for `τ = 0..=max_lag`:
/// `R(τ) = Σₜ (Sₜ−μ)(Sₜ₊τ−μ) / ((n−τ)·σ²)` with `μ`, `σ²` the full-series
/// mean and population variance, so `R(0) = 1` exactly.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, MetricError> {
    let n = series.len();
    if n <= max_lag {
        return Err(MetricError::SeriesTooShort { len: n, max_lag });
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(MetricError::ZeroVariance);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let cov: f64 = (0..n - lag)
            .map(|t| (series[t] - mean) * (series[t + lag] - mean))
            .sum();
        out.push(cov / ((n - lag) as f64 * var));
    }
    Ok(out)
}

/// Lag-wise mean of per-row autocorrelations over a scenario set.
///
/// Rows with zero variance (e.g. an all-dark solar window) are skipped;
/// the error surfaces only when a row is too short for `max_lag` or every
/// row is degenerate.
pub fn mean_autocorrelation(rows: &Array2<f64>, max_lag: usize) -> Result<Vec<f64>, MetricError> {
    let mut acc = vec![0.0; max_lag + 1];
    let mut used = 0usize;
    for row in rows.rows() {
        let series: Vec<f64> = row.to_vec();
        match autocorrelation(&series, max_lag) {
            Ok(acf) => {
                for (a, v) in acc.iter_mut().zip(acf) {
                    *a += v;
                }
                used += 1;
            }
            Err(MetricError::ZeroVariance) => continue,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(MetricError::ZeroVariance);
    }
    for a in &mut acc {
        *a /= used as f64;
    }
    Ok(acc)
}

/// Pearson correlation matrix over equal-length site series: symmetric,
/// unit diagonal, entries clamped to `[−1, 1]` against round-off.
pub fn pearson_matrix(site_series: &[Vec<f64>]) -> Result<Array2<f64>, MetricError> {
    let sites = site_series.len();
    if sites < 2 {
        return Err(MetricError::TooFew { need: 2, got: sites });
    }
    let n = site_series[0].len();
    for s in site_series {
        if s.len() != n {
            return Err(MetricError::WidthMismatch {
                expected: n,
                got: s.len(),
            });
        }
    }
    if n == 0 {
        return Err(MetricError::EmptySet);
    }
    if site_series
        .iter()
        .any(|s| s.iter().all(|&v| v == s[0]))
    {
        return Err(MetricError::ZeroVariance);
    }

    let means: Vec<f64> = site_series
        .iter()
        .map(|s| s.iter().sum::<f64>() / n as f64)
        .collect();
    let sds: Vec<f64> = site_series
        .iter()
        .zip(&means)
        .map(|(s, &m)| (s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt())
        .collect();
    if sds.iter().any(|&sd| sd <= 0.0) {
        return Err(MetricError::ZeroVariance);
    }

    let mut rho = Array2::zeros((sites, sites));
    for i in 0..sites {
        rho[[i, i]] = 1.0;
        for j in (i + 1)..sites {
            let cov: f64 = site_series[i]
                .iter()
                .zip(&site_series[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / n as f64;
            let r = (cov / (sds[i] * sds[j])).clamp(-1.0, 1.0);
            rho[[i, j]] = r;
            rho[[j, i]] = r;
        }
    }
    Ok(rho)
}
