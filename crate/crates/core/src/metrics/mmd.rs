//! Squared maximum mean discrepancy with a Gaussian RBF kernel.

use ndarray::ArrayView1;

use super::{check_same_width, dist, dist2, MetricError, ScenarioSet};

/// Unbiased U-statistic estimate of MMD² between the two sets.
///
/// Kernel: `k(a, b) = exp(−‖a − b‖² / (2σ²))`. When `bandwidth` is `None`,
/// σ is the median pairwise Euclidean distance over the pooled sample
/// (falling back to 1 when that median is zero, i.e. all points coincide).
pub fn mmd2(
    real: &ScenarioSet,
    gen: &ScenarioSet,
    bandwidth: Option<f64>,
) -> Result<f64, MetricError> {
    check_same_width(real, gen)?;
    let (n, m) = (real.len(), gen.len());
    let got = n.min(m);
    if got < 2 {
        return Err(MetricError::TooFew { need: 2, got });
    }
    let sigma = match bandwidth {
        Some(b) if b.is_finite() && b > 0.0 => b,
        Some(b) => return Err(MetricError::BadBandwidth(b)),
        None => {
            let med = median_pairwise_distance(real, gen)?;
            if med > 0.0 {
                med
            } else {
                1.0
            }
        }
    };
    let denom = 2.0 * sigma * sigma;
    let kernel = |a: ArrayView1<f64>, b: ArrayView1<f64>| (-dist2(a, b) / denom).exp();

    let mut xx = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                xx += kernel(real.row(i), real.row(j));
            }
        }
    }
    xx /= (n * (n - 1)) as f64;

    let mut yy = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                yy += kernel(gen.row(i), gen.row(j));
            }
        }
    }
    yy /= (m * (m - 1)) as f64;

    let mut xy = 0.0;
    for i in 0..n {
        for j in 0..m {
            xy += kernel(real.row(i), gen.row(j));
        }
    }
    xy *= 2.0 / (n * m) as f64;

    Ok(xx + yy - xy)
}

/// Median Euclidean distance over all distinct pairs of the pooled sample
/// (midpoint of the two central order statistics for even counts).
pub fn median_pairwise_distance(
    real: &ScenarioSet,
    gen: &ScenarioSet,
) -> Result<f64, MetricError> {
    check_same_width(real, gen)?;
    let rows: Vec<ArrayView1<f64>> = (0..real.len())
        .map(|i| real.row(i))
        .chain((0..gen.len()).map(|i| gen.row(i)))
        .collect();
    let total = rows.len();
    if total < 2 {
        return Err(MetricError::TooFew { need: 2, got: total });
    }
    let mut dists = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..total {
        for j in (i + 1)..total {
            dists.push(dist(rows[i], rows[j]));
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let k = dists.len();
    Ok(if k % 2 == 1 {
        dists[k / 2]
    } else {
        0.5 * (dists[k / 2 - 1] + dists[k / 2])
    })
}
