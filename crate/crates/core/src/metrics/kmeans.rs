//! Seeded k-means clustering and centroid-matched MAE/RMSE.

use ndarray::Array2;
use rand::Rng;

use super::{check_same_width, dist2, MetricError, ScenarioSet};
use crate::rng::{self, Stream};

/// Maximum Lloyd iterations before giving up on an assignment fixpoint.
const MAX_ITERS: usize = 300;

/// k-means++ seeding followed by Lloyd iterations, deterministic per seed.
///
/// The RNG protocol is fixed so independent reimplementations can
/// reproduce it exactly: one `gen_range(0..n)` for the first center, then
/// per additional center a single `gen::<f64>()` scaled by the total
/// squared distance and resolved by prefix scan (or one `gen_range(0..n)`
/// when every point already coincides with a center). Assignment ties go
/// to the lowest centroid index; a cluster left empty keeps its previous
/// centroid. Returns the `[k, width]` centroid matrix and one assignment
/// per scenario.
pub fn kmeans(
    set: &ScenarioSet,
    k: usize,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>), MetricError> {
    let n = set.len();
    if k == 0 || k > n {
        return Err(MetricError::BadK { k, n });
    }
    let width = set.width();
    let mut rng = rng::derive(seed, Stream::Kmeans, &[]);

    // Seeding: squared-distance-weighted draws.
    let first = rng.gen_range(0..n);
    let mut centers = vec![first];
    let mut d2_min: Vec<f64> = (0..n).map(|i| dist2(set.row(i), set.row(first))).collect();
    while centers.len() < k {
        let total: f64 = d2_min.iter().sum();
        let next = if total > 0.0 {
            let target = rng.r#gen::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2_min.iter().enumerate() {
                cum += w;
                if cum > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(next);
        for i in 0..n {
            let d = dist2(set.row(i), set.row(next));
            if d < d2_min[i] {
                d2_min[i] = d;
            }
        }
    }

    let mut centroids = Array2::zeros((k, width));
    for (c, &idx) in centers.iter().enumerate() {
        centroids.row_mut(c).assign(&set.row(idx));
    }

    let assign_all = |centroids: &Array2<f64>| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let mut best = 0;
                let mut best_d2 = dist2(set.row(i), centroids.row(0));
                for c in 1..k {
                    let d2 = dist2(set.row(i), centroids.row(c));
                    if d2 < best_d2 {
                        best = c;
                        best_d2 = d2;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignments = assign_all(&centroids);
    for _ in 0..MAX_ITERS {
        // Update step: each centroid becomes the mean of its members.
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; width];
            for &i in &members {
                for (j, &v) in set.row(i).iter().enumerate() {
                    mean[j] += v;
                }
            }
            let count = members.len() as f64;
            for (j, v) in mean.iter().enumerate() {
                centroids[[c, j]] = v / count;
            }
        }
        let next = assign_all(&centroids);
        if next == assignments {
            break;
        }
        assignments = next;
    }

    Ok((centroids, assignments))
}

/// Clusters both sets with the same seed, matches every generated centroid
/// to its nearest real centroid, and returns elementwise (MAE, RMSE) over
/// all matched pairs.
pub fn mae_rmse(
    real: &ScenarioSet,
    gen: &ScenarioSet,
    k: usize,
    seed: u64,
) -> Result<(f64, f64), MetricError> {
    check_same_width(real, gen)?;
    let (real_centroids, _) = kmeans(real, k, seed)?;
    let (gen_centroids, _) = kmeans(gen, k, seed)?;

    let width = real.width();
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for g in 0..k {
        let grow = gen_centroids.row(g);
        let mut best = 0;
        let mut best_d2 = dist2(grow, real_centroids.row(0));
        for r in 1..k {
            let d2 = dist2(grow, real_centroids.row(r));
            if d2 < best_d2 {
                best = r;
                best_d2 = d2;
            }
        }
        for (a, b) in grow.iter().zip(real_centroids.row(best).iter()) {
            let diff = a - b;
            abs_sum += diff.abs();
            sq_sum += diff * diff;
        }
    }
    let count = (k * width) as f64;
    Ok((abs_sum / count, (sq_sum / count).sqrt()))
}
