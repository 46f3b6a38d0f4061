//! Leave-one-out 1-nearest-neighbor two-sample test.

use ndarray::ArrayView1;

use super::{check_same_width, dist2, MetricError, ScenarioSet};

/// Pools both sets with source labels and reports the leave-one-out 1-NN
/// classification accuracy.
///
/// For each pooled point the nearest *other* point by Euclidean distance
/// votes its label. Distance ties are broken toward the opposite label,
/// then toward the lowest index; an exact duplicate of the real set
/// therefore scores 0, and well-separated sets score 1. Values near 0.5
/// mean the sets are statistically indistinguishable to this test.
pub fn one_nn_accuracy(real: &ScenarioSet, gen: &ScenarioSet) -> Result<f64, MetricError> {
    check_same_width(real, gen)?;
    if real.len() != gen.len() {
        return Err(MetricError::SizeMismatch {
            real: real.len(),
            gen: gen.len(),
        });
    }
    if real.len() < 2 {
        return Err(MetricError::TooFew {
            need: 2,
            got: real.len(),
        });
    }

    let n = real.len();
    let rows: Vec<ArrayView1<f64>> = (0..n)
        .map(|i| real.row(i))
        .chain((0..n).map(|i| gen.row(i)))
        .collect();
    let label = |idx: usize| idx >= n;

    let total = 2 * n;
    let mut correct = 0usize;
    for i in 0..total {
        let mut best: Option<usize> = None;
        let mut best_d2 = f64::INFINITY;
        for j in 0..total {
            if j == i {
                continue;
            }
            let d2 = dist2(rows[i], rows[j]);
            let replace = match best {
                None => true,
                Some(b) => {
                    if d2 < best_d2 {
                        true
                    } else if d2 == best_d2 {
                        // Tie: an opposite-label candidate beats a same-label
                        // one; otherwise keep the earlier (lower) index.
                        label(j) != label(i) && label(b) == label(i)
                    } else {
                        false
                    }
                }
            };
            if replace {
                best = Some(j);
                best_d2 = d2;
            }
        }
        let neighbor = best.expect("at least one other point");
        if label(neighbor) == label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}
