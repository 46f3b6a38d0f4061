//! Proper scoring rules: multivariate energy score and per-lead CRPS.

use super::{dist, MetricError, Observation, ScenarioSet};

/// Energy score of a generated set against one observed trajectory:
/// `(1/M)·Σ‖ς − ξᵢ‖ − (1/(2M²))·ΣΣ‖ξᵢ − ξⱼ‖`.
///
/// Zero when every scenario equals the observation; lower is better.
pub fn energy_score(obs: &Observation, gen: &ScenarioSet) -> Result<f64, MetricError> {
    if gen.is_empty() {
        return Err(MetricError::EmptySet);
    }
    if obs.trajectory.len() != gen.width() {
        return Err(MetricError::WidthMismatch {
            expected: gen.width(),
            got: obs.trajectory.len(),
        });
    }
    let m = gen.len();
    let obs_view = ndarray::ArrayView1::from(&obs.trajectory);

    let mut to_obs = 0.0;
    for i in 0..m {
        to_obs += dist(obs_view, gen.row(i));
    }
    to_obs /= m as f64;

    let mut spread = 0.0;
    for i in 0..m {
        for j in 0..m {
            spread += dist(gen.row(i), gen.row(j));
        }
    }
    spread /= 2.0 * (m * m) as f64;

    Ok(to_obs - spread)
}

/// Sample CRPS of the generated marginal at each lead index, averaged over
/// observations: `mean_t [ (1/M)·Σᵢ|xᵢ − yₜ| − (1/(2M²))·ΣᵢΣⱼ|xᵢ − xⱼ| ]`
/// where `xᵢ` are the generated values at that index.
pub fn crps(
    observations: &[Observation],
    gen: &ScenarioSet,
    leads: &[usize],
) -> Result<Vec<f64>, MetricError> {
    if gen.is_empty() || observations.is_empty() {
        return Err(MetricError::EmptySet);
    }
    for obs in observations {
        if obs.trajectory.len() != gen.width() {
            return Err(MetricError::WidthMismatch {
                expected: gen.width(),
                got: obs.trajectory.len(),
            });
        }
    }
    for &lead in leads {
        if lead >= gen.width() {
            return Err(MetricError::LeadOutOfRange {
                lead,
                width: gen.width(),
            });
        }
    }

    let m = gen.len();
    let mut out = Vec::with_capacity(leads.len());
    for &lead in leads {
        let mut xs: Vec<f64> = (0..m).map(|i| gen.row(i)[lead]).collect();
        // ΣᵢΣⱼ|xᵢ−xⱼ| = 2·Σₖ x₍ₖ₎·(2k+1−m) over sorted values.
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let pair_sum: f64 = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| x * (2 * k as i64 + 1 - m as i64) as f64)
            .sum();
        let spread = pair_sum / (m * m) as f64;

        let mut total = 0.0;
        for obs in observations {
            let y = obs.trajectory[lead];
            let to_obs: f64 = xs.iter().map(|&x| (x - y).abs()).sum::<f64>() / m as f64;
            total += to_obs - spread;
        }
        out.push(total / observations.len() as f64);
    }
    Ok(out)
}
