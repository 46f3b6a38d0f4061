//! Plain-loop reference implementations of every evaluation metric, written
//! independently of the library (flat `Vec` math, own Jacobi eigensolver,
//! no shared helpers) so the two can be checked against each other.
#![allow(dead_code)]

use fedscen_core::rng::{self, Stream};
use rand::Rng;

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off.sqrt() < 1e-300_f64.max(1e-15 * frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    (vals, v)
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|row| row.iter().map(|x| x * x))
        .sum::<f64>()
        .sqrt()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

/// Mean vector and unbiased (n−1) covariance matrix of row vectors.
pub fn mean_cov(x: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let d = x[0].len();
    let mut mu = vec![0.0; d];
    for row in x {
        for j in 0..d {
            mu[j] += row[j];
        }
    }
    for j in 0..d {
        mu[j] /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for row in x {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (row[i] - mu[i]) * (row[j] - mu[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            cov[i][j] /= (n - 1) as f64;
        }
    }
    (mu, cov)
}

/// Symmetric square root with eigenvalues clipped at zero.
fn sym_sqrt(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let (vals, vecs) = jacobi_eigen(a);
    let mut out = vec![vec![0.0; n]; n];
    for (k, &val) in vals.iter().enumerate() {
        let s = val.max(0.0).sqrt();
        for i in 0..n {
            for j in 0..n {
                out[i][j] += s * vecs[i][k] * vecs[j][k];
            }
        }
    }
    out
}

/// Fréchet distance between Gaussian fits, computed from scratch:
/// mean term + Tr(Σr) + Tr(Σg) − 2·Tr((√Σr·Σg·√Σr)^{1/2}), negative
/// eigenvalues clipped, total clamped at zero.
pub fn ref_fid(real: &[Vec<f64>], gen: &[Vec<f64>], squared_mean: bool) -> f64 {
    let d = real[0].len();
    let (mu_r, cov_r) = mean_cov(real);
    let (mu_g, cov_g) = mean_cov(gen);
    let sqrt_r = sym_sqrt(&cov_r);
    let mut cross = matmul(&matmul(&sqrt_r, &cov_g), &sqrt_r);
    for i in 0..d {
        for j in (i + 1)..d {
            let x = 0.5 * (cross[i][j] + cross[j][i]);
            cross[i][j] = x;
            cross[j][i] = x;
        }
    }
    let (vals, _) = jacobi_eigen(&cross);
    let tr_cross_sqrt: f64 = vals.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let mean_sq = dist2(&mu_r, &mu_g);
    let mean_term = if squared_mean { mean_sq } else { mean_sq.sqrt() };
    let tr_r: f64 = (0..d).map(|i| cov_r[i][i]).sum();
    let tr_g: f64 = (0..d).map(|i| cov_g[i][i]).sum();
    (mean_term + tr_r + tr_g - 2.0 * tr_cross_sqrt).max(0.0)
}

/// Median pairwise distance over the pooled rows, midpoint rule for even
/// pair counts.
pub fn ref_median_distance(real: &[Vec<f64>], gen: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = real.iter().chain(gen.iter()).collect();
    let mut ds = Vec::new();
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            ds.push(dist(pooled[i], pooled[j]));
        }
    }
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ds.len();
    if k % 2 == 1 {
        ds[k / 2]
    } else {
        0.5 * (ds[k / 2 - 1] + ds[k / 2])
    }
}

/// Unbiased MMD² with the Gaussian kernel `exp(−‖a−b‖²/(2σ²))`; `None`
/// selects σ as the pooled median distance (1 when zero).
pub fn ref_mmd2(real: &[Vec<f64>], gen: &[Vec<f64>], bandwidth: Option<f64>) -> f64 {
    let sigma = bandwidth.unwrap_or_else(|| {
        let med = ref_median_distance(real, gen);
        if med > 0.0 {
            med
        } else {
            1.0
        }
    });
    let k = |a: &[f64], b: &[f64]| (-dist2(a, b) / (2.0 * sigma * sigma)).exp();
    let (n, m) = (real.len(), gen.len());
    let mut xx = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                xx += k(&real[i], &real[j]);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                yy += k(&gen[i], &gen[j]);
            }
        }
    }
    let mut xy = 0.0;
    for i in 0..n {
        for j in 0..m {
            xy += k(&real[i], &gen[j]);
        }
    }
    xx / (n * (n - 1)) as f64 + yy / (m * (m - 1)) as f64 - 2.0 * xy / (n * m) as f64
}

/// Leave-one-out 1-NN accuracy over the pooled labeled rows; distance ties
/// prefer the opposite label, then the lowest index.
pub fn ref_one_nn(real: &[Vec<f64>], gen: &[Vec<f64>]) -> f64 {
    let n = real.len();
    let pooled: Vec<&Vec<f64>> = real.iter().chain(gen.iter()).collect();
    let total = pooled.len();
    let mut correct = 0;
    for i in 0..total {
        let mut best_j = usize::MAX;
        let mut best_d2 = f64::INFINITY;
        for j in 0..total {
            if j == i {
                continue;
            }
            let d2 = dist2(pooled[i], pooled[j]);
            let take = if best_j == usize::MAX || d2 < best_d2 {
                true
            } else if d2 == best_d2 {
                ((j >= n) != (i >= n)) && ((best_j >= n) == (i >= n))
            } else {
                false
            };
            if take {
                best_j = j;
                best_d2 = d2;
            }
        }
        if (best_j >= n) == (i >= n) {
            correct += 1;
        }
    }
    correct as f64 / total as f64
}

/// Energy score by direct double loop.
pub fn ref_energy_score(obs: &[f64], gen: &[Vec<f64>]) -> f64 {
    let m = gen.len();
    let to_obs: f64 = gen.iter().map(|row| dist(obs, row)).sum::<f64>() / m as f64;
    let mut spread = 0.0;
    for i in 0..m {
        for j in 0..m {
            spread += dist(&gen[i], &gen[j]);
        }
    }
    to_obs - spread / (2.0 * (m * m) as f64)
}

/// Per-lead sample CRPS averaged over observations, all terms by direct
/// double loops (no sorting shortcut).
pub fn ref_crps(observations: &[Vec<f64>], gen: &[Vec<f64>], leads: &[usize]) -> Vec<f64> {
    let m = gen.len();
    leads
        .iter()
        .map(|&lead| {
            let xs: Vec<f64> = gen.iter().map(|row| row[lead]).collect();
            let mut spread = 0.0;
            for i in 0..m {
                for j in 0..m {
                    spread += (xs[i] - xs[j]).abs();
                }
            }
            spread /= 2.0 * (m * m) as f64;
            let total: f64 = observations
                .iter()
                .map(|obs| {
                    let y = obs[lead];
                    xs.iter().map(|&x| (x - y).abs()).sum::<f64>() / m as f64 - spread
                })
                .sum();
            total / observations.len() as f64
        })
        .collect()
}

/// k-means++ plus Lloyd iterations following the library's documented RNG
/// protocol, reimplemented on flat vectors.
pub fn ref_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = points.len();
    let width = points[0].len();
    let mut rng = rng::derive(seed, Stream::Kmeans, &[]);

    let first = rng.gen_range(0..n);
    let mut center_idx = vec![first];
    let mut d2_min: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while center_idx.len() < k {
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
        center_idx.push(next);
        for i in 0..n {
            d2_min[i] = d2_min[i].min(dist2(&points[i], &points[next]));
        }
    }

    let mut centroids: Vec<Vec<f64>> = center_idx.iter().map(|&i| points[i].clone()).collect();
    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d2 = dist2(p, &centroids[0]);
                for (c, cen) in centroids.iter().enumerate().skip(1) {
                    let d2 = dist2(p, cen);
                    if d2 < best_d2 {
                        best = c;
                        best_d2 = d2;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignments = assign(&centroids);
    for _ in 0..300 {
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; width];
            for &i in &members {
                for j in 0..width {
                    mean[j] += points[i][j];
                }
            }
            for (j, v) in mean.iter().enumerate() {
                centroids[c][j] = v / members.len() as f64;
            }
        }
        let next = assign(&centroids);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    (centroids, assignments)
}

/// Centroid-matched MAE/RMSE: cluster both sets with one seed, match each
/// generated centroid to its nearest real centroid, average elementwise.
pub fn ref_mae_rmse(real: &[Vec<f64>], gen: &[Vec<f64>], k: usize, seed: u64) -> (f64, f64) {
    let (rc, _) = ref_kmeans(real, k, seed);
    let (gc, _) = ref_kmeans(gen, k, seed);
    let width = real[0].len();
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for g in &gc {
        let mut best = 0;
        let mut best_d2 = dist2(g, &rc[0]);
        for (r, cen) in rc.iter().enumerate().skip(1) {
            let d2 = dist2(g, cen);
            if d2 < best_d2 {
                best = r;
                best_d2 = d2;
            }
        }
        for j in 0..width {
            let diff = g[j] - rc[best][j];
            abs_sum += diff.abs();
            sq_sum += diff * diff;
        }
    }
    let denom = (k * width) as f64;
    (abs_sum / denom, (sq_sum / denom).sqrt())
}

/// Autocorrelation with population variance; `R(0) = 1`.
pub fn ref_autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mu = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|tau| {
            let mut acc = 0.0;
            for t in 0..(n - tau) {
                acc += (series[t] - mu) * (series[t + tau] - mu);
            }
            acc / ((n - tau) as f64 * var)
        })
        .collect()
}

/// Pairwise Pearson correlations with population moments, clamped to
/// [−1, 1].
pub fn ref_pearson(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let s = series.len();
    let n = series[0].len() as f64;
    let mus: Vec<f64> = series.iter().map(|x| x.iter().sum::<f64>() / n).collect();
    let sds: Vec<f64> = series
        .iter()
        .zip(&mus)
        .map(|(x, mu)| (x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt())
        .collect();
    let mut out = vec![vec![0.0; s]; s];
    for i in 0..s {
        out[i][i] = 1.0;
        for j in (i + 1)..s {
            let mut cov = 0.0;
            for t in 0..series[i].len() {
                cov += (series[i][t] - mus[i]) * (series[j][t] - mus[j]);
            }
            cov /= n;
            let rho = (cov / (sds[i] * sds[j])).clamp(-1.0, 1.0);
            out[i][j] = rho;
            out[j][i] = rho;
        }
    }
    out
}

/// Uniform random rows in `[0, 1)^width`, deterministic per context.
pub fn random_rows(n: usize, width: usize, ctx: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::derive(0xAB5E11, Stream::Generate, &[ctx]);
    (0..n)
        .map(|_| (0..width).map(|_| rng.r#gen::<f64>()).collect())
        .collect()
}
