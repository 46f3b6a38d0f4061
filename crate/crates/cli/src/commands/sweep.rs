//! The `sweep` subcommand: train the federated method across the cross
//! product of synchronization intervals and client fractions, sharing one
//! fleet and seed, and score every setting against the pooled test windows.
//!
//! Output is `<out>/sweep.csv` with one row per setting per metric; a
//! setting that fails contributes a single `failed` row and does not stop
//! the remaining settings.

use std::fs;
use std::path::{Path, PathBuf};

use fedscen_core::federation::run_federated_with_loss;
use fedscen_core::genmodel::{sample_generator, LossCoding, TrainLoss};
use fedscen_core::metrics::{evaluate_pair, MetricReport, ScenarioSet, Source};
use fedscen_core::rng::{self, Stream};

use crate::commands::run::{load_fleet, Fleet};
use crate::config::{ExperimentConfig, Method};
use crate::CliError;

/// The scalar metrics reported per setting, in row order.
const METRICS: [&str; 7] = ["fid", "mmd2", "one_nn_acc", "es", "crps_mean", "mae", "rmse"];

fn scalar(report: &MetricReport, metric: &str) -> f64 {
    match metric {
        "fid" => report.fid,
        "mmd2" => report.mmd2,
        "one_nn_acc" => report.one_nn_acc,
        "es" => report.es,
        "crps_mean" => report.crps.iter().sum::<f64>() / report.crps.len() as f64,
        "mae" => report.mae,
        "rmse" => report.rmse,
        _ => unreachable!("unknown metric name"),
    }
}

/// Train one setting and score the server generator against the pooled
/// test windows. Conditional models pool one batch per site label.
fn run_setting(
    cfg: &ExperimentConfig,
    fleet: &Fleet,
    test_pool: &ScenarioSet,
    sync_interval: usize,
    client_fraction: f64,
) -> Result<MetricReport, String> {
    let mut fed = cfg.fed.clone();
    fed.sync_interval = sync_interval;
    fed.client_fraction = client_fraction;
    let run = run_federated_with_loss(
        &fleet.sites,
        &cfg.net,
        &fed,
        &TrainLoss::LeastSquares(LossCoding::default()),
    )
    .map_err(|e| format!("training: {e}"))?;
    let (g, _) = run.server();

    let gen_set = if cfg.net.conditional {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for label in 0..cfg.net.n_labels {
            let batch = sample_generator(g, &cfg.net, cfg.n_scenarios, cfg.seed, Some(label))
                .map_err(|e| format!("generating label {label}: {e}"))?;
            rows.extend(batch.rows().into_iter().map(|r| r.to_vec()));
        }
        ScenarioSet::from_rows(&rows, Source::Generated, "pooled")
    } else {
        let seed = rng::mix(cfg.seed, Stream::Generate, &[]);
        let rows = sample_generator(g, &cfg.net, cfg.n_scenarios, seed, None)
            .map_err(|e| format!("generating: {e}"))?;
        ScenarioSet::new(rows, Source::Generated, "pooled")
    }
    .map_err(|e| format!("collecting scenarios: {e}"))?;

    evaluate_pair(test_pool, &gen_set, &cfg.eval).map_err(|e| format!("evaluating: {e}"))
}

pub fn sweep(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    sync_intervals: &[usize],
    client_fractions: &[f64],
) -> Result<(), CliError> {
    let (cfg, _) = ExperimentConfig::load(config, seed, out)?;
    if cfg.method != Method::FedLsgan {
        return Err(CliError::Usage(format!(
            "sweep requires method = \"fed_lsgan\", got \"{}\"",
            cfg.method.as_str()
        )));
    }
    if sync_intervals.is_empty() || client_fractions.is_empty() {
        return Err(CliError::Usage("sweep lists must be non-empty".into()));
    }
    // Reject any invalid grid point before spending time on the first one.
    for &k in sync_intervals {
        for &frac in client_fractions {
            let mut fed = cfg.fed.clone();
            fed.sync_interval = k;
            fed.client_fraction = frac;
            fed.validate().map_err(|e| {
                CliError::Usage(format!("setting K={k} E={frac} is invalid: {e}"))
            })?;
        }
    }

    let fleet = load_fleet(&cfg)?;
    let mut test_windows = Vec::new();
    for site in &fleet.sites {
        test_windows.extend(site.test.iter().cloned());
    }
    let test_pool = ScenarioSet::from_windows(&test_windows, Source::Real)
        .map_err(|e| CliError::Runtime(format!("collecting test windows: {e}")))?;

    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", cfg.out_dir.display())))?;
    let path = cfg.out_dir.join("sweep.csv");
    let mut wtr = csv::Writer::from_path(&path)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
    wtr.write_record(["sync_interval", "client_fraction", "status", "metric", "value"])
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;

    for &k in sync_intervals {
        for &frac in client_fractions {
            let rows: Vec<[String; 5]> = match run_setting(&cfg, &fleet, &test_pool, k, frac) {
                Ok(report) => METRICS
                    .iter()
                    .map(|m| {
                        [
                            k.to_string(),
                            frac.to_string(),
                            "ok".into(),
                            (*m).into(),
                            scalar(&report, m).to_string(),
                        ]
                    })
                    .collect(),
                Err(msg) => {
                    log::warn!("setting K={k} E={frac} failed: {msg}");
                    vec![[k.to_string(), frac.to_string(), "failed".into(), "error".into(), msg]]
                }
            };
            for row in &rows {
                wtr.write_record(row)
                    .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
            }
            println!("setting K={k} E={frac}: {}", rows[0][2]);
        }
    }
    wtr.flush()
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    println!("sweep complete: {}", path.display());
    Ok(())
}
