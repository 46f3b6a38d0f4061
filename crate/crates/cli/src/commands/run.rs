//! The `run` subcommand: prepare the fleet, train the configured method,
//! and write every artifact of the run directory:
//!
//! ```text
//! <out>/<method>-seed<seed>/
//!   config.toml            byte copy of the input configuration
//!   history.csv            epoch,client_id,L_D,L_G,synced   (GAN methods)
//!   checkpoints/*.bin      server state at each sync + final (GAN methods)
//!   scenarios/<site>.csv   generated scenarios, one per row
//!   report.json            per-site metrics + summary, versioned
//!   plots/*.csv            plot data; *.svg with --render-plots
//! ```

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use fedscen_core::baselines::{fit_copula, sample_copula, train_centralized, CopulaModel};
use fedscen_core::data::{
    build_client_dataset, fleet_driver, load_site_csv, synth_site, ClientDataset, SiteParams,
};
use fedscen_core::federation::{run_federated_observed, EpochRecord};
use fedscen_core::genmodel::{checkpoint_models, sample_generator, LossCoding, ModelParams, TrainLoss};
use fedscen_core::metrics::{evaluate_pair, EvalSpec, MetricReport, ScenarioSet, Source};
use fedscen_core::rng::{self, Stream};

use crate::config::{DataSource, ExperimentConfig, KindArg, Method};
use crate::plots;
use crate::report::Report;
use crate::CliError;

fn rt(stage: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{stage}: {e}"))
}

/// The prepared per-site datasets, ordered by site id.
pub struct Fleet {
    pub site_ids: Vec<String>,
    pub sites: Vec<ClientDataset>,
}

/// Load or synthesize the fleet named by `[data]`, one client per site.
pub fn load_fleet(cfg: &ExperimentConfig) -> Result<Fleet, CliError> {
    let mut fleet = match cfg.data.source {
        DataSource::Csv => {
            let root = cfg.data.root.as_ref().expect("validated");
            if !root.is_dir() {
                return Err(CliError::Usage(format!(
                    "data root {} is not a directory",
                    root.display()
                )));
            }
            let mut paths: Vec<PathBuf> = fs::read_dir(root)
                .map_err(|e| rt(format!("listing {}", root.display()), e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(CliError::Usage(format!(
                    "data root {} contains no .csv site files",
                    root.display()
                )));
            }
            let mut fleet = Fleet { site_ids: Vec::new(), sites: Vec::new() };
            for (i, path) in paths.iter().enumerate() {
                let site_id = path
                    .file_stem()
                    .expect("filtered on extension")
                    .to_string_lossy()
                    .into_owned();
                let loaded = load_site_csv(path, &site_id)
                    .map_err(|e| rt(format!("loading {}", path.display()), e))?;
                let dataset = build_client_dataset(&loaded.series, i)
                    .map_err(|e| rt(format!("preparing site {site_id}"), e))?;
                fleet.site_ids.push(site_id);
                fleet.sites.push(dataset);
            }
            fleet
        }
        DataSource::Synthetic => {
            let n_sites = cfg.data.n_sites.unwrap_or(4);
            let days = cfg.data.days.unwrap_or(400);
            let kind = cfg.data.kind.unwrap_or(KindArg::Solar);
            let capacity = cfg.data.capacity_mw.unwrap_or(5.0);
            let coupling = cfg.data.coupling.unwrap_or(0.6);
            let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
            let driver = fleet_driver(cfg.seed, days * 288);
            let mut fleet = Fleet { site_ids: Vec::new(), sites: Vec::new() };
            for i in 0..n_sites {
                let site_id = format!("site{i}");
                let params = match kind {
                    KindArg::Solar => SiteParams::solar(&site_id, capacity, coupling),
                    KindArg::Wind => SiteParams::wind(&site_id, capacity, coupling),
                };
                let series = synth_site(cfg.seed, &driver, &params, t0);
                let dataset = build_client_dataset(&series, i)
                    .map_err(|e| rt(format!("preparing site {site_id}"), e))?;
                fleet.site_ids.push(site_id);
                fleet.sites.push(dataset);
            }
            fleet
        }
    };

    if cfg.net.conditional {
        if cfg.net.n_labels != fleet.sites.len() {
            return Err(CliError::Usage(format!(
                "[net] n_labels {} does not match the fleet's {} sites",
                cfg.net.n_labels,
                fleet.sites.len()
            )));
        }
        fleet.sites = fleet
            .sites
            .into_iter()
            .enumerate()
            .map(|(i, ds)| ds.with_label(i, cfg.net.n_labels))
            .collect();
    }
    Ok(fleet)
}

/// Pool every site's windows into one dataset for centralized training.
fn pooled_dataset(fleet: &Fleet) -> ClientDataset {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for site in &fleet.sites {
        train.extend(site.train.iter().cloned());
        test.extend(site.test.iter().cloned());
    }
    ClientDataset {
        client_id: 0,
        train,
        test,
        stats: fleet.sites[0].stats,
        label: None,
    }
}

enum Trained {
    Gan { params_g: ModelParams, history: Vec<EpochRecord> },
    Copula { models: Vec<CopulaModel> },
}

fn train(cfg: &ExperimentConfig, fleet: &Fleet, dir: &Path) -> Result<Trained, CliError> {
    let lsgan = TrainLoss::LeastSquares(LossCoding::default());
    match cfg.method {
        Method::FedLsgan => {
            let ckpt_dir = dir.join("checkpoints");
            fs::create_dir_all(&ckpt_dir).map_err(|e| rt("creating checkpoint directory", e))?;
            let ckpt_err: RefCell<Option<CliError>> = RefCell::new(None);
            let run = run_federated_observed(&fleet.sites, &cfg.net, &cfg.fed, &lsgan, |epoch, g, d| {
                if ckpt_err.borrow().is_some() {
                    return;
                }
                let path = ckpt_dir.join(format!("epoch_{epoch}.bin"));
                let result = checkpoint_models(&cfg.net, g, d, epoch as u64)
                    .and_then(|c| c.save(&path));
                if let Err(e) = result {
                    *ckpt_err.borrow_mut() = Some(rt(format!("checkpoint at epoch {epoch}"), e));
                }
            })
            .map_err(|e| rt("federated training", e))?;
            if let Some(err) = ckpt_err.into_inner() {
                return Err(err);
            }
            let (g, d) = run.server();
            checkpoint_models(&cfg.net, g, d, cfg.fed.global_epochs as u64)
                .and_then(|c| c.save(&ckpt_dir.join("final.bin")))
                .map_err(|e| rt("final checkpoint", e))?;
            Ok(Trained::Gan { params_g: g.clone(), history: run.state.history })
        }
        Method::CentralLsgan | Method::CentralGan => {
            let loss = if cfg.method == Method::CentralGan { TrainLoss::CrossEntropy } else { lsgan };
            let pooled = pooled_dataset(fleet);
            let run = train_centralized(&pooled, &cfg.net, &loss, &cfg.central)
                .map_err(|e| rt("centralized training", e))?;
            let ckpt_dir = dir.join("checkpoints");
            fs::create_dir_all(&ckpt_dir).map_err(|e| rt("creating checkpoint directory", e))?;
            checkpoint_models(&cfg.net, &run.params_g, &run.params_d, cfg.central.epochs as u64)
                .and_then(|c| c.save(&ckpt_dir.join("final.bin")))
                .map_err(|e| rt("final checkpoint", e))?;
            Ok(Trained::Gan { params_g: run.params_g, history: run.history })
        }
        Method::Copula => {
            let models = fleet
                .sites
                .iter()
                .zip(&fleet.site_ids)
                .map(|(site, id)| {
                    let train_set = ScenarioSet::from_windows(&site.train, Source::Real)
                        .map_err(|e| rt(format!("collecting training windows for {id}"), e))?;
                    fit_copula(&train_set).map_err(|e| rt(format!("fitting copula for {id}"), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Trained::Copula { models })
        }
    }
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<(), CliError> {
    let mut body = String::from("epoch,client_id,L_D,L_G,synced\n");
    for r in history {
        writeln!(body, "{},{},{},{},{}", r.epoch, r.client_id, r.d_loss, r.g_loss, r.synced)
            .unwrap();
    }
    fs::write(path, body).map_err(|e| rt(format!("writing {}", path.display()), e))
}

fn generate(
    cfg: &ExperimentConfig,
    trained: &Trained,
    fleet: &Fleet,
    dir: &Path,
) -> Result<Vec<ScenarioSet>, CliError> {
    let scen_dir = dir.join("scenarios");
    fs::create_dir_all(&scen_dir).map_err(|e| rt("creating scenario directory", e))?;
    let mut sets = Vec::new();
    for (i, id) in fleet.site_ids.iter().enumerate() {
        let set = match trained {
            Trained::Gan { params_g, .. } => {
                // Conditional models share one noise sequence across labels so
                // scenario row i is the same latent draw at every site;
                // unconditional models get a per-site generation stream.
                let (seed, label) = if cfg.net.conditional {
                    (cfg.seed, Some(i))
                } else {
                    (rng::mix(cfg.seed, Stream::Generate, &[i as u64]), None)
                };
                let rows = sample_generator(params_g, &cfg.net, cfg.n_scenarios, seed, label)
                    .map_err(|e| rt(format!("generating scenarios for {id}"), e))?;
                ScenarioSet::new(rows, Source::Generated, id.clone())
                    .map_err(|e| rt(format!("collecting scenarios for {id}"), e))?
            }
            Trained::Copula { models } => {
                let seed = rng::mix(cfg.seed, Stream::Generate, &[i as u64]);
                sample_copula(&models[i], cfg.n_scenarios, seed)
                    .map_err(|e| rt(format!("sampling copula for {id}"), e))?
            }
        };
        let path = scen_dir.join(format!("{id}.csv"));
        set.write_csv(&path)
            .map_err(|e| rt(format!("writing {}", path.display()), e))?;
        sets.push(set);
    }
    Ok(sets)
}

fn effective_leads(eval: &EvalSpec, width: usize) -> Vec<usize> {
    if eval.crps_leads.is_empty() {
        (0..width).collect()
    } else {
        eval.crps_leads.clone()
    }
}

fn write_plots(
    cfg: &ExperimentConfig,
    dir: &Path,
    fleet: &Fleet,
    real_sets: &[ScenarioSet],
    gen_sets: &[ScenarioSet],
    reports: &[MetricReport],
    trained: &Trained,
    render: bool,
) -> Result<(), CliError> {
    let plot_dir = dir.join("plots");
    fs::create_dir_all(&plot_dir).map_err(|e| rt("creating plot directory", e))?;

    let curves = plots::write_autocorrelation_csv(
        &plot_dir.join("autocorrelation.csv"),
        &fleet.site_ids,
        real_sets,
        gen_sets,
    )?;

    let leads = effective_leads(&cfg.eval, gen_sets[0].width());
    let crps: Vec<Vec<f64>> = reports.iter().map(|r| r.crps.clone()).collect();
    plots::write_crps_csv(&plot_dir.join("crps_by_lead.csv"), &fleet.site_ids, &leads, &crps)?;

    plots::write_centroids_csv(
        &plot_dir.join("cluster_centroids.csv"),
        &fleet.site_ids,
        gen_sets,
        cfg.eval.k_clusters,
        cfg.eval.seed,
    )?;

    let real_rho = plots::cross_site_pearson(real_sets)
        .map_err(|e| rt("cross-site correlation of the real sets", e))?;
    plots::write_pearson_csv(&plot_dir.join("pearson_real.csv"), &fleet.site_ids, &real_rho)?;
    match plots::cross_site_pearson(gen_sets) {
        Ok(gen_rho) => plots::write_pearson_csv(
            &plot_dir.join("pearson_generated.csv"),
            &fleet.site_ids,
            &gen_rho,
        )?,
        Err(e) => log::warn!("skipping pearson_generated.csv: {e}"),
    }

    if render {
        let mut acf_series = Vec::new();
        for (id, real, gen) in &curves {
            if let Some(v) = real {
                acf_series.push((format!("{id} real"), v.clone()));
            }
            if let Some(v) = gen {
                acf_series.push((format!("{id} generated"), v.clone()));
            }
        }
        plots::render_line_svg(
            &plot_dir.join("autocorrelation.svg"),
            "Mean autocorrelation by lag",
            &acf_series,
        )?;

        let crps_series: Vec<(String, Vec<f64>)> = fleet
            .site_ids
            .iter()
            .zip(&crps)
            .map(|(id, v)| (id.clone(), v.clone()))
            .collect();
        plots::render_line_svg(
            &plot_dir.join("crps_by_lead.svg"),
            "CRPS by lead",
            &crps_series,
        )?;

        if let Trained::Gan { history, .. } = trained {
            let (d, g) = plots::loss_curves(history);
            plots::render_line_svg(
                &plot_dir.join("training_loss.svg"),
                "Mean client loss by epoch",
                &[("discriminator".into(), d), ("generator".into(), g)],
            )?;
        }
    }
    Ok(())
}

pub fn run(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    render_plots: bool,
) -> Result<(), CliError> {
    let (cfg, raw) = ExperimentConfig::load(config, seed, out)?;
    if cfg.net.conditional && cfg.method != Method::FedLsgan {
        return Err(CliError::Usage(format!(
            "conditional nets require method = \"fed_lsgan\", got {:?}",
            cfg.method.as_str()
        )));
    }
    let fleet = load_fleet(&cfg)?;
    println!(
        "prepared {} sites ({} train / {} test windows each)",
        fleet.sites.len(),
        fleet.sites[0].train.len(),
        fleet.sites[0].test.len()
    );

    let dir = cfg.out_dir.join(cfg.run_id());
    fs::create_dir_all(&dir).map_err(|e| rt(format!("creating {}", dir.display()), e))?;
    fs::write(dir.join("config.toml"), &raw)
        .map_err(|e| rt("copying the configuration", e))?;

    let trained = train(&cfg, &fleet, &dir)?;
    if let Trained::Gan { history, .. } = &trained {
        write_history(&dir.join("history.csv"), history)?;
    }

    let gen_sets = generate(&cfg, &trained, &fleet, &dir)?;

    let real_sets: Vec<ScenarioSet> = fleet
        .sites
        .iter()
        .zip(&fleet.site_ids)
        .map(|(site, id)| {
            ScenarioSet::from_windows(&site.test, Source::Real)
                .map_err(|e| rt(format!("collecting test windows for {id}"), e))
        })
        .collect::<Result<_, _>>()?;
    let reports: Vec<MetricReport> = real_sets
        .iter()
        .zip(&gen_sets)
        .map(|(real, gen)| {
            evaluate_pair(real, gen, &cfg.eval)
                .map_err(|e| rt(format!("evaluating {}", gen.site_id), e))
        })
        .collect::<Result<_, _>>()?;

    let report = Report::new(cfg.method.as_str(), cfg.seed, reports);
    fs::write(dir.join("report.json"), report.to_json())
        .map_err(|e| rt("writing report.json", e))?;

    write_plots(&cfg, &dir, &fleet, &real_sets, &gen_sets, &report.sites, &trained, render_plots)?;

    println!("run complete: {}", dir.display());
    Ok(())
}
