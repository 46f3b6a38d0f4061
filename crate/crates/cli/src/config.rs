//! Experiment configuration: a TOML file selecting a method, a data source,
//! and the training/evaluation hyperparameters.

use std::path::{Path, PathBuf};

use fedscen_core::baselines::CentralConfig;
use fedscen_core::federation::FederationConfig;
use fedscen_core::genmodel::NetConfig;
use fedscen_core::metrics::EvalSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which generative method an experiment trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Federated least-squares GAN with periodic parameter averaging.
    FedLsgan,
    /// Least-squares GAN trained on the pooled data.
    CentralLsgan,
    /// Cross-entropy GAN trained on the pooled data.
    CentralGan,
    /// Per-site Gaussian copula fitted to the training windows.
    Copula,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FedLsgan => "fed_lsgan",
            Method::CentralLsgan => "central_lsgan",
            Method::CentralGan => "central_gan",
            Method::Copula => "copula",
        }
    }
}

/// Where the per-site power series come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// `<root>/<site_id>.csv` files with `timestamp,power_mw` rows.
    Csv,
    /// The built-in coupled synthetic fleet.
    Synthetic,
}

/// Site technology of a synthetic fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Solar,
    Wind,
}

/// The `[data]` section. CSV and synthetic sources use disjoint keys; the
/// unused group must stay absent, which is checked in [`DataSection::validate`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    /// CSV only: directory holding one `<site_id>.csv` per site.
    pub root: Option<PathBuf>,
    /// Synthetic only (defaults in parentheses): site count (4).
    pub n_sites: Option<usize>,
    /// Synthetic only: days of 5-minute data per site (400).
    pub days: Option<usize>,
    /// Synthetic only: technology ("solar").
    pub kind: Option<KindArg>,
    /// Synthetic only: nameplate capacity in MW (5.0).
    pub capacity_mw: Option<f64>,
    /// Synthetic only: cross-site coupling in [0, 1] (0.6).
    pub coupling: Option<f64>,
}

impl DataSection {
    pub fn validate(&self) -> Result<(), CliError> {
        let synthetic_keys = [
            ("n_sites", self.n_sites.is_some()),
            ("days", self.days.is_some()),
            ("kind", self.kind.is_some()),
            ("capacity_mw", self.capacity_mw.is_some()),
            ("coupling", self.coupling.is_some()),
        ];
        match self.source {
            DataSource::Csv => {
                if self.root.is_none() {
                    return Err(CliError::Usage(
                        "[data] source = \"csv\" requires a `root` directory".into(),
                    ));
                }
                if let Some((key, _)) = synthetic_keys.iter().find(|(_, set)| *set) {
                    return Err(CliError::Usage(format!(
                        "[data] key `{key}` only applies to source = \"synthetic\""
                    )));
                }
            }
            DataSource::Synthetic => {
                if self.root.is_some() {
                    return Err(CliError::Usage(
                        "[data] key `root` only applies to source = \"csv\"".into(),
                    ));
                }
                if self.n_sites == Some(0) {
                    return Err(CliError::Usage("[data] n_sites must be positive".into()));
                }
                if self.days == Some(0) {
                    return Err(CliError::Usage("[data] days must be positive".into()));
                }
                if let Some(c) = self.coupling {
                    if !(0.0..=1.0).contains(&c) {
                        return Err(CliError::Usage(format!(
                            "[data] coupling {c} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_n_scenarios() -> usize {
    200
}

/// One experiment: method, data, and hyperparameter sections. Every section
/// beyond `method` and `[data]` is optional and defaults to the library
/// defaults. The experiment seed is copied into the training and evaluation
/// sub-seeds so one number pins the whole run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Scenarios generated per site after training.
    #[serde(default = "default_n_scenarios")]
    pub n_scenarios: usize,
    pub data: DataSection,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub fed: FederationConfig,
    #[serde(default)]
    pub central: CentralConfig,
    #[serde(default)]
    pub eval: EvalSpec,
}

impl ExperimentConfig {
    /// Parse `path`, apply command-line overrides, propagate the seed, and
    /// validate. Returns the config plus the raw file bytes (copied into the
    /// run directory for provenance).
    pub fn load(
        path: &Path,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<(Self, String), CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: ExperimentConfig = toml::from_str(&raw).map_err(|e| {
            CliError::Usage(format!("config {}: {e}", path.display()))
        })?;
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        if let Some(out) = out_override {
            cfg.out_dir = out;
        }
        cfg.fed.seed = cfg.seed;
        cfg.central.seed = cfg.seed;
        cfg.eval.seed = cfg.seed;
        cfg.validate()?;
        Ok((cfg, raw))
    }

    fn validate(&self) -> Result<(), CliError> {
        self.data.validate()?;
        if self.n_scenarios == 0 {
            return Err(CliError::Usage("n_scenarios must be positive".into()));
        }
        self.net
            .validate()
            .map_err(|e| CliError::Usage(format!("[net] {e}")))?;
        if self.net.grid_side != fedscen_core::data::GRID_SIDE {
            return Err(CliError::Usage(format!(
                "[net] grid_side {} does not match the {}x{} scenario windows",
                self.net.grid_side,
                fedscen_core::data::GRID_SIDE,
                fedscen_core::data::GRID_SIDE
            )));
        }
        self.fed
            .validate()
            .map_err(|e| CliError::Usage(format!("[fed] {e}")))?;
        self.central
            .validate()
            .map_err(|e| CliError::Usage(format!("[central] {e}")))?;
        if self.net.conditional && self.method == Method::Copula {
            return Err(CliError::Usage(
                "the copula method does not use a conditional net".into(),
            ));
        }
        Ok(())
    }

    /// `<method>-seed<seed>`, the run's directory name.
    pub fn run_id(&self) -> String {
        format!("{}-seed{}", self.method.as_str(), self.seed)
    }
}
