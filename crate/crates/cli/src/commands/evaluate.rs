//! The `evaluate` subcommand: score a generated scenario CSV against a real
//! one and emit the metric report as JSON, standalone from any run directory.

use std::fs;
use std::path::Path;

use fedscen_core::metrics::{evaluate_pair, EvalSpec, ScenarioSet, Source};

use crate::CliError;

pub fn evaluate(
    real: &Path,
    generated: &Path,
    out: Option<&Path>,
    k_clusters: usize,
    crps_leads: &[usize],
    seed: u64,
) -> Result<(), CliError> {
    if k_clusters == 0 {
        return Err(CliError::Usage("k-clusters must be at least 1".into()));
    }
    let real_set = ScenarioSet::read_csv(real, Source::Real, "real")
        .map_err(|e| CliError::Usage(format!("reading {}: {e}", real.display())))?;
    let gen_set = ScenarioSet::read_csv(generated, Source::Generated, "generated")
        .map_err(|e| CliError::Usage(format!("reading {}: {e}", generated.display())))?;
    if real_set.width() != gen_set.width() {
        return Err(CliError::Usage(format!(
            "width mismatch: real scenarios have {} values, generated have {}",
            real_set.width(),
            gen_set.width()
        )));
    }
    if let Some(&lead) = crps_leads.iter().find(|&&l| l >= gen_set.width()) {
        return Err(CliError::Usage(format!(
            "crps lead {lead} is out of range for scenarios of {} values",
            gen_set.width()
        )));
    }

    let spec = EvalSpec {
        k_clusters,
        crps_leads: crps_leads.to_vec(),
        seed,
        ..EvalSpec::default()
    };
    let report = evaluate_pair(&real_set, &gen_set, &spec)
        .map_err(|e| CliError::Runtime(format!("evaluating: {e}")))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("serializing the report: {e}")))?;
    match out {
        Some(path) => fs::write(path, json)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(())
}
