//! The `synth` subcommand: write a synthetic fleet in the input CSV format,
//! one `timestamp,power_mw` file per site under `<out>/<fleet>/`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{SecondsFormat, TimeZone, Utc};
use fedscen_core::data::{fleet_driver, synth_site, SiteParams};

use crate::CliError;

/// Site technology selector for the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Solar,
    Wind,
}

pub fn synth(
    fleet: &str,
    n_sites: usize,
    days: usize,
    kind: Kind,
    capacity_mw: f64,
    coupling: f64,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    if n_sites == 0 || days == 0 {
        return Err(CliError::Usage("n-sites and days must both be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(CliError::Usage(format!("coupling {coupling} is outside [0, 1]")));
    }
    if capacity_mw <= 0.0 {
        return Err(CliError::Usage(format!("capacity {capacity_mw} MW is not positive")));
    }

    let dir = out.join(fleet);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let driver = fleet_driver(seed, days * 288);
    for i in 0..n_sites {
        let site_id = format!("site{i}");
        let params = match kind {
            Kind::Solar => SiteParams::solar(&site_id, capacity_mw, coupling),
            Kind::Wind => SiteParams::wind(&site_id, capacity_mw, coupling),
        };
        let series = synth_site(seed, &driver, &params, t0);
        let mut body = String::with_capacity(32 * series.values.len());
        body.push_str("timestamp,power_mw\n");
        for (j, v) in series.values.iter().enumerate() {
            let stamp = series.time_at(j).to_rfc3339_opts(SecondsFormat::Secs, true);
            writeln!(body, "{stamp},{v}").unwrap();
        }
        let path = dir.join(format!("{site_id}.csv"));
        fs::write(&path, body)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}
