//! Deterministic synthetic wind and solar fleets for tests and demo runs.
//!
//! Every site in a fleet mixes a shared slow "weather" driver with its own
//! noise, so cross-site correlation is a dial: `coupling = 0` gives
//! independent sites, `coupling = 1` gives sites that differ only through
//! fast local turbulence (wind) or not at all (solar cloud cover).

use super::{TimeSeries, STEP_MINUTES};
use crate::rng::{self, Stream};
use chrono::{DateTime, Timelike, Utc};
use rand::Rng;
use rand_distr::StandardNormal;

/// Technology of a synthetic site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Wind,
    Solar,
}

/// Configuration for one synthetic site.
#[derive(Debug, Clone)]
pub struct SiteParams {
    pub site_id: String,
    pub kind: SiteKind,
    /// Nameplate capacity in MW; output lives in `[0, capacity_mw]`.
    pub capacity_mw: f64,
    /// Weight on the shared fleet driver, in `[0, 1]`.
    pub coupling: f64,
    /// Solar only: local sunrise, in fractional hours.
    pub sunrise_hour: f64,
    /// Solar only: local sunset, in fractional hours.
    pub sunset_hour: f64,
}

impl SiteParams {
    pub fn wind(site_id: impl Into<String>, capacity_mw: f64, coupling: f64) -> Self {
        Self {
            site_id: site_id.into(),
            kind: SiteKind::Wind,
            capacity_mw,
            coupling,
            sunrise_hour: 6.0,
            sunset_hour: 18.0,
        }
    }

    pub fn solar(site_id: impl Into<String>, capacity_mw: f64, coupling: f64) -> Self {
        Self {
            site_id: site_id.into(),
            kind: SiteKind::Solar,
            capacity_mw,
            coupling,
            sunrise_hour: 6.0,
            sunset_hour: 18.0,
        }
    }
}

/// Persistence of the shared/slow weather processes.
const SLOW_PHI: f64 = 0.99;
/// Persistence of the fast per-site turbulence process (wind only).
const FAST_PHI: f64 = 0.7;
/// Weight of fast turbulence in the wind sigmoid argument.
const FAST_WEIGHT: f64 = 0.15;
/// Steepness of the wind power curve.
const WIND_GAIN: f64 = 1.5;
/// Offset of the wind power curve.
const WIND_LEVEL: f64 = -0.2;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Stationary unit-variance AR(1): `x_{t+1} = phi * x_t + sqrt(1 - phi^2) * eps`.
fn ar1(rng: &mut impl Rng, phi: f64, n: usize) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut state: f64 = rng.sample(StandardNormal);
    for _ in 0..n {
        x.push(state);
        let eps: f64 = rng.sample(StandardNormal);
        state = phi * state + innov * eps;
    }
    x
}

/// The fleet-wide slow weather driver for a given experiment seed.
pub fn fleet_driver(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = rng::derive(seed, Stream::Driver, &[]);
    ar1(&mut rng, SLOW_PHI, n)
}

/// Mix the shared driver with a site-local slow process at weight `coupling`.
fn mixed_slow(site_rng: &mut impl Rng, driver: &[f64], coupling: f64) -> Vec<f64> {
    let own = ar1(site_rng, SLOW_PHI, driver.len());
    let residual = (1.0 - coupling * coupling).sqrt();
    driver
        .iter()
        .zip(own)
        .map(|(d, e)| coupling * d + residual * e)
        .collect()
}

/// Synthesize a wind site: a slow weather state pushed through a sigmoid
/// power curve, roughened by fast local turbulence.
pub fn synth_wind(
    seed: u64,
    driver: &[f64],
    params: &SiteParams,
    t0: DateTime<Utc>,
) -> TimeSeries {
    let mut site_rng = rng::derive(seed, Stream::Site, &[rng::hash_str(&params.site_id)]);
    let slow = mixed_slow(&mut site_rng, driver, params.coupling);
    let fast = ar1(&mut site_rng, FAST_PHI, driver.len());
    let values = slow
        .iter()
        .zip(fast)
        .map(|(x, f)| params.capacity_mw * sigmoid(WIND_GAIN * (x + FAST_WEIGHT * f) + WIND_LEVEL))
        .collect();
    TimeSeries::new(&params.site_id, t0, values).expect("synthetic wind values are finite")
}

/// Clear-sky shape: a half sine between sunrise and sunset, exactly zero at
/// night.
fn clearsky(hour: f64, sunrise: f64, sunset: f64) -> f64 {
    if hour <= sunrise || hour >= sunset {
        return 0.0;
    }
    (std::f64::consts::PI * (hour - sunrise) / (sunset - sunrise)).sin()
}

/// Synthesize a solar site: half-sine clear-sky profile scaled by a slowly
/// varying cloud-cover factor.
pub fn synth_solar(
    seed: u64,
    driver: &[f64],
    params: &SiteParams,
    t0: DateTime<Utc>,
) -> TimeSeries {
    let mut site_rng = rng::derive(seed, Stream::Site, &[rng::hash_str(&params.site_id)]);
    let slow = mixed_slow(&mut site_rng, driver, params.coupling);
    let values = slow
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let stamp = t0 + chrono::Duration::minutes(STEP_MINUTES * i as i64);
            let hour = stamp.hour() as f64 + stamp.minute() as f64 / 60.0;
            let sky = clearsky(hour, params.sunrise_hour, params.sunset_hour);
            let cloud = sigmoid(1.2 + 0.9 * y);
            params.capacity_mw * sky * cloud
        })
        .collect();
    TimeSeries::new(&params.site_id, t0, values).expect("synthetic solar values are finite")
}

/// Synthesize one site of either kind.
pub fn synth_site(
    seed: u64,
    driver: &[f64],
    params: &SiteParams,
    t0: DateTime<Utc>,
) -> TimeSeries {
    match params.kind {
        SiteKind::Wind => synth_wind(seed, driver, params, t0),
        SiteKind::Solar => synth_solar(seed, driver, params, t0),
    }
}
