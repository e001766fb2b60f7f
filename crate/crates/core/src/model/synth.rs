//! Seeded synthetic systems for desk-scale experiments.
//!
//! Wind availability is driven by AR(1) latent processes: country 0 follows a
//! common process `u`, every other country `c·u + sqrt(1-c²)·v_k` where `v_k`
//! is orthogonalized against `u` within the sample, so the latent sample
//! correlation with country 0 is exactly `c`. Solar, load and portfolio
//! differences between countries are kept deliberately small.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::defaults::{default_technologies, ids};
use super::{
    Country, ExogenousCapacity, Interconnector, PowerSystemSpec, TimeSeriesSet, DEFAULT_ANNUITY_RATE, HOURS_PER_YEAR,
};
use crate::{Error, Result};

const CODES: [&str; 12] = ["DE", "FR", "AT", "BE", "CH", "CZ", "DK", "ES", "IT", "NL", "PL", "PT"];

/// Hour-to-hour persistence of the wind latent process.
const WIND_PERSISTENCE: f64 = 0.95;

fn country_code(i: usize) -> String {
    if i < CODES.len() {
        CODES[i].to_string()
    } else {
        let k = i - CODES.len();
        let first = (b'Q' + (k / 26) as u8) as char;
        let second = (b'A' + (k % 26) as u8) as char;
        format!("{first}{second}")
    }
}

fn ar1(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = (1.0 - WIND_PERSISTENCE * WIND_PERSISTENCE).sqrt();
    let mut x: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            x = WIND_PERSISTENCE * x + scale * e;
            x
        })
        .collect()
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Builds a deterministic synthetic system.
///
/// `correlation` sets the latent wind correlation between country 0 and every
/// other country. Loads are tens of MW so the LP stays well scaled; NTCs are
/// half the smaller mean load of the two connected countries.
pub fn synthesize_system(seed: u64, n_countries: usize, horizon: usize, correlation: f64) -> Result<PowerSystemSpec> {
    if n_countries == 0 {
        return Err(Error::InvalidArgument("need at least one country".into()));
    }
    if horizon < 2 {
        return Err(Error::InvalidArgument("horizon must be at least 2 hours".into()));
    }
    if !(-1.0..=1.0).contains(&correlation) {
        return Err(Error::InvalidArgument(format!(
            "correlation {correlation} outside [-1, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes: Vec<String> = (0..n_countries).map(country_code).collect();

    // Wind latent processes.
    let mut common = ar1(&mut rng, horizon);
    standardize(&mut common);
    let residual_weight = (1.0 - correlation * correlation).max(0.0).sqrt();
    let latent: Vec<Vec<f64>> = (0..n_countries)
        .map(|k| {
            if k == 0 {
                return common.clone();
            }
            let mut own = ar1(&mut rng, horizon);
            standardize(&mut own);
            let proj = own.iter().zip(&common).map(|(a, b)| a * b).sum::<f64>() / horizon as f64;
            own.iter_mut().zip(&common).for_each(|(a, b)| *a -= proj * b);
            standardize(&mut own);
            common
                .iter()
                .zip(&own)
                .map(|(u, v)| correlation * u + residual_weight * v)
                .collect()
        })
        .collect();

    // Daily clearness shared across countries with small local noise.
    let days = horizon.div_ceil(24);
    let common_clearness: Vec<f64> = (0..days).map(|_| rng.random_range(0.35..1.0)).collect();

    let mut cf_on = BTreeMap::new();
    let mut cf_off = BTreeMap::new();
    let mut cf_pv = BTreeMap::new();
    let mut cf_ror = BTreeMap::new();
    let mut load = BTreeMap::new();
    let mut inflow = BTreeMap::new();
    let mut countries = Vec::new();
    let mut exogenous = Vec::new();
    let mut mean_loads = Vec::new();

    for (k, code) in codes.iter().enumerate() {
        let z = &latent[k];
        cf_on.insert(
            code.clone(),
            z.iter().map(|x| logistic(-0.9 + 1.5 * x)).collect::<Vec<_>>(),
        );
        cf_off.insert(
            code.clone(),
            z.iter().map(|x| logistic(-0.1 + 1.4 * x)).collect::<Vec<_>>(),
        );

        let clearness: Vec<f64> = common_clearness
            .iter()
            .map(|c| {
                let noise: f64 = rng.sample(StandardNormal);
                (c + 0.05 * noise).clamp(0.2, 1.0)
            })
            .collect();
        let pv: Vec<f64> = (0..horizon)
            .map(|h| {
                let hod = (h % 24) as f64;
                let sun = (std::f64::consts::PI * (hod - 6.0) / 12.0).sin().max(0.0);
                0.85 * clearness[h / 24] * sun
            })
            .collect();
        cf_pv.insert(code.clone(), pv);

        let mean_load = 100.0 * (0.6 + 0.8 * rng.random::<f64>());
        let phase: f64 = rng.random_range(-1.0..1.0);
        let mut profile: Vec<f64> = (0..horizon)
            .map(|h| {
                let hod = (h % 24) as f64 + phase;
                let daily = 1.0 + 0.12 * (2.0 * std::f64::consts::PI * (hod - 9.0) / 24.0).sin();
                let weekly = if (h / 24) % 7 >= 5 { 0.9 } else { 1.0 };
                let noise: f64 = rng.sample(StandardNormal);
                (daily * weekly * (1.0 + 0.02 * noise)).max(0.1)
            })
            .collect();
        let avg = profile.iter().sum::<f64>() / horizon as f64;
        profile.iter_mut().for_each(|p| *p *= mean_load / avg);
        load.insert(code.clone(), profile);
        mean_loads.push(mean_load);

        let offshore_eligible = k == 0 || rng.random_bool(0.5);
        countries.push(Country {
            code: code.clone(),
            yearly_load_total: mean_load * HOURS_PER_YEAR,
            offshore_eligible,
        });

        let bio = rng.random_range(0.02..0.08) * mean_load;
        let ror = rng.random_range(0.02..0.08) * mean_load;
        let phs = rng.random_range(0.0..0.05) * mean_load;
        let open = if rng.random_bool(0.5) {
            rng.random_range(0.0..0.04) * mean_load
        } else {
            0.0
        };
        let res = rng.random_range(0.0..0.06) * mean_load;
        let ror_phase: f64 = rng.random_range(0.0..1.0);
        cf_ror.insert(
            code.clone(),
            (0..horizon)
                .map(|h| {
                    let t = h as f64 / horizon as f64 + ror_phase;
                    (0.55 + 0.15 * (2.0 * std::f64::consts::PI * t).sin()).clamp(0.0, 1.0)
                })
                .collect::<Vec<_>>(),
        );
        inflow.insert(
            code.clone(),
            (0..horizon)
                .map(|h| {
                    let t = h as f64 / 168.0;
                    res * 0.35 * (1.0 + 0.2 * (2.0 * std::f64::consts::PI * t).sin())
                })
                .collect::<Vec<_>>(),
        );
        let mut push = |tech: &str, dis: f64, ch: f64, e: f64| {
            exogenous.push(ExogenousCapacity {
                country: code.clone(),
                technology: tech.to_string(),
                power_discharge: dis,
                power_charge: ch,
                energy: e,
            })
        };
        push(ids::BIOENERGY, bio, 0.0, 0.0);
        push(ids::RUN_OF_RIVER, ror, 0.0, 0.0);
        push(ids::PHS_CLOSED, phs, phs, phs * 8.0);
        push(ids::PHS_OPEN, open, 0.9 * open, open * 100.0);
        push(ids::RESERVOIR, res, 0.0, res * 400.0);
    }

    let interconnectors = (1..n_countries)
        .map(|k| Interconnector {
            from_country: codes[k - 1].clone(),
            to_country: codes[k].clone(),
            ntc: 0.5 * mean_loads[k - 1].min(mean_loads[k]),
        })
        .collect();

    let mut capacity_factors = BTreeMap::new();
    capacity_factors.insert(ids::WIND_ONSHORE.to_string(), cf_on);
    capacity_factors.insert(ids::WIND_OFFSHORE.to_string(), cf_off);
    capacity_factors.insert(ids::PV.to_string(), cf_pv);
    capacity_factors.insert(ids::RUN_OF_RIVER.to_string(), cf_ror);

    Ok(PowerSystemSpec {
        countries,
        technologies: default_technologies(),
        time_series: TimeSeriesSet {
            horizon,
            capacity_factors,
            load,
            reservoir_inflow: inflow,
        },
        interconnectors,
        exogenous_capacities: exogenous,
        capacity_overrides: Vec::new(),
        interconnection_enabled: true,
        annuity_rate: DEFAULT_ANNUITY_RATE,
    })
}
