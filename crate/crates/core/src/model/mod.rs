//! Domain types describing one power system instance.
//!
//! A [`PowerSystemSpec`] is built once (from files, from the synthetic
//! generator, or by harmonizing another spec) and is never mutated afterwards;
//! every downstream stage takes it by shared reference.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub mod defaults;
pub mod finance;
pub mod io;
pub mod synth;
mod validate;

pub use finance::annuity;
pub use io::{load_system, save_system};
pub use synth::synthesize_system;
pub use validate::{validate, Violation};

/// Hours in a full model year; sub-year horizons scale annual costs by `T / 8760`.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Default interest rate for investment annuities.
pub const DEFAULT_ANNUITY_RATE: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Country {
    /// Two-letter identifier, e.g. `DE`.
    pub code: String,
    /// Yearly electricity demand in MWh; the denominator of all portfolio shares.
    pub yearly_load_total: f64,
    pub offshore_eligible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechKind {
    Dispatchable,
    VariableRenewable,
    Storage,
    Reservoir,
    RunOfRiver,
}

/// Which harmonization factor a technology belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechGroup {
    Wind,
    Solar,
    Hydro,
    Bioenergy,
    /// Endogenous flexibility (batteries, power-to-gas); not harmonized.
    Flexibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageDuration {
    Short,
    Long,
}

/// Techno-economic parameters of one technology.
///
/// Overnight costs are per kW / kWh as tabulated; the LP builder converts them
/// to per-MW / per-MWh annuities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Technology {
    pub id: String,
    pub kind: TechKind,
    pub group: TechGroup,
    #[serde(default)]
    pub offshore: bool,
    #[serde(default)]
    pub duration: Option<StorageDuration>,
    /// EUR/MWh of generation, storage discharge or reservoir outflow.
    #[serde(default)]
    pub marginal_cost: f64,
    /// EUR/MWh of storage charging.
    #[serde(default)]
    pub marginal_cost_in: f64,
    /// EUR/kW, generation technologies.
    #[serde(default)]
    pub overnight_cost_power: Option<f64>,
    /// EUR/kWh, storage only.
    #[serde(default)]
    pub overnight_cost_energy: Option<f64>,
    /// EUR/kW, storage only.
    #[serde(default)]
    pub overnight_cost_charge: Option<f64>,
    /// EUR/kW, storage only.
    #[serde(default)]
    pub overnight_cost_discharge: Option<f64>,
    /// EUR/kW/a on every power component.
    #[serde(default)]
    pub fixed_cost: f64,
    /// EUR/kWh/a on storage energy.
    #[serde(default)]
    pub fixed_cost_energy: f64,
    pub lifetime: f64,
    #[serde(default = "one")]
    pub efficiency_in: f64,
    /// Discharge efficiency for storage; thermal efficiency for generators.
    #[serde(default = "one")]
    pub efficiency_out: f64,
    /// Share of the stored energy kept from one hour to the next.
    #[serde(default = "one")]
    pub self_discharge_retention: f64,
    pub expandable: bool,
}

fn one() -> f64 {
    1.0
}

impl Technology {
    pub fn is_storage_like(&self) -> bool {
        matches!(self.kind, TechKind::Storage | TechKind::Reservoir)
    }
}

/// Hourly input data. All series have exactly `horizon` entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSeriesSet {
    pub horizon: usize,
    /// technology id → country code → hourly capacity factor in `[0, 1]`.
    ///
    /// Run-of-river technologies use this map for their availability profile.
    pub capacity_factors: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    /// country code → hourly demand in MWh/h.
    pub load: BTreeMap<String, Vec<f64>>,
    /// country code → hourly natural inflow into reservoirs in MWh/h.
    pub reservoir_inflow: BTreeMap<String, Vec<f64>>,
}

impl TimeSeriesSet {
    pub fn capacity_factor(&self, tech: &str, country: &str) -> Option<&[f64]> {
        self.capacity_factors
            .get(tech)
            .and_then(|m| m.get(country))
            .map(Vec::as_slice)
    }

    pub fn load(&self, country: &str) -> Option<&[f64]> {
        self.load.get(country).map(Vec::as_slice)
    }

    pub fn inflow(&self, country: &str) -> Option<&[f64]> {
        self.reservoir_inflow.get(country).map(Vec::as_slice)
    }
}

/// A cross-border link with a symmetric net transfer capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interconnector {
    pub from_country: String,
    pub to_country: String,
    /// MW in either direction.
    pub ntc: f64,
}

impl Interconnector {
    /// Canonical `AAA_BBB` label with the codes in ascending order.
    pub fn label(&self) -> String {
        let (a, b) = ordered_pair(&self.from_country, &self.to_country);
        format!("{a}_{b}")
    }
}

pub(crate) fn ordered_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Legacy capacity of a non-expandable technology in one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExogenousCapacity {
    pub country: String,
    pub technology: String,
    /// MW; generation power for generators, discharge power for storage.
    pub power_discharge: f64,
    /// MW of charging power (storage only).
    #[serde(default)]
    pub power_charge: f64,
    /// MWh (storage and reservoirs only).
    #[serde(default)]
    pub energy: f64,
}

/// Fixes the capacity of an otherwise expandable technology in one country.
///
/// Harmonizing the wind factor uses this to give every country the reference
/// country's offshore wind share, regardless of offshore eligibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityOverride {
    pub country: String,
    pub technology: String,
    /// MW
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSystemSpec {
    pub countries: Vec<Country>,
    pub technologies: Vec<Technology>,
    pub time_series: TimeSeriesSet,
    pub interconnectors: Vec<Interconnector>,
    pub exogenous_capacities: Vec<ExogenousCapacity>,
    #[serde(default)]
    pub capacity_overrides: Vec<CapacityOverride>,
    pub interconnection_enabled: bool,
    #[serde(default = "default_rate")]
    pub annuity_rate: f64,
}

fn default_rate() -> f64 {
    DEFAULT_ANNUITY_RATE
}

impl PowerSystemSpec {
    pub fn horizon(&self) -> usize {
        self.time_series.horizon
    }

    pub fn country(&self, code: &str) -> Option<&Country> {
        self.countries.iter().find(|c| c.code == code)
    }

    pub fn technology(&self, id: &str) -> Option<&Technology> {
        self.technologies.iter().find(|t| t.id == id)
    }

    pub fn exogenous(&self, country: &str, tech: &str) -> Option<&ExogenousCapacity> {
        self.exogenous_capacities
            .iter()
            .find(|e| e.country == country && e.technology == tech)
    }

    pub fn capacity_override(&self, country: &str, tech: &str) -> Option<f64> {
        self.capacity_overrides
            .iter()
            .find(|o| o.country == country && o.technology == tech)
            .map(|o| o.power)
    }

    /// Country codes in ascending order.
    pub fn country_codes(&self) -> Vec<&str> {
        let mut codes: Vec<&str> = self.countries.iter().map(|c| c.code.as_str()).collect();
        codes.sort_unstable();
        codes
    }

    /// Technologies sorted by id.
    pub fn sorted_technologies(&self) -> Vec<&Technology> {
        let mut techs: Vec<&Technology> = self.technologies.iter().collect();
        techs.sort_by(|a, b| a.id.cmp(&b.id));
        techs
    }

    /// Scale applied to annual cost terms for the modelled horizon.
    pub fn horizon_scale(&self) -> f64 {
        self.horizon() as f64 / HOURS_PER_YEAR
    }

    /// Sum of the load series of one country over the horizon.
    pub fn horizon_load(&self, country: &str) -> f64 {
        self.time_series.load(country).map(|s| s.iter().sum()).unwrap_or(0.0)
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Restricts the system to a single country without interconnection.
    pub fn isolate(&self, code: &str) -> crate::Result<PowerSystemSpec> {
        let country = self
            .country(code)
            .ok_or_else(|| crate::Error::UnknownCountry(code.to_string()))?
            .clone();
        let keep = |c: &String| c == code;
        let ts = &self.time_series;
        let time_series = TimeSeriesSet {
            horizon: ts.horizon,
            capacity_factors: ts
                .capacity_factors
                .iter()
                .map(|(tech, m)| {
                    let inner = m
                        .iter()
                        .filter(|(c, _)| keep(c))
                        .map(|(c, v)| (c.clone(), v.clone()))
                        .collect();
                    (tech.clone(), inner)
                })
                .collect(),
            load: ts
                .load
                .iter()
                .filter(|(c, _)| keep(c))
                .map(|(c, v)| (c.clone(), v.clone()))
                .collect(),
            reservoir_inflow: ts
                .reservoir_inflow
                .iter()
                .filter(|(c, _)| keep(c))
                .map(|(c, v)| (c.clone(), v.clone()))
                .collect(),
        };
        Ok(PowerSystemSpec {
            countries: vec![country],
            technologies: self.technologies.clone(),
            time_series,
            interconnectors: Vec::new(),
            exogenous_capacities: self
                .exogenous_capacities
                .iter()
                .filter(|e| keep(&e.country))
                .cloned()
                .collect(),
            capacity_overrides: self
                .capacity_overrides
                .iter()
                .filter(|o| keep(&o.country))
                .cloned()
                .collect(),
            interconnection_enabled: false,
            annuity_rate: self.annuity_rate,
        })
    }
}

impl fmt::Display for TechKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TechKind::Dispatchable => "dispatchable",
            TechKind::VariableRenewable => "variable-renewable",
            TechKind::Storage => "storage",
            TechKind::Reservoir => "reservoir",
            TechKind::RunOfRiver => "run-of-river",
        };
        f.write_str(s)
    }
}
