//! Storage metrics extracted from a solved scenario.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lp::{installed_capacities, LinearProgram};
use crate::model::{PowerSystemSpec, StorageDuration, TechKind};
use crate::solver::SolveResult;
use crate::{Error, Result};

/// Aggregate quantity a factorization is run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// MWh
    ShortStorageEnergy,
    /// MWh
    LongStorageEnergy,
    /// MW
    ShortStoragePower,
    /// MW
    LongStoragePower,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::ShortStorageEnergy,
        Metric::LongStorageEnergy,
        Metric::ShortStoragePower,
        Metric::LongStoragePower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ShortStorageEnergy => "short_storage_energy",
            Metric::LongStorageEnergy => "long_storage_energy",
            Metric::ShortStoragePower => "short_storage_power",
            Metric::LongStoragePower => "long_storage_power",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::ShortStorageEnergy | Metric::LongStorageEnergy => "MWh",
            Metric::ShortStoragePower | Metric::LongStoragePower => "MW",
        }
    }

    pub fn of(self, s: &StorageCapacity) -> f64 {
        match self {
            Metric::ShortStorageEnergy => s.short_energy,
            Metric::LongStorageEnergy => s.long_energy,
            Metric::ShortStoragePower => s.short_power,
            Metric::LongStoragePower => s.long_power,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

/// Storage capacities by duration class; power is discharging power.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StorageCapacity {
    pub short_energy: f64,
    pub long_energy: f64,
    pub short_power: f64,
    pub long_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSummary {
    pub per_country: BTreeMap<String, StorageCapacity>,
    pub total: StorageCapacity,
}

impl StorageSummary {
    pub fn value(&self, metric: Metric) -> f64 {
        metric.of(&self.total)
    }
}

/// Sums storage capacities of every storage technology with a duration class.
pub fn storage_summary(spec: &PowerSystemSpec, lp: &LinearProgram, result: &SolveResult) -> StorageSummary {
    let installed = installed_capacities(spec, lp, &result.primal);
    let mut per_country: BTreeMap<String, StorageCapacity> = spec
        .country_codes()
        .into_iter()
        .map(|c| (c.to_string(), StorageCapacity::default()))
        .collect();
    for ((country, tech_id), cap) in &installed {
        let Some(tech) = spec.technology(tech_id) else { continue };
        if tech.kind != TechKind::Storage {
            continue;
        }
        let entry = per_country.get_mut(country).expect("country listed");
        match tech.duration {
            Some(StorageDuration::Short) => {
                entry.short_energy += cap.energy;
                entry.short_power += cap.power;
            }
            Some(StorageDuration::Long) => {
                entry.long_energy += cap.energy;
                entry.long_power += cap.power;
            }
            None => {}
        }
    }
    let mut total = StorageCapacity::default();
    for s in per_country.values() {
        total.short_energy += s.short_energy;
        total.long_energy += s.long_energy;
        total.short_power += s.short_power;
        total.long_power += s.long_power;
    }
    StorageSummary { per_country, total }
}
