//! Built-in techno-economic and capacity tables.
//!
//! The raw tables are kept in their published units (EUR/kW, GW, GWh, MW);
//! [`default_technologies`], [`default_exogenous`] and [`default_ntc`]
//! convert them into model entities.

use super::{ExogenousCapacity, Interconnector, StorageDuration, TechGroup, TechKind, Technology};

/// Row of the installable generation technology table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationRow {
    pub technology: &'static str,
    /// Thermal efficiency as a fraction.
    pub efficiency: f64,
    /// EUR/kW
    pub overnight_cost: f64,
    /// years
    pub lifetime: f64,
}

pub const GENERATION_TABLE: [GenerationRow; 5] = [
    GenerationRow {
        technology: "Bioenergy",
        efficiency: 0.487,
        overnight_cost: 1951.0,
        lifetime: 30.0,
    },
    GenerationRow {
        technology: "Run-of-river",
        efficiency: 0.9,
        overnight_cost: 600.0,
        lifetime: 25.0,
    },
    GenerationRow {
        technology: "PV",
        efficiency: 1.0,
        overnight_cost: 3000.0,
        lifetime: 50.0,
    },
    GenerationRow {
        technology: "Wind offshore",
        efficiency: 1.0,
        overnight_cost: 2506.0,
        lifetime: 25.0,
    },
    GenerationRow {
        technology: "Wind onshore",
        efficiency: 1.0,
        overnight_cost: 1182.0,
        lifetime: 25.0,
    },
];

/// Row of the storage technology table. Efficiencies in percent as published.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageRow {
    pub technology: &'static str,
    /// EUR/MWh; `None` where the table has a dash.
    pub marginal_cost_in: Option<f64>,
    pub marginal_cost_out: f64,
    pub efficiency_in_pct: Option<f64>,
    pub efficiency_out_pct: f64,
    pub self_discharge_pct: f64,
    /// EUR/kWh
    pub overnight_cost_energy: f64,
    /// EUR/kW
    pub overnight_cost_charge: Option<f64>,
    /// EUR/kW
    pub overnight_cost_discharge: f64,
    pub lifetime: f64,
}

pub const STORAGE_TABLE: [StorageRow; 4] = [
    StorageRow {
        technology: "Lithium-Ion",
        marginal_cost_in: Some(0.5),
        marginal_cost_out: 0.5,
        efficiency_in_pct: Some(92.0),
        efficiency_out_pct: 92.0,
        self_discharge_pct: 100.0,
        overnight_cost_energy: 200.0,
        overnight_cost_charge: Some(150.0),
        overnight_cost_discharge: 150.0,
        lifetime: 13.0,
    },
    StorageRow {
        technology: "Power-to-gas-to-power",
        marginal_cost_in: Some(0.5),
        marginal_cost_out: 0.5,
        efficiency_in_pct: Some(50.0),
        efficiency_out_pct: 50.0,
        self_discharge_pct: 100.0,
        overnight_cost_energy: 1.0,
        overnight_cost_charge: Some(3000.0),
        overnight_cost_discharge: 3000.0,
        lifetime: 20.0,
    },
    StorageRow {
        technology: "Pumped-hydro",
        marginal_cost_in: Some(0.5),
        marginal_cost_out: 0.5,
        efficiency_in_pct: Some(80.0),
        efficiency_out_pct: 80.0,
        self_discharge_pct: 100.0,
        overnight_cost_energy: 80.0,
        overnight_cost_charge: Some(1100.0),
        overnight_cost_discharge: 1100.0,
        lifetime: 60.0,
    },
    StorageRow {
        technology: "Reservoir",
        marginal_cost_in: None,
        marginal_cost_out: 0.1,
        efficiency_in_pct: None,
        efficiency_out_pct: 95.0,
        self_discharge_pct: 100.0,
        overnight_cost_energy: 10.0,
        overnight_cost_charge: None,
        overnight_cost_discharge: 200.0,
        lifetime: 50.0,
    },
];

/// Column order of [`EXOGENOUS_TABLE`].
pub const TABLE_COUNTRIES: [&str; 12] = ["AT", "BE", "CH", "CZ", "DE", "DK", "ES", "FR", "IT", "NL", "PL", "PT"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExogenousVariable {
    /// GW
    Power,
    /// GW
    DischargingPower,
    /// GW
    ChargingPower,
    /// GWh
    Energy,
}

/// Row of the exogenous capacity table: one value per [`TABLE_COUNTRIES`] entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExogenousRow {
    pub technology: &'static str,
    pub variable: ExogenousVariable,
    pub values: [f64; 12],
}

use ExogenousVariable::*;

#[rustfmt::skip]
#[allow(clippy::approx_constant)] // ES charging power is 3.14 GW
pub const EXOGENOUS_TABLE: [ExogenousRow; 10] = [
    ExogenousRow { technology: "Bioenergy", variable: Power,
        values: [0.50, 0.62, 0.0, 0.40, 7.75, 1.72, 0.51, 1.93, 1.54, 0.46, 0.85, 0.61] },
    ExogenousRow { technology: "Run-of-River", variable: Power,
        values: [5.56, 0.17, 0.64, 0.33, 3.99, 0.01, 1.16, 10.96, 10.65, 0.04, 0.44, 2.86] },
    ExogenousRow { technology: "Pumped-hydro (closed)", variable: DischargingPower,
        values: [0.0, 1.31, 3.99, 0.69, 6.06, 0.0, 3.33, 1.96, 4.01, 0.0, 1.32, 0.0] },
    ExogenousRow { technology: "Pumped-hydro (closed)", variable: ChargingPower,
        values: [0.0, 1.15, 3.94, 0.65, 6.07, 0.0, 3.14, 1.95, 4.07, 0.0, 1.49, 0.0] },
    ExogenousRow { technology: "Pumped-hydro (closed)", variable: Energy,
        values: [0.0, 5.30, 670.0, 3.70, 355.0, 0.0, 95.40, 10.0, 22.40, 0.0, 6.34, 0.0] },
    ExogenousRow { technology: "Pumped-hydro (open)", variable: DischargingPower,
        values: [3.46, 0.0, 0.0, 0.47, 1.64, 0.0, 2.68, 1.85, 3.57, 0.0, 0.18, 2.95] },
    ExogenousRow { technology: "Pumped-hydro (open)", variable: ChargingPower,
        values: [2.56, 0.0, 0.0, 0.44, 1.36, 0.0, 2.42, 1.85, 2.34, 0.0, 0.17, 2.70] },
    ExogenousRow { technology: "Pumped-hydro (open)", variable: Energy,
        values: [1722.0, 0.0, 0.0, 2.0, 417.0, 0.0, 6185.0, 90.0, 382.0, 0.0, 2.0, 1966.0] },
    ExogenousRow { technology: "Reservoir", variable: DischargingPower,
        values: [2.43, 0.0, 8.15, 0.70, 1.30, 0.0, 10.97, 8.48, 9.96, 0.0, 0.18, 3.49] },
    ExogenousRow { technology: "Reservoir", variable: Energy,
        values: [762.0, 0.0, 8155.0, 3.0, 258.0, 0.0, 11840.0, 10000.0, 5649.0, 0.0, 1.0, 1187.0] },
];

/// Net transfer capacities in MW, keyed by `AA_BB`.
pub const NTC_TABLE: [(&str, f64); 20] = [
    ("AT_CH", 1700.0),
    ("AT_CZ", 1100.0),
    ("AT_DE", 7500.0),
    ("AT_IT", 1470.0),
    ("BE_DE", 1000.0),
    ("BE_FR", 5050.0),
    ("BE_NL", 4900.0),
    ("CH_DE", 5300.0),
    ("CH_FR", 4000.0),
    ("CH_IT", 4850.0),
    ("CZ_DE", 2300.0),
    ("CZ_PL", 700.0),
    ("DE_DK", 4000.0),
    ("DE_FR", 4800.0),
    ("DE_NL", 5000.0),
    ("DE_PL", 3750.0),
    ("DK_PL", 500.0),
    ("ES_FR", 9000.0),
    ("ES_PT", 4350.0),
    ("FR_IT", 3255.0),
];

/// Model technology ids.
pub mod ids {
    pub const BIOENERGY: &str = "bioenergy";
    pub const RUN_OF_RIVER: &str = "run_of_river";
    pub const PV: &str = "pv";
    pub const WIND_OFFSHORE: &str = "wind_offshore";
    pub const WIND_ONSHORE: &str = "wind_onshore";
    pub const LI_ION: &str = "li_ion";
    pub const P2G: &str = "p2g";
    pub const PHS_CLOSED: &str = "phs_closed";
    pub const PHS_OPEN: &str = "phs_open";
    pub const RESERVOIR: &str = "reservoir";
}

fn generation_row(name: &str) -> &'static GenerationRow {
    GENERATION_TABLE
        .iter()
        .find(|r| r.technology == name)
        .expect("generation row present")
}

fn storage_row(name: &str) -> &'static StorageRow {
    STORAGE_TABLE
        .iter()
        .find(|r| r.technology == name)
        .expect("storage row present")
}

fn generator(id: &str, row: &str, kind: TechKind, group: TechGroup, offshore: bool, expandable: bool) -> Technology {
    let r = generation_row(row);
    Technology {
        id: id.to_string(),
        kind,
        group,
        offshore,
        duration: None,
        marginal_cost: 0.0,
        marginal_cost_in: 0.0,
        overnight_cost_power: Some(r.overnight_cost),
        overnight_cost_energy: None,
        overnight_cost_charge: None,
        overnight_cost_discharge: None,
        fixed_cost: 0.0,
        fixed_cost_energy: 0.0,
        lifetime: r.lifetime,
        efficiency_in: 1.0,
        efficiency_out: r.efficiency,
        self_discharge_retention: 1.0,
        expandable,
    }
}

fn storage(
    id: &str,
    row: &str,
    kind: TechKind,
    group: TechGroup,
    duration: Option<StorageDuration>,
    expandable: bool,
) -> Technology {
    let r = storage_row(row);
    Technology {
        id: id.to_string(),
        kind,
        group,
        offshore: false,
        duration,
        marginal_cost: r.marginal_cost_out,
        marginal_cost_in: r.marginal_cost_in.unwrap_or(0.0),
        overnight_cost_power: None,
        overnight_cost_energy: Some(r.overnight_cost_energy),
        overnight_cost_charge: r.overnight_cost_charge,
        overnight_cost_discharge: Some(r.overnight_cost_discharge),
        fixed_cost: 0.0,
        fixed_cost_energy: 0.0,
        lifetime: r.lifetime,
        efficiency_in: r.efficiency_in_pct.map_or(1.0, |p| p / 100.0),
        efficiency_out: r.efficiency_out_pct / 100.0,
        self_discharge_retention: r.self_discharge_pct / 100.0,
        expandable,
    }
}

/// The ten model technologies, with wind, PV, lithium-ion and power-to-gas
/// expandable and the hydro and bioenergy fleets fixed.
///
/// Generator marginal costs are not tabulated and default to zero.
pub fn default_technologies() -> Vec<Technology> {
    use ids::*;
    use TechGroup as G;
    use TechKind as K;
    vec![
        generator(BIOENERGY, "Bioenergy", K::Dispatchable, G::Bioenergy, false, false),
        storage(
            LI_ION,
            "Lithium-Ion",
            K::Storage,
            G::Flexibility,
            Some(StorageDuration::Short),
            true,
        ),
        storage(
            P2G,
            "Power-to-gas-to-power",
            K::Storage,
            G::Flexibility,
            Some(StorageDuration::Long),
            true,
        ),
        storage(PHS_CLOSED, "Pumped-hydro", K::Storage, G::Hydro, None, false),
        storage(PHS_OPEN, "Pumped-hydro", K::Storage, G::Hydro, None, false),
        generator(PV, "PV", K::VariableRenewable, G::Solar, false, true),
        storage(RESERVOIR, "Reservoir", K::Reservoir, G::Hydro, None, false),
        generator(RUN_OF_RIVER, "Run-of-river", K::RunOfRiver, G::Hydro, false, false),
        generator(
            WIND_OFFSHORE,
            "Wind offshore",
            K::VariableRenewable,
            G::Wind,
            true,
            true,
        ),
        generator(WIND_ONSHORE, "Wind onshore", K::VariableRenewable, G::Wind, false, true),
    ]
}

fn table_value(technology: &str, variable: ExogenousVariable, country_index: usize) -> f64 {
    EXOGENOUS_TABLE
        .iter()
        .find(|r| r.technology == technology && r.variable == variable)
        .map_or(0.0, |r| r.values[country_index])
}

/// Exogenous capacities of one tabulated country in MW / MWh.
///
/// Returns `None` for codes outside [`TABLE_COUNTRIES`]. Entries with all-zero
/// values are omitted.
pub fn default_exogenous(country: &str) -> Option<Vec<ExogenousCapacity>> {
    let idx = TABLE_COUNTRIES.iter().position(|c| *c == country)?;
    let gw = |t, v| table_value(t, v, idx) * 1000.0;
    let mut out = Vec::new();
    let mut push = |tech: &str, dis: f64, ch: f64, e: f64| {
        if dis > 0.0 || ch > 0.0 || e > 0.0 {
            out.push(ExogenousCapacity {
                country: country.to_string(),
                technology: tech.to_string(),
                power_discharge: dis,
                power_charge: ch,
                energy: e,
            });
        }
    };
    push(ids::BIOENERGY, gw("Bioenergy", Power), 0.0, 0.0);
    push(ids::RUN_OF_RIVER, gw("Run-of-River", Power), 0.0, 0.0);
    for (id, name) in [
        (ids::PHS_CLOSED, "Pumped-hydro (closed)"),
        (ids::PHS_OPEN, "Pumped-hydro (open)"),
    ] {
        push(
            id,
            gw(name, DischargingPower),
            gw(name, ChargingPower),
            gw(name, Energy),
        );
    }
    push(
        ids::RESERVOIR,
        gw("Reservoir", DischargingPower),
        0.0,
        gw("Reservoir", Energy),
    );
    Some(out)
}

/// Tabulated NTC between two countries in MW, in either order.
pub fn default_ntc(a: &str, b: &str) -> Option<f64> {
    let (x, y) = super::ordered_pair(a, b);
    let key = format!("{x}_{y}");
    NTC_TABLE.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

/// All tabulated links among `countries`.
pub fn default_interconnectors(countries: &[&str]) -> Vec<Interconnector> {
    NTC_TABLE
        .iter()
        .filter_map(|(key, ntc)| {
            let (a, b) = key.split_once('_')?;
            (countries.contains(&a) && countries.contains(&b)).then(|| Interconnector {
                from_country: a.to_string(),
                to_country: b.to_string(),
                ntc: *ntc,
            })
        })
        .collect()
}
