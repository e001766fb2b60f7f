//! Translation of a [`PowerSystemSpec`] into a [`LinearProgram`].
//!
//! Sign conventions:
//!
//! * Balance rows read `Σ STO_in − Σ G − Σ STO_out − Σ RSV_out + Σ_l i_{l,n} F_l = −d`,
//!   i.e. "use minus supply equals minus demand". The balance dual is therefore
//!   the negative of the marginal price of demand.
//! * A line is labelled `AA_BB` with the codes ascending; `F > 0` is a flow from
//!   `AA` to `BB`, so `i = +1` in the `AA` row and `−1` in the `BB` row.
//! * Storage level `L_h` is the level at the end of hour `h`; hour 0 links to
//!   `L_{T−1}` (cyclic closure).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{BuildReport, ColumnKey, LinearProgram, Relation, Row, RowFamily, RowKey, VarFamily};
use crate::model::{annuity, validate, PowerSystemSpec, TechKind, Technology};
use crate::{Error, Result};

/// Capacity of one component: a decision variable or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Cap {
    Variable,
    Fixed(f64),
}

impl Cap {
    fn is_zero(self) -> bool {
        self == Cap::Fixed(0.0)
    }
}

/// Capacity layout of one technology in one country.
#[derive(Debug, Clone, Copy)]
struct Plan {
    /// Generation power, or discharge power for storage and reservoirs.
    power: Cap,
    charge: Cap,
    energy: Cap,
    /// Whether investment cost applies to fixed capacities (overrides do, legacy fleets do not).
    cost_fixed: bool,
}

impl Plan {
    fn has_hourly(&self, kind: TechKind) -> bool {
        match kind {
            TechKind::Storage => !(self.power.is_zero() && self.charge.is_zero() && self.energy.is_zero()),
            TechKind::Reservoir => !(self.power.is_zero() && self.energy.is_zero()),
            _ => !self.power.is_zero(),
        }
    }
}

fn plan(spec: &PowerSystemSpec, country: &str, tech: &Technology) -> Plan {
    if !tech.is_storage_like() {
        if let Some(p) = spec.capacity_override(country, &tech.id) {
            return Plan {
                power: Cap::Fixed(p),
                charge: Cap::Fixed(0.0),
                energy: Cap::Fixed(0.0),
                cost_fixed: tech.expandable,
            };
        }
    }
    if tech.expandable {
        let eligible = !tech.offshore || spec.country(country).is_some_and(|c| c.offshore_eligible);
        let v = if eligible { Cap::Variable } else { Cap::Fixed(0.0) };
        return Plan {
            power: v,
            charge: if tech.kind == TechKind::Storage {
                v
            } else {
                Cap::Fixed(0.0)
            },
            energy: if tech.is_storage_like() { v } else { Cap::Fixed(0.0) },
            cost_fixed: false,
        };
    }
    let exo = spec.exogenous(country, &tech.id);
    let get = |f: fn(&crate::model::ExogenousCapacity) -> f64| Cap::Fixed(exo.map_or(0.0, f));
    Plan {
        power: get(|e| e.power_discharge),
        charge: if tech.kind == TechKind::Storage {
            get(|e| e.power_charge)
        } else {
            Cap::Fixed(0.0)
        },
        energy: if tech.is_storage_like() {
            get(|e| e.energy)
        } else {
            Cap::Fixed(0.0)
        },
        cost_fixed: false,
    }
}

/// Installed capacities of one technology in one country.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Installed {
    /// MW; generation power, or discharge power for storage and reservoirs.
    pub power: f64,
    /// MW
    pub charge: f64,
    /// MWh
    pub energy: f64,
}

/// Capacities after a solve, keyed by `(country, technology)`: optimal values
/// for decision variables, the fixed values otherwise.
pub fn installed_capacities(
    spec: &PowerSystemSpec,
    lp: &LinearProgram,
    primal: &[f64],
) -> BTreeMap<(String, String), Installed> {
    let mut solved: HashMap<(VarFamily, &str), f64> = HashMap::new();
    for (j, c) in lp.columns.iter().enumerate() {
        if c.key.hour.is_none() {
            solved.insert((c.key.family, c.key.entity.as_str()), primal[j]);
        }
    }
    let mut out = BTreeMap::new();
    for country in spec.country_codes() {
        for tech in spec.sorted_technologies() {
            let p = plan(spec, country, tech);
            let name = entity(country, &tech.id);
            let value = |cap: Cap, fam: VarFamily| match cap {
                Cap::Fixed(v) => v,
                Cap::Variable => solved.get(&(fam, name.as_str())).copied().unwrap_or(0.0),
            };
            let power_family = if tech.is_storage_like() {
                VarFamily::DischargeCapacity
            } else {
                VarFamily::Capacity
            };
            out.insert(
                (country.to_string(), tech.id.clone()),
                Installed {
                    power: value(p.power, power_family),
                    charge: value(p.charge, VarFamily::ChargeCapacity),
                    energy: value(p.energy, VarFamily::EnergyCapacity),
                },
            );
        }
    }
    out
}

/// Annualized cost per MW (or MWh) over the modelled horizon.
fn capacity_cost(
    spec: &PowerSystemSpec,
    tech: &Technology,
    overnight: Option<f64>,
    fixed: f64,
    parameter: &'static str,
) -> Result<f64> {
    let overnight = overnight.ok_or_else(|| Error::MissingCost {
        technology: tech.id.clone(),
        parameter,
    })?;
    let per_kw = annuity(overnight, tech.lifetime, spec.annuity_rate)? + fixed;
    Ok(per_kw * 1000.0 * spec.horizon_scale())
}

fn entity(country: &str, tech: &str) -> String {
    format!("{country}.{tech}")
}

fn line_ends(label: &str) -> (&str, &str) {
    label.split_once('_').expect("line labels contain `_`")
}

/// Per-hour upper limit factor of a generator relative to its capacity.
fn availability(spec: &PowerSystemSpec, country: &str, tech: &Technology) -> Result<Option<Vec<f64>>> {
    let ts = &spec.time_series;
    Ok(match tech.kind {
        TechKind::Dispatchable => None,
        TechKind::VariableRenewable => Some(
            ts.capacity_factor(&tech.id, country)
                .ok_or_else(|| Error::MissingCapacity {
                    country: country.to_string(),
                    technology: tech.id.clone(),
                })?
                .to_vec(),
        ),
        TechKind::RunOfRiver => {
            let profile = ts
                .capacity_factor(&tech.id, country)
                .ok_or_else(|| Error::MissingInflow {
                    country: country.to_string(),
                    technology: tech.id.clone(),
                })?;
            Some(profile.iter().map(|a| a * tech.efficiency_out).collect())
        }
        TechKind::Storage | TechKind::Reservoir => None,
    })
}

/// Creates every column with its bounds and objective coefficient.
///
/// Marginal costs apply per MWh of generation, storage charging, storage
/// discharging and reservoir outflow; annuitized investment plus fixed cost
/// applies per MW (MWh) of expandable capacity, scaled by `T / 8760`.
pub fn build_objective(spec: &PowerSystemSpec) -> Result<LinearProgram> {
    let horizon = spec.horizon();
    let mut lp = LinearProgram::new();
    let inf = f64::INFINITY;
    for country in spec.country_codes() {
        for tech in spec.sorted_technologies() {
            let p = plan(spec, country, tech);
            let e = entity(country, &tech.id);
            let cap_col = |lp: &mut LinearProgram, fam, cap: Cap, cost: Result<f64>| -> Result<()> {
                let (lo, hi, c) = match cap {
                    Cap::Variable => (0.0, inf, cost?),
                    Cap::Fixed(v) if p.cost_fixed => (v, v, cost?),
                    Cap::Fixed(v) => (v, v, 0.0),
                };
                lp.add_column(ColumnKey::new(fam, e.clone(), None), lo, hi, c);
                Ok(())
            };
            let costed = p.power == Cap::Variable || p.cost_fixed;
            let lazy = |overnight, fixed, name| {
                if costed {
                    capacity_cost(spec, tech, overnight, fixed, name)
                } else {
                    Ok(0.0)
                }
            };
            match tech.kind {
                TechKind::Dispatchable | TechKind::VariableRenewable | TechKind::RunOfRiver => {
                    cap_col(
                        &mut lp,
                        VarFamily::Capacity,
                        p.power,
                        lazy(tech.overnight_cost_power, tech.fixed_cost, "overnight_cost_power"),
                    )?;
                }
                TechKind::Storage => {
                    cap_col(
                        &mut lp,
                        VarFamily::ChargeCapacity,
                        p.charge,
                        lazy(tech.overnight_cost_charge, tech.fixed_cost, "overnight_cost_charge"),
                    )?;
                    cap_col(
                        &mut lp,
                        VarFamily::DischargeCapacity,
                        p.power,
                        lazy(
                            tech.overnight_cost_discharge,
                            tech.fixed_cost,
                            "overnight_cost_discharge",
                        ),
                    )?;
                    cap_col(
                        &mut lp,
                        VarFamily::EnergyCapacity,
                        p.energy,
                        lazy(
                            tech.overnight_cost_energy,
                            tech.fixed_cost_energy,
                            "overnight_cost_energy",
                        ),
                    )?;
                }
                TechKind::Reservoir => {
                    cap_col(
                        &mut lp,
                        VarFamily::DischargeCapacity,
                        p.power,
                        lazy(
                            tech.overnight_cost_discharge,
                            tech.fixed_cost,
                            "overnight_cost_discharge",
                        ),
                    )?;
                    cap_col(
                        &mut lp,
                        VarFamily::EnergyCapacity,
                        p.energy,
                        lazy(
                            tech.overnight_cost_energy,
                            tech.fixed_cost_energy,
                            "overnight_cost_energy",
                        ),
                    )?;
                }
            }
            if !p.has_hourly(tech.kind) {
                continue;
            }
            let upper = |cap: Cap, factor: f64| match cap {
                Cap::Variable => inf,
                Cap::Fixed(v) => v * factor,
            };
            let hourly = |lp: &mut LinearProgram, fam, hi: &dyn Fn(usize) -> f64, cost: f64| {
                for h in 0..horizon {
                    lp.add_column(ColumnKey::new(fam, e.clone(), Some(h)), 0.0, hi(h), cost);
                }
            };
            match tech.kind {
                TechKind::Dispatchable | TechKind::VariableRenewable | TechKind::RunOfRiver => {
                    let avail = availability(spec, country, tech)?;
                    let hi = |h: usize| upper(p.power, avail.as_ref().map_or(1.0, |a| a[h]));
                    hourly(&mut lp, VarFamily::Generation, &hi, tech.marginal_cost);
                }
                TechKind::Storage => {
                    hourly(
                        &mut lp,
                        VarFamily::Charge,
                        &|_| upper(p.charge, 1.0),
                        tech.marginal_cost_in,
                    );
                    hourly(
                        &mut lp,
                        VarFamily::Discharge,
                        &|_| upper(p.power, 1.0),
                        tech.marginal_cost,
                    );
                    hourly(&mut lp, VarFamily::Level, &|_| upper(p.energy, 1.0), 0.0);
                }
                TechKind::Reservoir => {
                    if spec.time_series.inflow(country).is_none() {
                        return Err(Error::MissingInflow {
                            country: country.to_string(),
                            technology: tech.id.clone(),
                        });
                    }
                    hourly(
                        &mut lp,
                        VarFamily::ReservoirOut,
                        &|_| upper(p.power, 1.0),
                        tech.marginal_cost,
                    );
                    hourly(&mut lp, VarFamily::Level, &|_| upper(p.energy, 1.0), 0.0);
                    hourly(&mut lp, VarFamily::Spill, &|_| inf, 0.0);
                }
            }
        }
    }
    if spec.interconnection_enabled {
        let mut lines: Vec<(String, f64)> = spec.interconnectors.iter().map(|l| (l.label(), l.ntc)).collect();
        lines.sort_by(|a, b| a.0.cmp(&b.0));
        for (label, ntc) in lines {
            for h in 0..horizon {
                lp.add_column(ColumnKey::new(VarFamily::Flow, label.clone(), Some(h)), -ntc, ntc, 0.0);
            }
        }
    }
    Ok(lp)
}

struct Registry(HashMap<ColumnKey, usize>);

impl Registry {
    fn new(lp: &LinearProgram) -> Self {
        Registry(lp.columns.iter().enumerate().map(|(j, c)| (c.key.clone(), j)).collect())
    }

    fn get(&self, family: VarFamily, entity: &str, hour: Option<usize>) -> Option<usize> {
        self.0.get(&ColumnKey::new(family, entity, hour)).copied()
    }
}

fn row(key: RowKey, coefficients: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Row {
    let mut lp = LinearProgram::new();
    lp.add_row(key, coefficients, relation, rhs);
    lp.rows.pop().unwrap()
}

/// One equality per country and hour.
pub fn build_energy_balance(spec: &PowerSystemSpec, columns: &LinearProgram) -> Vec<Row> {
    let reg = Registry::new(columns);
    let techs = spec.sorted_technologies();
    let mut lines: Vec<String> = if spec.interconnection_enabled {
        spec.interconnectors.iter().map(|l| l.label()).collect()
    } else {
        Vec::new()
    };
    lines.sort();
    let mut rows = Vec::new();
    for country in spec.country_codes() {
        let load = spec.time_series.load(country).unwrap_or(&[]);
        for h in 0..spec.horizon() {
            let mut coef = Vec::new();
            for tech in &techs {
                let e = entity(country, &tech.id);
                let terms: &[(VarFamily, f64)] = match tech.kind {
                    TechKind::Storage => &[(VarFamily::Charge, 1.0), (VarFamily::Discharge, -1.0)],
                    TechKind::Reservoir => &[(VarFamily::ReservoirOut, -1.0)],
                    _ => &[(VarFamily::Generation, -1.0)],
                };
                for &(fam, a) in terms {
                    if let Some(j) = reg.get(fam, &e, Some(h)) {
                        coef.push((j, a));
                    }
                }
            }
            for label in &lines {
                let (src, dst) = line_ends(label);
                let sign = if src == country {
                    1.0
                } else if dst == country {
                    -1.0
                } else {
                    continue;
                };
                if let Some(j) = reg.get(VarFamily::Flow, label, Some(h)) {
                    coef.push((j, sign));
                }
            }
            let d = load.get(h).copied().unwrap_or(0.0);
            rows.push(row(
                RowKey::new(RowFamily::Balance, country, Some(h)),
                coef,
                Relation::Eq,
                -d,
            ));
        }
    }
    rows
}

/// Capacity limits and storage / reservoir level recursions.
///
/// Limits against fixed capacities are already column bounds; rows are emitted
/// only where the capacity is a decision variable.
pub fn build_capacity_and_storage_constraints(spec: &PowerSystemSpec, columns: &LinearProgram) -> Result<Vec<Row>> {
    let reg = Registry::new(columns);
    let horizon = spec.horizon();
    let mut rows = Vec::new();
    for country in spec.country_codes() {
        for tech in spec.sorted_technologies() {
            let p = plan(spec, country, tech);
            if !p.has_hourly(tech.kind) {
                continue;
            }
            let e = entity(country, &tech.id);
            let col = |fam, h| reg.get(fam, &e, h).expect("column registered");
            let limit = |rows: &mut Vec<Row>, rfam, var, capfam, cap: Cap, factor: &dyn Fn(usize) -> f64| {
                if cap != Cap::Variable {
                    return;
                }
                let n = col(capfam, None);
                for h in 0..horizon {
                    rows.push(row(
                        RowKey::new(rfam, e.clone(), Some(h)),
                        vec![(col(var, Some(h)), 1.0), (n, -factor(h))],
                        Relation::Le,
                        0.0,
                    ));
                }
            };
            match tech.kind {
                TechKind::Dispatchable | TechKind::VariableRenewable | TechKind::RunOfRiver => {
                    let avail = availability(spec, country, tech)?;
                    limit(
                        &mut rows,
                        RowFamily::GenerationLimit,
                        VarFamily::Generation,
                        VarFamily::Capacity,
                        p.power,
                        &|h| avail.as_ref().map_or(1.0, |a| a[h]),
                    );
                }
                TechKind::Storage => {
                    limit(
                        &mut rows,
                        RowFamily::ChargeLimit,
                        VarFamily::Charge,
                        VarFamily::ChargeCapacity,
                        p.charge,
                        &|_| 1.0,
                    );
                    limit(
                        &mut rows,
                        RowFamily::DischargeLimit,
                        VarFamily::Discharge,
                        VarFamily::DischargeCapacity,
                        p.power,
                        &|_| 1.0,
                    );
                    limit(
                        &mut rows,
                        RowFamily::EnergyLimit,
                        VarFamily::Level,
                        VarFamily::EnergyCapacity,
                        p.energy,
                        &|_| 1.0,
                    );
                    let rho = tech.self_discharge_retention;
                    for h in 0..horizon {
                        let prev = (h + horizon - 1) % horizon;
                        rows.push(row(
                            RowKey::new(RowFamily::LevelBalance, e.clone(), Some(h)),
                            vec![
                                (col(VarFamily::Level, Some(h)), 1.0),
                                (col(VarFamily::Level, Some(prev)), -rho),
                                (col(VarFamily::Charge, Some(h)), -tech.efficiency_in),
                                (col(VarFamily::Discharge, Some(h)), 1.0 / tech.efficiency_out),
                            ],
                            Relation::Eq,
                            0.0,
                        ));
                    }
                }
                TechKind::Reservoir => {
                    limit(
                        &mut rows,
                        RowFamily::DischargeLimit,
                        VarFamily::ReservoirOut,
                        VarFamily::DischargeCapacity,
                        p.power,
                        &|_| 1.0,
                    );
                    limit(
                        &mut rows,
                        RowFamily::EnergyLimit,
                        VarFamily::Level,
                        VarFamily::EnergyCapacity,
                        p.energy,
                        &|_| 1.0,
                    );
                    let inflow = spec.time_series.inflow(country).ok_or_else(|| Error::MissingInflow {
                        country: country.to_string(),
                        technology: tech.id.clone(),
                    })?;
                    let rho = tech.self_discharge_retention;
                    for h in 0..horizon {
                        let prev = (h + horizon - 1) % horizon;
                        rows.push(row(
                            RowKey::new(RowFamily::LevelBalance, e.clone(), Some(h)),
                            vec![
                                (col(VarFamily::Level, Some(h)), 1.0),
                                (col(VarFamily::Level, Some(prev)), -rho),
                                (col(VarFamily::ReservoirOut, Some(h)), 1.0 / tech.efficiency_out),
                                (col(VarFamily::Spill, Some(h)), 1.0),
                            ],
                            Relation::Eq,
                            inflow[h],
                        ));
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Validates the spec and builds the complete program.
///
/// Columns are ordered by country, technology id, family and hour, followed by
/// line flows; rows by country, technology, family and hour, followed by the
/// balances. Repeated builds are bit-identical.
pub fn assemble(spec: &PowerSystemSpec) -> Result<(LinearProgram, BuildReport)> {
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let mut lp = build_objective(spec)?;
    let mut rows = build_capacity_and_storage_constraints(spec, &lp)?;
    rows.extend(build_energy_balance(spec, &lp));
    lp.rows = rows;
    let report = BuildReport::from_lp(&lp, spec.horizon(), spec.interconnection_enabled);
    Ok((lp, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthesize_system;

    #[test]
    fn two_countries_two_hours_have_four_balance_rows() {
        let spec = synthesize_system(1, 2, 2, 0.0).unwrap();
        let (lp, report) = assemble(&spec).unwrap();
        assert_eq!(report.rows["BAL"], 4);
        assert_eq!(report.total_columns(), lp.num_columns());
        assert_eq!(report.total_rows(), lp.num_rows());
    }

    #[test]
    fn incidence_signs_follow_label_order() {
        let mut spec = synthesize_system(1, 3, 2, 0.0).unwrap();
        // Codes DE, FR, AT; make the link explicitly AT → DE.
        spec.interconnectors = vec![crate::model::Interconnector {
            from_country: "AT".into(),
            to_country: "DE".into(),
            ntc: 7500.0,
        }];
        let (lp, _) = assemble(&spec).unwrap();
        let f = lp.column_index()["F[AT_DE,0]"];
        assert_eq!((lp.columns[f].lower, lp.columns[f].upper), (-7500.0, 7500.0));
        let coef_in = |row: &str| {
            let r = lp.rows.iter().find(|r| r.key.to_string() == row).unwrap();
            r.coefficients.iter().find(|&&(j, _)| j == f).map(|&(_, a)| a)
        };
        assert_eq!(coef_in("BAL[AT,0]"), Some(1.0));
        assert_eq!(coef_in("BAL[DE,0]"), Some(-1.0));
        assert_eq!(coef_in("BAL[FR,0]"), None);
    }

    #[test]
    fn no_flows_without_interconnection() {
        let mut spec = synthesize_system(1, 2, 24, 0.0).unwrap();
        let (on, _) = assemble(&spec).unwrap();
        spec.interconnection_enabled = false;
        let (off, report) = assemble(&spec).unwrap();
        assert!(off.columns.iter().all(|c| c.key.family != VarFamily::Flow));
        assert!(!report.columns.contains_key("F"));
        assert_eq!(on.num_columns() - off.num_columns(), 24 * spec.interconnectors.len());
    }

    #[test]
    fn offshore_fixed_at_zero_where_ineligible() {
        let mut spec = synthesize_system(1, 2, 4, 0.0).unwrap();
        spec.countries[1].offshore_eligible = false;
        let code = spec.countries[1].code.clone();
        let (lp, _) = assemble(&spec).unwrap();
        let idx = lp.column_index();
        let n = idx[&format!("N[{code}.wind_offshore]")];
        assert_eq!((lp.columns[n].lower, lp.columns[n].upper), (0.0, 0.0));
        assert!(!idx.contains_key(&format!("G[{code}.wind_offshore,0]")));
    }

    #[test]
    fn storage_has_three_investment_families() {
        let spec = synthesize_system(1, 1, 4, 0.0).unwrap();
        let (lp, _) = assemble(&spec).unwrap();
        let idx = lp.column_index();
        let costs: Vec<f64> = ["NPIN", "NPOUT", "NE"]
            .iter()
            .map(|f| lp.columns[idx[&format!("{f}[DE.li_ion]")]].cost)
            .collect();
        assert!(costs.iter().all(|c| *c > 0.0));
        assert!(costs[2] != costs[0]);
    }

    #[test]
    fn missing_reservoir_inflow_is_reported() {
        let mut spec = synthesize_system(1, 1, 4, 0.0).unwrap();
        spec.time_series.reservoir_inflow.clear();
        let lp = build_objective(&spec);
        assert!(matches!(lp, Err(Error::MissingInflow { .. })));
    }
}
