use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PowerSystemSpec, TechKind};

/// One broken invariant. Violations are data: [`validate`] never fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, entity: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            entity: entity.into(),
            message: message.into(),
        });
    }
}

/// Checks every structural invariant of a system description.
///
/// Returns an empty list iff the spec is well formed.
pub fn validate(spec: &PowerSystemSpec) -> Vec<Violation> {
    let mut v = Collector(Vec::new());
    let horizon = spec.horizon();
    if horizon == 0 {
        v.push("time_series", "horizon must be at least one hour");
    }
    if !(spec.annuity_rate >= 0.0) {
        v.push("system", "annuity rate must be non-negative");
    }

    let mut codes = BTreeSet::new();
    for c in &spec.countries {
        let entity = format!("country {}", c.code);
        if !codes.insert(c.code.as_str()) {
            v.push(&entity, "duplicate country code");
        }
        if c.code.len() != 2 || !c.code.chars().all(|ch| ch.is_ascii_uppercase()) {
            v.push(&entity, "country code must be two uppercase letters");
        }
        if !(c.yearly_load_total > 0.0) || !c.yearly_load_total.is_finite() {
            v.push(&entity, "yearly load total must be positive");
        }
    }

    let mut tech_ids = BTreeSet::new();
    for t in &spec.technologies {
        let entity = format!("technology {}", t.id);
        if !tech_ids.insert(t.id.as_str()) {
            v.push(&entity, "duplicate technology id");
        }
        let costs = [
            Some(t.marginal_cost),
            Some(t.marginal_cost_in),
            t.overnight_cost_power,
            t.overnight_cost_energy,
            t.overnight_cost_charge,
            t.overnight_cost_discharge,
            Some(t.fixed_cost),
            Some(t.fixed_cost_energy),
        ];
        if costs.iter().flatten().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            v.push(&entity, "costs must be non-negative");
        }
        for (name, eff) in [("efficiency_in", t.efficiency_in), ("efficiency_out", t.efficiency_out)] {
            if !(eff > 0.0 && eff <= 1.0) {
                v.push(&entity, format!("{name} must lie in (0, 1]"));
            }
        }
        if !(t.self_discharge_retention >= 0.0 && t.self_discharge_retention <= 1.0) {
            v.push(&entity, "self-discharge retention must lie in [0, 1]");
        }
        if !(t.lifetime >= 1.0) {
            v.push(&entity, "lifetime must be at least one year");
        }
        if t.kind == TechKind::Storage
            && (t.overnight_cost_energy.is_none()
                || t.overnight_cost_charge.is_none()
                || t.overnight_cost_discharge.is_none())
        {
            v.push(&entity, "storage requires energy, charge and discharge overnight costs");
        }
    }

    let check_series = |v: &mut Collector, entity: String, series: &[f64], what: &str| {
        if series.len() != horizon {
            v.push(
                &entity,
                format!("series length mismatch: expected {horizon}, found {}", series.len()),
            );
        }
        match what {
            "cf" => {
                if series.iter().any(|x| !(*x >= 0.0 && *x <= 1.0)) {
                    v.push(&entity, "capacity factor out of [0,1]");
                }
            }
            _ => {
                if series.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    v.push(&entity, format!("{what} must be non-negative"));
                }
            }
        }
    };

    let ts = &spec.time_series;
    for c in &spec.countries {
        match ts.load.get(&c.code) {
            Some(s) => check_series(&mut v, format!("load {}", c.code), s, "load"),
            None => v.push(format!("load {}", c.code), "missing load series"),
        }
        if let Some(s) = ts.reservoir_inflow.get(&c.code) {
            check_series(&mut v, format!("inflow {}", c.code), s, "inflow");
        }
        for t in &spec.technologies {
            let series = ts.capacity_factor(&t.id, &c.code);
            let entity = format!("capacity factor {}/{}", c.code, t.id);
            match (t.kind, series) {
                (TechKind::VariableRenewable, None) => v.push(entity, "missing capacity factor series"),
                (TechKind::RunOfRiver, None) => {
                    let installed = spec.exogenous(&c.code, &t.id).map_or(0.0, |e| e.power_discharge);
                    if installed > 0.0 {
                        v.push(entity, "missing run-of-river availability series");
                    }
                }
                (_, Some(s)) => check_series(&mut v, entity, s, "cf"),
                _ => {}
            }
        }
        let reservoir_power: f64 = spec
            .technologies
            .iter()
            .filter(|t| t.kind == TechKind::Reservoir)
            .filter_map(|t| spec.exogenous(&c.code, &t.id))
            .map(|e| e.power_discharge)
            .sum();
        if reservoir_power > 0.0 && ts.inflow(&c.code).is_none() {
            v.push(format!("inflow {}", c.code), "missing inflow series for reservoir");
        }
    }
    for (tech, per_country) in &ts.capacity_factors {
        if !tech_ids.contains(tech.as_str()) {
            v.push(format!("capacity factor {tech}"), "unknown technology");
        }
        for c in per_country.keys() {
            if !codes.contains(c.as_str()) {
                v.push(format!("capacity factor {c}/{tech}"), "unknown country");
            }
        }
    }
    for c in ts.load.keys().chain(ts.reservoir_inflow.keys()) {
        if !codes.contains(c.as_str()) {
            v.push(format!("series {c}"), "unknown country");
        }
    }

    let mut pairs = BTreeSet::new();
    for l in &spec.interconnectors {
        let entity = format!("interconnector {}-{}", l.from_country, l.to_country);
        if l.from_country == l.to_country {
            v.push(&entity, "line connects a country to itself");
        }
        for end in [&l.from_country, &l.to_country] {
            if !codes.contains(end.as_str()) {
                v.push(&entity, format!("unknown country {end}"));
            }
        }
        if !(l.ntc >= 0.0) || !l.ntc.is_finite() {
            v.push(&entity, "ntc must be non-negative");
        }
        if !pairs.insert(l.label()) {
            v.push(&entity, "duplicate interconnector pair");
        }
    }

    let mut seen = BTreeSet::new();
    for e in &spec.exogenous_capacities {
        let entity = format!("exogenous {}/{}", e.country, e.technology);
        if !codes.contains(e.country.as_str()) {
            v.push(&entity, "unknown country");
        }
        match spec.technology(&e.technology) {
            None => v.push(&entity, "unknown technology"),
            Some(t) if t.expandable => v.push(&entity, "exogenous capacity references an expandable technology"),
            _ => {}
        }
        if [e.power_discharge, e.power_charge, e.energy]
            .iter()
            .any(|x| !(*x >= 0.0) || !x.is_finite())
        {
            v.push(&entity, "capacities must be non-negative");
        }
        if !seen.insert((e.country.as_str(), e.technology.as_str())) {
            v.push(&entity, "duplicate exogenous entry");
        }
    }

    let mut seen = BTreeSet::new();
    for o in &spec.capacity_overrides {
        let entity = format!("override {}/{}", o.country, o.technology);
        if !codes.contains(o.country.as_str()) {
            v.push(&entity, "unknown country");
        }
        match spec.technology(&o.technology) {
            None => v.push(&entity, "unknown technology"),
            Some(t) if t.is_storage_like() => v.push(&entity, "overrides apply to generation technologies only"),
            _ => {}
        }
        if !(o.power >= 0.0) || !o.power.is_finite() {
            v.push(&entity, "override capacity must be non-negative");
        }
        if !seen.insert((o.country.as_str(), o.technology.as_str())) {
            v.push(&entity, "duplicate override");
        }
    }

    v.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthesize_system;

    fn fixture() -> PowerSystemSpec {
        synthesize_system(3, 2, 24, 0.0).unwrap()
    }

    #[test]
    fn synthetic_spec_is_valid() {
        assert_eq!(validate(&fixture()), vec![]);
    }

    #[test]
    fn flags_capacity_factor_above_one() {
        let mut spec = fixture();
        let code = spec.countries[0].code.clone();
        spec.time_series
            .capacity_factors
            .get_mut("wind_onshore")
            .unwrap()
            .get_mut(&code)
            .unwrap()[5] = 1.3;
        let v = validate(&spec);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("capacity factor out of [0,1]"));
        assert!(v[0].entity.contains(&code));
    }

    #[test]
    fn flags_short_load_series() {
        let mut spec = fixture();
        let code = spec.countries[1].code.clone();
        spec.time_series.load.get_mut(&code).unwrap().pop();
        let v = validate(&spec);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("series length mismatch"));
        assert_eq!(v[0].entity, format!("load {code}"));
    }

    #[test]
    fn flags_bad_interconnectors_and_countries() {
        let mut spec = fixture();
        let a = spec.countries[0].code.clone();
        spec.interconnectors.push(crate::model::Interconnector {
            from_country: a.clone(),
            to_country: a,
            ntc: -1.0,
        });
        spec.countries[1].yearly_load_total = 0.0;
        let msgs: Vec<String> = validate(&spec).into_iter().map(|v| v.message).collect();
        assert!(msgs.iter().any(|m| m.contains("itself")));
        assert!(msgs.iter().any(|m| m.contains("ntc")));
        assert!(msgs.iter().any(|m| m.contains("yearly load")));
    }

    #[test]
    fn flags_exogenous_on_expandable() {
        let mut spec = fixture();
        spec.exogenous_capacities.push(crate::model::ExogenousCapacity {
            country: spec.countries[0].code.clone(),
            technology: "wind_onshore".into(),
            power_discharge: 1.0,
            power_charge: 0.0,
            energy: 0.0,
        });
        let v = validate(&spec);
        assert!(v.iter().any(|x| x.message.contains("expandable")));
    }

    #[test]
    fn flags_bad_efficiency() {
        let mut spec = fixture();
        spec.technologies[0].efficiency_out = 0.0;
        assert!(!validate(&spec).is_empty());
    }
}
