//! Factor states and the counterfactual systems they describe.
//!
//! Six binary factors are numbered as in the scenario labels: `1`
//! interconnection, `2` wind, `3` solar PV, `4` load, `5` hydropower, `6`
//! bioenergy. A factor in state B (interconnection allowed, or input not
//! harmonized) contributes its digit to the label, so `f_0` is the fully
//! harmonized island system and `f_123456` the native interconnected one.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lp::{assemble, installed_capacities};
use crate::model::{CapacityOverride, ExogenousCapacity, PowerSystemSpec, TechGroup, TechKind, Technology};
use crate::solver::{solve, SolveOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Interconnection,
    Wind,
    Solar,
    Load,
    Hydro,
    Bioenergy,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::Interconnection,
        Factor::Wind,
        Factor::Solar,
        Factor::Load,
        Factor::Hydro,
        Factor::Bioenergy,
    ];

    /// Digit used in state labels, `1..=6`.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Factor> {
        Factor::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::Interconnection => "interconnection",
            Factor::Wind => "wind",
            Factor::Solar => "solar",
            Factor::Load => "load",
            Factor::Hydro => "hydro",
            Factor::Bioenergy => "bioenergy",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = Error;

    /// Accepts the digit or the name.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<u8>() {
            return Factor::from_number(n).ok_or_else(|| Error::InvalidArgument(format!("no factor number {n}")));
        }
        Factor::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown factor `{s}`")))
    }
}

/// The set of factors in state B.
///
/// Ordered by the number of factors in state B, then lexicographically by
/// label digits: `f_0, f_1, …, f_6, f_12, f_13, …, f_23456, f_123456`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FactorState(u8);

impl FactorState {
    /// Every factor in state A: harmonized islands.
    pub const BASELINE: FactorState = FactorState(0);
    /// Every factor in state B: native interconnected system.
    pub const NATIVE: FactorState = FactorState(0b11_1111);

    pub fn from_factors(factors: impl IntoIterator<Item = Factor>) -> Self {
        FactorState(factors.into_iter().fold(0, |b, f| b | f.bit()))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Whether `factor` is in state B.
    pub fn contains(self, factor: Factor) -> bool {
        self.0 & factor.bit() != 0
    }

    /// Whether `factor` is harmonized (state A) in this state.
    pub fn harmonizes(self, factor: Factor) -> bool {
        factor != Factor::Interconnection && !self.contains(factor)
    }

    pub fn with(self, factor: Factor) -> Self {
        FactorState(self.0 | factor.bit())
    }

    pub fn without(self, factor: Factor) -> Self {
        FactorState(self.0 & !factor.bit())
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: FactorState) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn factors(self) -> impl Iterator<Item = Factor> {
        Factor::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// Every subset of `self`, in canonical order.
    pub fn subsets(self) -> Vec<FactorState> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub = self.0;
        loop {
            out.push(FactorState(sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.0;
        }
        out.sort();
        out
    }

    fn digits(self) -> impl Iterator<Item = u8> {
        self.factors().map(Factor::number)
    }
}

impl Ord for FactorState {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.digits().cmp(other.digits()))
    }
}

impl PartialOrd for FactorState {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FactorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("f_")?;
        if self.is_empty() {
            return f.write_str("0");
        }
        for d in self.digits() {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for FactorState {
    type Err = Error;

    /// Parses the canonical label only: `f_0`, or `f_` followed by strictly
    /// ascending digits from 1 to 6.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadState(s.to_string());
        let digits = s.strip_prefix("f_").ok_or_else(bad)?;
        if digits == "0" {
            return Ok(FactorState::BASELINE);
        }
        if digits.is_empty() {
            return Err(bad());
        }
        let mut state = FactorState::BASELINE;
        let mut last = 0u8;
        for ch in digits.chars() {
            let d = ch.to_digit(10).ok_or_else(bad)? as u8;
            let factor = Factor::from_number(d).ok_or_else(bad)?;
            if d <= last {
                return Err(bad());
            }
            last = d;
            state = state.with(factor);
        }
        Ok(state)
    }
}

impl Serialize for FactorState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FactorState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All `2^n` states over the first `n` factors, canonical order.
pub fn enumerate_states(n_factors: usize) -> Result<Vec<FactorState>> {
    if !(1..=Factor::ALL.len()).contains(&n_factors) {
        return Err(Error::InvalidArgument(format!(
            "number of factors must be in 1..=6, got {n_factors}"
        )));
    }
    Ok(enumerate_over(&Factor::ALL[..n_factors]))
}

/// All states varying only `factors`; the others stay in state A.
pub fn enumerate_over(factors: &[Factor]) -> Vec<FactorState> {
    FactorState::from_factors(factors.iter().copied()).subsets()
}

/// Capacity per MWh of yearly load.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Share {
    /// MW/MWh; generation or discharge power.
    pub power: f64,
    /// MW/MWh
    pub charge: f64,
    /// MWh/MWh
    pub energy: f64,
}

/// Where a set of shares came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareProvenance {
    /// Content hash of the full system the reference was cut from.
    pub system_hash: String,
    pub horizon: usize,
    /// Objective of the isolated reference run, EUR.
    pub objective: f64,
    pub iterations: usize,
}

/// Portfolio of the reference country in isolation, per unit of yearly load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceShares {
    pub reference_country: String,
    /// technology id → share. Covers offshore wind and every legacy hydro
    /// and bioenergy technology.
    pub shares: BTreeMap<String, Share>,
    pub provenance: ShareProvenance,
}

fn is_offshore_wind(t: &Technology) -> bool {
    t.group == TechGroup::Wind && t.offshore
}

fn is_portfolio(t: &Technology, group: TechGroup) -> bool {
    t.group == group && !t.expandable
}

/// Runs `reference` in isolation and records its portfolio shares.
pub fn derive_reference_shares(
    spec: &PowerSystemSpec,
    reference: &str,
    options: &SolveOptions,
) -> Result<ReferenceShares> {
    let island = spec.isolate(reference)?;
    let load = island.countries[0].yearly_load_total;
    let (lp, _) = assemble(&island)?;
    let result = solve(&lp, options)?;
    if !result.is_optimal() {
        return Err(Error::SolveFailed {
            context: format!("reference run for {reference}"),
            status: result.status.to_string(),
        });
    }
    let installed = installed_capacities(&island, &lp, &result.primal);
    let mut shares = BTreeMap::new();
    for tech in island.sorted_technologies() {
        let relevant =
            is_offshore_wind(tech) || is_portfolio(tech, TechGroup::Hydro) || is_portfolio(tech, TechGroup::Bioenergy);
        if !relevant {
            continue;
        }
        let cap = installed[&(reference.to_string(), tech.id.clone())];
        shares.insert(
            tech.id.clone(),
            Share {
                power: cap.power / load,
                charge: cap.charge / load,
                energy: cap.energy / load,
            },
        );
    }
    Ok(ReferenceShares {
        reference_country: reference.to_string(),
        shares,
        provenance: ShareProvenance {
            system_hash: spec.content_hash(),
            horizon: spec.horizon(),
            objective: result.objective,
            iterations: result.iterations,
        },
    })
}

/// The counterfactual system for `state`.
///
/// Harmonized factors take the reference country's inputs: wind and solar
/// capacity factors are copied, load follows the reference profile scaled to
/// each country's own total, and offshore wind, hydropower and bioenergy
/// capacities become reference shares times each country's yearly load.
/// Reservoir inflow follows the reference series scaled by installed
/// reservoir power.
pub fn apply_factor_state(
    spec: &PowerSystemSpec,
    state: FactorState,
    shares: &ReferenceShares,
) -> Result<PowerSystemSpec> {
    let reference = shares.reference_country.as_str();
    if spec.country(reference).is_none() {
        return Err(Error::UnknownCountry(reference.to_string()));
    }
    let mut out = spec.clone();
    out.interconnection_enabled = state.contains(Factor::Interconnection);
    let codes: Vec<String> = spec.country_codes().into_iter().map(String::from).collect();

    if state.harmonizes(Factor::Wind) {
        for tech in spec.technologies.iter().filter(|t| t.group == TechGroup::Wind) {
            if tech.kind == TechKind::VariableRenewable {
                copy_profile(&mut out, &tech.id, reference, &codes)?;
            }
        }
        for tech in spec.technologies.iter().filter(|t| is_offshore_wind(t)) {
            let share = shares
                .shares
                .get(&tech.id)
                .ok_or_else(|| Error::MissingShares(Factor::Wind.to_string()))?;
            out.capacity_overrides.retain(|o| o.technology != tech.id);
            for c in &out.countries {
                out.capacity_overrides.push(CapacityOverride {
                    country: c.code.clone(),
                    technology: tech.id.clone(),
                    power: share.power * c.yearly_load_total,
                });
            }
        }
    }

    if state.harmonizes(Factor::Solar) {
        for tech in spec.technologies.iter() {
            if tech.group == TechGroup::Solar && tech.kind == TechKind::VariableRenewable {
                copy_profile(&mut out, &tech.id, reference, &codes)?;
            }
        }
    }

    if state.harmonizes(Factor::Load) {
        let profile = spec
            .time_series
            .load(reference)
            .ok_or_else(|| Error::InvalidArgument(format!("no load series for {reference}")))?
            .to_vec();
        let ref_total: f64 = profile.iter().sum();
        for c in &codes {
            let total = spec.horizon_load(c);
            let k = if ref_total > 0.0 { total / ref_total } else { 0.0 };
            out.time_series
                .load
                .insert(c.clone(), profile.iter().map(|v| v * k).collect());
        }
    }

    if state.harmonizes(Factor::Hydro) {
        apply_portfolio(&mut out, TechGroup::Hydro, shares, Factor::Hydro)?;
        for tech in spec.technologies.iter() {
            if tech.group == TechGroup::Hydro && tech.kind == TechKind::RunOfRiver {
                copy_profile(&mut out, &tech.id, reference, &codes)?;
            }
        }
        harmonize_inflow(&mut out, reference)?;
    }

    if state.harmonizes(Factor::Bioenergy) {
        apply_portfolio(&mut out, TechGroup::Bioenergy, shares, Factor::Bioenergy)?;
    }

    Ok(out)
}

fn copy_profile(out: &mut PowerSystemSpec, tech: &str, reference: &str, codes: &[String]) -> Result<()> {
    let per_country = out
        .time_series
        .capacity_factors
        .get_mut(tech)
        .ok_or_else(|| Error::MissingCapacity {
            country: reference.to_string(),
            technology: tech.to_string(),
        })?;
    let series = per_country
        .get(reference)
        .ok_or_else(|| Error::MissingCapacity {
            country: reference.to_string(),
            technology: tech.to_string(),
        })?
        .clone();
    for c in codes {
        per_country.insert(c.clone(), series.clone());
    }
    Ok(())
}

fn apply_portfolio(
    out: &mut PowerSystemSpec,
    group: TechGroup,
    shares: &ReferenceShares,
    factor: Factor,
) -> Result<()> {
    let techs: Vec<Technology> = out
        .technologies
        .iter()
        .filter(|t| is_portfolio(t, group))
        .cloned()
        .collect();
    for tech in &techs {
        let share = shares
            .shares
            .get(&tech.id)
            .ok_or_else(|| Error::MissingShares(factor.to_string()))?;
        out.exogenous_capacities.retain(|e| e.technology != tech.id);
        let storage = tech.kind == TechKind::Storage;
        for c in &out.countries {
            let load = c.yearly_load_total;
            out.exogenous_capacities.push(ExogenousCapacity {
                country: c.code.clone(),
                technology: tech.id.clone(),
                power_discharge: share.power * load,
                power_charge: if storage { share.charge * load } else { 0.0 },
                energy: if tech.is_storage_like() {
                    share.energy * load
                } else {
                    0.0
                },
            });
        }
    }
    // Deterministic order regardless of the input order.
    out.exogenous_capacities
        .sort_by(|a, b| (&a.country, &a.technology).cmp(&(&b.country, &b.technology)));
    Ok(())
}

/// Reference inflow scaled by the ratio of installed reservoir power.
fn harmonize_inflow(out: &mut PowerSystemSpec, reference: &str) -> Result<()> {
    let reservoir_power = |spec: &PowerSystemSpec, country: &str| -> f64 {
        spec.technologies
            .iter()
            .filter(|t| t.kind == TechKind::Reservoir)
            .filter_map(|t| spec.exogenous(country, &t.id))
            .map(|e| e.power_discharge)
            .sum()
    };
    let ref_power = reservoir_power(out, reference);
    let horizon = out.horizon();
    let base: Vec<f64> = match out.time_series.inflow(reference) {
        Some(s) => s.to_vec(),
        None if ref_power == 0.0 => vec![0.0; horizon],
        None => {
            return Err(Error::MissingInflow {
                country: reference.to_string(),
                technology: "reservoir".to_string(),
            })
        }
    };
    let codes: Vec<String> = out.countries.iter().map(|c| c.code.clone()).collect();
    for c in codes {
        let k = if ref_power > 0.0 {
            reservoir_power(out, &c) / ref_power
        } else {
            0.0
        };
        out.time_series
            .reservoir_inflow
            .insert(c, base.iter().map(|v| v * k).collect());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthesize_system;

    #[test]
    fn labels_round_trip() {
        for s in enumerate_states(6).unwrap() {
            assert_eq!(s.to_string().parse::<FactorState>().unwrap(), s);
        }
        assert_eq!("f_0".parse::<FactorState>().unwrap(), FactorState::BASELINE);
        assert_eq!(FactorState::NATIVE.to_string(), "f_123456");
    }

    #[test]
    fn rejects_malformed_labels() {
        for bad in ["f_07", "f_", "f_21", "f_11", "f_7", "g_1", "f_1a", "f_00"] {
            assert!(bad.parse::<FactorState>().is_err(), "{bad}");
        }
    }

    #[test]
    fn table_order() {
        let states = enumerate_states(6).unwrap();
        assert_eq!(states.len(), 64);
        let labels: Vec<String> = states.iter().map(ToString::to_string).collect();
        assert_eq!(
            &labels[..9],
            ["f_0", "f_1", "f_2", "f_3", "f_4", "f_5", "f_6", "f_12", "f_13"]
        );
        assert_eq!(labels[62], "f_23456");
        assert_eq!(labels[63], "f_123456");
        let two: Vec<String> = enumerate_states(2).unwrap().iter().map(ToString::to_string).collect();
        assert_eq!(two, ["f_0", "f_1", "f_2", "f_12"]);
    }

    fn fixture() -> (PowerSystemSpec, ReferenceShares) {
        let spec = synthesize_system(3, 3, 48, -0.5).unwrap();
        let shares = derive_reference_shares(&spec, "DE", &SolveOptions::default()).unwrap();
        (spec, shares)
    }

    #[test]
    fn native_state_is_identity() {
        let (mut spec, shares) = fixture();
        spec.interconnection_enabled = false;
        let out = apply_factor_state(&spec, FactorState::NATIVE, &shares).unwrap();
        spec.interconnection_enabled = true;
        assert_eq!(out, spec);
    }

    #[test]
    fn load_totals_survive() {
        let (spec, shares) = fixture();
        let out = apply_factor_state(&spec, FactorState::NATIVE.without(Factor::Load), &shares).unwrap();
        for c in spec.country_codes() {
            let (a, b) = (spec.horizon_load(c), out.horizon_load(c));
            assert!((a - b).abs() <= 1e-9 * a, "{c}: {a} vs {b}");
        }
        assert_eq!(out.time_series.load["DE"], spec.time_series.load["DE"]);
    }

    #[test]
    fn landlocked_country_gets_offshore() {
        let (mut spec, mut shares) = fixture();
        spec.countries
            .iter_mut()
            .for_each(|c| c.offshore_eligible = c.code == "DE");
        shares.shares.get_mut("wind_offshore").unwrap().power = 1e-4;
        let out = apply_factor_state(&spec, FactorState::BASELINE, &shares).unwrap();
        let at = out.capacity_override("AT", "wind_offshore").unwrap();
        assert!((at - 1e-4 * spec.country("AT").unwrap().yearly_load_total).abs() < 1e-9 * at);
    }

    #[test]
    fn missing_share_is_reported() {
        let (spec, mut shares) = fixture();
        shares.shares.remove("bioenergy");
        let err = apply_factor_state(&spec, FactorState::NATIVE.without(Factor::Bioenergy), &shares);
        assert!(matches!(err, Err(Error::MissingShares(f)) if f == "bioenergy"));
        assert!(apply_factor_state(&spec, FactorState::NATIVE, &shares).is_ok());
    }
}
