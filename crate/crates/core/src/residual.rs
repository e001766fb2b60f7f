//! Residual load: demand minus variable renewable generation potential.
//!
//! Given installed capacities, `r_{n,h} = d_{n,h} − Σ_vre cf_{n,vre,h}·N_{n,vre}`.
//! On top of the series this module finds peak hours, positive residual
//! load events and the cross-country situation in each country's peak hour.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{PowerSystemSpec, TechGroup, TechKind};
use crate::{Error, Result};

/// Installed power per `(country, technology)` in MW.
pub type PowerCapacities = BTreeMap<(String, String), f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub country: String,
    /// MWh/h
    pub values: Vec<f64>,
    /// SHA-256 over the system and the capacities the series was derived from.
    pub input_hash: String,
}

/// A run of hours over which the cumulative residual load stays positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEvent {
    pub country: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    /// Largest cumulative residual reached inside the event, MWh.
    pub peak_cumulative: f64,
    /// Sum of the positive hourly residuals inside the event, MWh.
    pub gross_positive: f64,
}

impl ResidualEvent {
    pub fn duration(&self) -> usize {
        self.end - self.start + 1
    }
}

fn inputs_hash(spec: &PowerSystemSpec, capacities: &PowerCapacities) -> String {
    let mut h = Sha256::new();
    h.update(spec.content_hash().as_bytes());
    for ((c, t), v) in capacities {
        h.update(format!("{c}\x1f{t}\x1f{v:e}\x1e").as_bytes());
    }
    hex::encode(h.finalize())
}

/// Residual series of every country.
///
/// Every variable renewable technology with a capacity-factor series in a
/// country needs a capacity entry for that country.
pub fn residual_series(
    spec: &PowerSystemSpec,
    capacities: &PowerCapacities,
) -> Result<BTreeMap<String, ResidualSeries>> {
    let hash = inputs_hash(spec, capacities);
    let vre: Vec<&str> = spec
        .sorted_technologies()
        .into_iter()
        .filter(|t| t.kind == TechKind::VariableRenewable)
        .map(|t| t.id.as_str())
        .collect();
    let ts = &spec.time_series;
    let mut out = BTreeMap::new();
    for country in spec.country_codes() {
        let mut values = ts
            .load(country)
            .ok_or_else(|| Error::InvalidArgument(format!("no load series for {country}")))?
            .to_vec();
        for tech in &vre {
            let Some(cf) = ts.capacity_factor(tech, country) else {
                continue;
            };
            let n = capacities
                .get(&(country.to_string(), tech.to_string()))
                .copied()
                .ok_or_else(|| Error::MissingCapacity {
                    country: country.to_string(),
                    technology: tech.to_string(),
                })?;
            for (r, f) in values.iter_mut().zip(cf) {
                *r -= f * n;
            }
        }
        out.insert(
            country.to_string(),
            ResidualSeries {
                country: country.to_string(),
                values,
                input_hash: hash.clone(),
            },
        );
    }
    Ok(out)
}

/// Hour and value of the largest residual; ties go to the earliest hour.
pub fn peak_residual_hour(series: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (h, &v) in series.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((h, v));
        }
    }
    best
}

/// Positive residual load events, in order.
///
/// An event opens at a strictly positive hour. From there the residual is
/// accumulated, negatives included; the event ends with the last hour before
/// the running sum would drop to zero or below, or with the series.
pub fn positive_events(country: &str, series: &[f64]) -> Vec<ResidualEvent> {
    let mut events = Vec::new();
    let mut h = 0;
    while h < series.len() {
        if series[h] <= 0.0 {
            h += 1;
            continue;
        }
        let start = h;
        let (mut cum, mut peak, mut gross) = (0.0_f64, 0.0_f64, 0.0);
        while h < series.len() && cum + series[h] > 0.0 {
            cum += series[h];
            peak = peak.max(cum);
            gross += series[h].max(0.0);
            h += 1;
        }
        events.push(ResidualEvent {
            country: country.to_string(),
            start,
            end: h - 1,
            peak_cumulative: peak,
            gross_positive: gross,
        });
    }
    events
}

/// Situation of one country in another country's peak residual hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionRow {
    /// Country whose peak hour is inspected.
    pub peak_country: String,
    pub peak_hour: usize,
    /// MWh/h
    pub peak_residual: f64,
    pub country: String,
    pub wind_cf: f64,
    pub pv_cf: f64,
    /// Load in the hour over the country's maximum load.
    pub relative_load: f64,
}

fn group_cf(spec: &PowerSystemSpec, group: TechGroup, country: &str, hour: usize) -> f64 {
    spec.sorted_technologies()
        .into_iter()
        .filter(|t| t.kind == TechKind::VariableRenewable && t.group == group && !t.offshore)
        .find_map(|t| spec.time_series.capacity_factor(&t.id, country))
        .map_or(0.0, |cf| cf[hour])
}

/// For every country's peak residual hour, wind and PV capacity factors and
/// relative load of every country (the peak country's own row included).
pub fn peak_hour_cross_section(
    spec: &PowerSystemSpec,
    series: &BTreeMap<String, ResidualSeries>,
) -> Result<Vec<CrossSectionRow>> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(
            "a cross-section needs at least two countries".into(),
        ));
    }
    let mut rows = Vec::new();
    for (peak_country, s) in series {
        let Some((hour, value)) = peak_residual_hour(&s.values) else {
            continue;
        };
        for country in series.keys() {
            let load = spec.time_series.load(country).unwrap_or(&[]);
            let max = load.iter().copied().fold(0.0, f64::max);
            let relative_load = if max > 0.0 { load[hour] / max } else { 0.0 };
            rows.push(CrossSectionRow {
                peak_country: peak_country.clone(),
                peak_hour: hour,
                peak_residual: value,
                country: country.clone(),
                wind_cf: group_cf(spec, TechGroup::Wind, country, hour),
                pv_cf: group_cf(spec, TechGroup::Solar, country, hour),
                relative_load,
            });
        }
    }
    Ok(rows)
}

/// `(Σ_n max_h r_{n,h}, max_h Σ_n r_{n,h})`.
pub fn peak_coincidence(series: &BTreeMap<String, ResidualSeries>) -> Result<(f64, f64)> {
    let len = series
        .values()
        .next()
        .map(|s| s.values.len())
        .ok_or_else(|| Error::InvalidArgument("no residual series".into()))?;
    if len == 0 || series.values().any(|s| s.values.len() != len) {
        return Err(Error::InvalidArgument(
            "residual series must be non-empty and of equal length".into(),
        ));
    }
    let sum_of_peaks = series
        .values()
        .map(|s| s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    let system_peak = (0..len)
        .map(|h| series.values().map(|s| s.values[h]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((sum_of_peaks, system_peak))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySummary {
    pub country: String,
    pub peak_hour: usize,
    pub peak_residual: f64,
    pub events: usize,
    pub largest_event_peak: f64,
    pub largest_event_start: Option<usize>,
}

/// Everything the residual analysis produces for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// State whose optimal capacities were used, e.g. `f_23456`.
    pub scenario: String,
    pub input_hash: String,
    /// Countries left out of the event table.
    pub excluded_from_events: Vec<String>,
    pub summaries: Vec<CountrySummary>,
    pub events: Vec<ResidualEvent>,
    pub cross_section: Vec<CrossSectionRow>,
    pub sum_of_peaks: f64,
    pub system_peak: f64,
}

pub fn residual_report(
    spec: &PowerSystemSpec,
    capacities: &PowerCapacities,
    scenario: &str,
    excluded_from_events: &[String],
) -> Result<ResidualReport> {
    let series = residual_series(spec, capacities)?;
    let per_country: Vec<(CountrySummary, Vec<ResidualEvent>)> = series
        .par_iter()
        .map(|(c, s)| {
            let (peak_hour, peak_residual) = peak_residual_hour(&s.values).unwrap_or((0, 0.0));
            let events = positive_events(c, &s.values);
            let largest = events.iter().fold(None::<&ResidualEvent>, |best, e| match best {
                Some(b) if b.peak_cumulative >= e.peak_cumulative => Some(b),
                _ => Some(e),
            });
            let summary = CountrySummary {
                country: c.clone(),
                peak_hour,
                peak_residual,
                events: events.len(),
                largest_event_peak: largest.map_or(0.0, |e| e.peak_cumulative),
                largest_event_start: largest.map(|e| e.start),
            };
            (summary, events)
        })
        .collect();
    let cross_section = if series.len() >= 2 {
        peak_hour_cross_section(spec, &series)?
    } else {
        Vec::new()
    };
    let (sum_of_peaks, system_peak) = peak_coincidence(&series)?;
    let mut summaries = Vec::new();
    let mut events = Vec::new();
    for (s, e) in per_country {
        if !excluded_from_events.contains(&s.country) {
            events.extend(e);
        }
        summaries.push(s);
    }
    Ok(ResidualReport {
        scenario: scenario.to_string(),
        input_hash: series.values().next().map(|s| s.input_hash.clone()).unwrap_or_default(),
        excluded_from_events: excluded_from_events.to_vec(),
        summaries,
        events,
        cross_section,
        sum_of_peaks,
        system_peak,
    })
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let ctx = path.display().to_string();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(&ctx, e))?;
    w.write_record(header).map_err(|e| Error::csv(&ctx, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(&ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Units: residuals in MWh/h, event energies in MWh, hours 0-indexed.
pub const SUMMARY_HEADER: [&str; 6] = [
    "country",
    "peak_hour",
    "peak_residual",
    "events",
    "largest_event_peak",
    "largest_event_start",
];
pub const EVENT_HEADER: [&str; 5] = ["country", "start", "end", "peak_cumulative", "gross_positive"];
pub const CROSS_SECTION_HEADER: [&str; 7] = [
    "peak_country",
    "peak_hour",
    "peak_residual",
    "country",
    "wind_cf",
    "pv_cf",
    "relative_load",
];

/// Writes `residual_summary.csv`, `residual_events.csv`,
/// `peak_cross_section.csv` and `residual.json` into `dir`.
///
/// Tables always carry their header, even when empty; the JSON file carries
/// the full report.
pub fn write_residual_report(dir: &Path, report: &ResidualReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("residual_summary.csv"), &SUMMARY_HEADER, &report.summaries)?;
    write_csv(&dir.join("residual_events.csv"), &EVENT_HEADER, &report.events)?;
    write_csv(
        &dir.join("peak_cross_section.csv"),
        &CROSS_SECTION_HEADER,
        &report.cross_section,
    )?;
    let path = dir.join("residual.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::json(path.display().to_string(), e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(s: &[f64]) -> Vec<(usize, usize, f64)> {
        positive_events("X", s)
            .into_iter()
            .map(|e| (e.start, e.end, e.peak_cumulative))
            .collect()
    }

    #[test]
    fn hand_scanned_events() {
        assert_eq!(spans(&[5.0, -2.0, 3.0, -7.0, 4.0]), [(0, 2, 6.0), (4, 4, 4.0)]);
        assert!(spans(&[-1.0, -3.0, 0.0]).is_empty());
        assert_eq!(spans(&[0.0, 2.0, -2.0, 1.0]), [(1, 1, 2.0), (3, 3, 1.0)]);
    }

    #[test]
    fn leading_zeros_shift_events() {
        let s = [3.0, -1.0, -5.0, 2.0, 2.0, -3.0];
        let mut padded = vec![0.0; 4];
        padded.extend_from_slice(&s);
        let shifted: Vec<_> = spans(&s).into_iter().map(|(a, b, p)| (a + 4, b + 4, p)).collect();
        assert_eq!(spans(&padded), shifted);
    }

    #[test]
    fn peak_tie_break() {
        assert_eq!(peak_residual_hour(&[1.0, 2.0, 3.0]), Some((2, 3.0)));
        assert_eq!(peak_residual_hour(&[4.0; 5]), Some((0, 4.0)));
        assert_eq!(peak_residual_hour(&[]), None);
    }

    fn series(values: &[&[f64]]) -> BTreeMap<String, ResidualSeries> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let c = format!("C{i}");
                let s = ResidualSeries {
                    country: c.clone(),
                    values: v.to_vec(),
                    input_hash: String::new(),
                };
                (c, s)
            })
            .collect()
    }

    #[test]
    fn coincidence() {
        assert_eq!(peak_coincidence(&series(&[&[1.0, 5.0, 2.0]])).unwrap(), (5.0, 5.0));
        assert_eq!(
            peak_coincidence(&series(&[&[1.0, 5.0], &[4.0, 0.0]])).unwrap(),
            (9.0, 5.0)
        );
        assert!(peak_coincidence(&series(&[&[1.0], &[1.0, 2.0]])).is_err());
    }
}
