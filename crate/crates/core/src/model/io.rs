//! System manifests (JSON) and hourly series (CSV).
//!
//! A manifest carries the scalar description of a system and references one
//! CSV file per series family. Series files have the header
//! `hour,<country>,<country>,...` with 0-indexed hours in order. Relative
//! paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::defaults::default_technologies;
use super::{
    CapacityOverride, Country, ExogenousCapacity, Interconnector, PowerSystemSpec, Technology, TimeSeriesSet,
    DEFAULT_ANNUITY_RATE,
};
use crate::{Error, Result};

/// File references of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFiles {
    pub load: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reservoir_inflow: Option<PathBuf>,
    /// technology id → CSV file
    pub capacity_factors: BTreeMap<String, PathBuf>,
}

/// On-disk form of a [`PowerSystemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemManifest {
    pub horizon: usize,
    #[serde(default = "default_rate")]
    pub annuity_rate: f64,
    pub interconnection_enabled: bool,
    pub countries: Vec<Country>,
    /// Omitted → built-in technology table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technologies: Option<Vec<Technology>>,
    #[serde(default)]
    pub interconnectors: Vec<Interconnector>,
    #[serde(default)]
    pub exogenous_capacities: Vec<ExogenousCapacity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capacity_overrides: Vec<CapacityOverride>,
    pub series: SeriesFiles,
}

fn default_rate() -> f64 {
    DEFAULT_ANNUITY_RATE
}

/// Reads one series family. Returns country → series.
pub fn read_series_csv(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let ctx = path.display().to_string();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(&ctx, e))?.clone();
    if headers.get(0) != Some("hour") {
        return Err(Error::csv(&ctx, "first column must be `hour`"));
    }
    let countries: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); countries.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(&ctx, e))?;
        let hour: usize = record
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::csv(&ctx, format!("row {}: bad hour", row_idx + 1)))?;
        if hour != row_idx {
            return Err(Error::csv(
                &ctx,
                format!("row {}: expected hour {row_idx}, found {hour}", row_idx + 1),
            ));
        }
        if record.len() != countries.len() + 1 {
            return Err(Error::csv(&ctx, format!("row {}: wrong field count", row_idx + 1)));
        }
        for (i, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::csv(&ctx, format!("row {}: bad number `{field}`", row_idx + 1)))?;
            out[i].push(v);
        }
    }
    Ok(countries.into_iter().zip(out).collect())
}

/// Writes one series family; columns in map order.
pub fn write_series_csv(path: &Path, series: &BTreeMap<String, Vec<f64>>) -> Result<()> {
    let ctx = path.display().to_string();
    let len = series.values().map(Vec::len).max().unwrap_or(0);
    if series.values().any(|s| s.len() != len) {
        return Err(Error::csv(&ctx, "series of unequal length"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(&ctx, e))?;
    let mut header = vec!["hour".to_string()];
    header.extend(series.keys().cloned());
    w.write_record(&header).map_err(|e| Error::csv(&ctx, e))?;
    for h in 0..len {
        let mut row = vec![h.to_string()];
        row.extend(series.values().map(|s| s[h].to_string()));
        w.write_record(&row).map_err(|e| Error::csv(&ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

impl SystemManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Resolves the series files and builds the spec.
    pub fn into_spec(self, base_dir: &Path) -> Result<PowerSystemSpec> {
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let load = read_series_csv(&resolve(&self.series.load))?;
        let reservoir_inflow = match &self.series.reservoir_inflow {
            Some(p) => read_series_csv(&resolve(p))?,
            None => BTreeMap::new(),
        };
        let mut capacity_factors = BTreeMap::new();
        for (tech, p) in &self.series.capacity_factors {
            capacity_factors.insert(tech.clone(), read_series_csv(&resolve(p))?);
        }
        Ok(PowerSystemSpec {
            countries: self.countries,
            technologies: self.technologies.unwrap_or_else(default_technologies),
            time_series: TimeSeriesSet {
                horizon: self.horizon,
                capacity_factors,
                load,
                reservoir_inflow,
            },
            interconnectors: self.interconnectors,
            exogenous_capacities: self.exogenous_capacities,
            capacity_overrides: self.capacity_overrides,
            interconnection_enabled: self.interconnection_enabled,
            annuity_rate: self.annuity_rate,
        })
    }
}

/// Loads a system from its manifest path.
pub fn load_system(manifest: &Path) -> Result<PowerSystemSpec> {
    let m = SystemManifest::from_path(manifest)?;
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    m.into_spec(dir)
}

/// Writes `system.json` plus one CSV per series family into `dir`.
///
/// Returns the manifest path.
pub fn save_system(spec: &PowerSystemSpec, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ts = &spec.time_series;
    write_series_csv(&dir.join("load.csv"), &ts.load)?;
    let reservoir_inflow = if ts.reservoir_inflow.is_empty() {
        None
    } else {
        write_series_csv(&dir.join("reservoir_inflow.csv"), &ts.reservoir_inflow)?;
        Some(PathBuf::from("reservoir_inflow.csv"))
    };
    let mut capacity_factors = BTreeMap::new();
    for (tech, series) in &ts.capacity_factors {
        let name = format!("cf_{tech}.csv");
        write_series_csv(&dir.join(&name), series)?;
        capacity_factors.insert(tech.clone(), PathBuf::from(name));
    }
    let manifest = SystemManifest {
        horizon: ts.horizon,
        annuity_rate: spec.annuity_rate,
        interconnection_enabled: spec.interconnection_enabled,
        countries: spec.countries.clone(),
        technologies: Some(spec.technologies.clone()),
        interconnectors: spec.interconnectors.clone(),
        exogenous_capacities: spec.exogenous_capacities.clone(),
        capacity_overrides: spec.capacity_overrides.clone(),
        series: SeriesFiles {
            load: PathBuf::from("load.csv"),
            reservoir_inflow,
            capacity_factors,
        },
    };
    let path = dir.join("system.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("system manifest", e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthesize_system;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthesize_system(11, 3, 30, -0.4).unwrap();
        let path = save_system(&spec, dir.path()).unwrap();
        let back = load_system(&path).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn rejects_unknown_manifest_keys() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthesize_system(11, 1, 4, 0.0).unwrap();
        let path = save_system(&spec, dir.path()).unwrap();
        let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        json["surprise"] = serde_json::json!(1);
        fs::write(&path, json.to_string()).unwrap();
        assert!(matches!(load_system(&path), Err(Error::Json { .. })));
    }

    #[test]
    fn rejects_out_of_order_hours() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "hour,DE\n0,1.5\n2,3\n").unwrap();
        assert!(read_series_csv(&p).is_err());
        fs::write(&p, "hour,DE,FR\n0,1.5,2\n1,3,4.25\n").unwrap();
        let s = read_series_csv(&p).unwrap();
        assert_eq!(s["FR"], vec![2.0, 4.25]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_system(Path::new("/definitely/not/here.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
