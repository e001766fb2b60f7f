//! The full factorial experiment.
//!
//! A sweep derives reference shares once, solves every state of the varied
//! factors under a bounded worker pool and records each outcome in a ledger.
//! The ledger is written by the calling thread alone after every completed
//! solve, so an interrupted run keeps what it finished and can be resumed.
//!
//! Output directory layout:
//!
//! ```text
//! ledger.json               entries by state, canonical order, no timings
//! timing.json               wall time per state
//! reference_shares.json
//! results/<lp-hash>.csv     `column,value` then `row,dual` per solve
//! lp/<lp-hash>.mps          only with `export_mps`
//! decomposition.csv / .json
//! interconnection.csv, utilization.csv
//! residual/                 see `residual::write_residual_report`
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::factorize::{decompose_metrics, write_decomposition_csv, write_decomposition_json, FactorDecomposition};
use crate::harmonize::{apply_factor_state, derive_reference_shares, Factor, FactorState, ReferenceShares};
use crate::lp::{assemble, installed_capacities, mps, Installed, LinearProgram, VarFamily};
use crate::metrics::{storage_summary, Metric, StorageSummary};
use crate::model::{load_system, validate, PowerSystemSpec};
use crate::residual::{residual_report, write_residual_report, PowerCapacities, ResidualReport};
use crate::solver::{
    import_solution, read_solution, solve, verify_certificate, write_solution, SolveOptions, SolveStatus,
};
use crate::{Error, Result};

fn all_factors() -> Vec<Factor> {
    Factor::ALL.to_vec()
}

fn one() -> usize {
    1
}

/// What to run and where to put it. Relative paths resolve against the
/// manifest file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Path of the base system manifest.
    pub system: PathBuf,
    pub reference_country: String,
    #[serde(default = "all_factors")]
    pub factors: Vec<Factor>,
    /// Label of the weather fixture, e.g. a year.
    #[serde(default)]
    pub fixture: String,
    #[serde(default)]
    pub solver: SolveOptions,
    pub output: PathBuf,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default)]
    pub export_mps: bool,
    /// Countries left out of the residual event table.
    #[serde(default)]
    pub residual_excluded: Vec<String>,
}

/// Fields that decide the results; paths and parallelism are left out.
#[derive(Serialize)]
struct HashedManifest<'a> {
    system_hash: &'a str,
    reference_country: &'a str,
    factors: FactorState,
    fixture: &'a str,
    solver: &'a SolveOptions,
    export_mps: bool,
    residual_excluded: &'a [String],
}

impl RunManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        if m.system.is_relative() {
            m.system = dir.join(&m.system);
        }
        if m.output.is_relative() {
            m.output = dir.join(&m.output);
        }
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
        }
        if !self.system.exists() {
            return Err(Error::InvalidArgument(format!(
                "system manifest {} does not exist",
                self.system.display()
            )));
        }
        if self.factors.is_empty() {
            return Err(Error::InvalidArgument("no factors to vary".into()));
        }
        Ok(())
    }

    pub fn factor_state(&self) -> FactorState {
        FactorState::from_factors(self.factors.iter().copied())
    }

    pub fn hash(&self, system_hash: &str) -> String {
        let h = HashedManifest {
            system_hash,
            reference_country: &self.reference_country,
            factors: self.factor_state(),
            fixture: &self.fixture,
            solver: &self.solver,
            export_mps: self.export_mps,
            residual_excluded: &self.residual_excluded,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&h).expect("serializes")))
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.output.join("ledger.json")
    }
}

/// Outcome of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub spec_hash: String,
    pub lp_hash: String,
    pub status: SolveStatus,
    /// EUR; absent unless optimal.
    pub objective: Option<f64>,
    pub iterations: usize,
    pub certificate_passed: bool,
    pub storage: Option<StorageSummary>,
    /// country → technology → capacities.
    pub capacities: BTreeMap<String, BTreeMap<String, Installed>>,
    /// Line → hourly mean of |flow| / NTC.
    pub utilization: BTreeMap<String, f64>,
    /// Relative to the output directory.
    pub result_file: String,
}

impl LedgerEntry {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn power_capacities(&self) -> PowerCapacities {
        self.capacities
            .iter()
            .flat_map(|(c, techs)| techs.iter().map(move |(t, v)| ((c.clone(), t.clone()), v.power)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub software_version: String,
    pub manifest_hash: String,
    pub system_hash: String,
    pub fixture: String,
    pub reference_country: String,
    pub factors: FactorState,
    pub entries: BTreeMap<FactorState, LedgerEntry>,
    /// Seconds per state; persisted next to the ledger, not in it.
    #[serde(skip)]
    pub timing: BTreeMap<FactorState, f64>,
}

impl RunLedger {
    fn new(manifest: &RunManifest, system_hash: &str) -> Self {
        RunLedger {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_hash: manifest.hash(system_hash),
            system_hash: system_hash.to_string(),
            fixture: manifest.fixture.clone(),
            reference_country: manifest.reference_country.clone(),
            factors: manifest.factor_state(),
            entries: BTreeMap::new(),
            timing: BTreeMap::new(),
        }
    }

    /// States not yet solved to optimality, in canonical order.
    pub fn missing_states(&self) -> Vec<FactorState> {
        self.factors
            .subsets()
            .into_iter()
            .filter(|s| !self.entries.get(s).is_some_and(LedgerEntry::is_optimal))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_states().is_empty()
    }

    /// Reads `ledger.json` and, when present, `timing.json` from `dir`.
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("ledger.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut ledger: RunLedger =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let tpath = dir.join("timing.json");
        if let Ok(t) = fs::read_to_string(&tpath) {
            ledger.timing = serde_json::from_str(&t).map_err(|e| Error::json(tpath.display().to_string(), e))?;
        }
        Ok(ledger)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json_atomic(&dir.join("ledger.json"), self)?;
        write_json_atomic(&dir.join("timing.json"), &self.timing)
    }

    /// Storage summaries per state, failures as their status.
    pub fn outcomes(&self) -> BTreeMap<FactorState, std::result::Result<StorageSummary, SolveStatus>> {
        self.entries
            .iter()
            .map(|(s, e)| {
                let v = match (&e.storage, e.status) {
                    (Some(st), SolveStatus::Optimal) => Ok(st.clone()),
                    (_, status) => Err(status),
                };
                (*s, v)
            })
            .collect()
    }
}

fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// SHA-256 of the LP's MPS rendering.
pub fn lp_hash(lp: &LinearProgram) -> String {
    hex::encode(Sha256::digest(mps::to_mps(lp).as_bytes()))
}

fn short(hash: &str) -> &str {
    &hash[..16]
}

/// Hourly mean of |F| / NTC per line.
pub fn line_utilization(lp: &LinearProgram, primal: &[f64]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (j, c) in lp.columns.iter().enumerate() {
        if c.key.family != VarFamily::Flow || c.key.hour.is_none() || c.upper <= 0.0 {
            continue;
        }
        let e = acc.entry(c.key.entity.clone()).or_default();
        e.0 += (primal[j].abs() / c.upper).min(1.0);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn nested(caps: BTreeMap<(String, String), Installed>) -> BTreeMap<String, BTreeMap<String, Installed>> {
    let mut out: BTreeMap<String, BTreeMap<String, Installed>> = BTreeMap::new();
    for ((c, t), v) in caps {
        out.entry(c).or_default().insert(t, v);
    }
    out
}

/// Everything a worker needs; shared read-only.
struct Job<'a> {
    spec: &'a PowerSystemSpec,
    shares: &'a ReferenceShares,
    options: &'a SolveOptions,
    output: &'a Path,
    export_mps: bool,
}

impl Job<'_> {
    fn run(&self, state: FactorState) -> Result<LedgerEntry> {
        let spec = apply_factor_state(self.spec, state, self.shares)?;
        let (lp, _) = assemble(&spec)?;
        let text = mps::to_mps(&lp);
        let lp_hash = hex::encode(Sha256::digest(text.as_bytes()));
        if self.export_mps {
            let path = self.output.join("lp").join(format!("{}.mps", short(&lp_hash)));
            fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        }
        let result = solve(&lp, self.options)?;
        let result_file = format!("results/{}.csv", short(&lp_hash));
        write_solution(&self.output.join(&result_file), &lp, &result)?;
        let optimal = result.is_optimal();
        let certificate_passed = optimal && verify_certificate(&lp, &result, self.options.certificate_tolerance).passed;
        let (storage, capacities, utilization) = if optimal {
            (
                Some(storage_summary(&spec, &lp, &result)),
                nested(installed_capacities(&spec, &lp, &result.primal)),
                line_utilization(&lp, &result.primal),
            )
        } else {
            Default::default()
        };
        Ok(LedgerEntry {
            spec_hash: spec.content_hash(),
            lp_hash,
            status: result.status,
            objective: optimal.then_some(result.objective),
            iterations: result.iterations,
            certificate_passed,
            storage,
            capacities,
            utilization,
            result_file,
        })
    }
}

/// Reference shares, reused from the output directory when they were
/// derived from the same system and reference country.
fn reference_shares(manifest: &RunManifest, spec: &PowerSystemSpec, system_hash: &str) -> Result<ReferenceShares> {
    let path = manifest.output.join("reference_shares.json");
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(cached) = serde_json::from_str::<ReferenceShares>(&text) {
            if cached.provenance.system_hash == system_hash && cached.reference_country == manifest.reference_country {
                return Ok(cached);
            }
        }
    }
    let shares = derive_reference_shares(spec, &manifest.reference_country, &manifest.solver)?;
    write_json_atomic(&path, &shares)?;
    Ok(shares)
}

fn load_checked(manifest: &RunManifest) -> Result<PowerSystemSpec> {
    manifest.check()?;
    let spec = load_system(&manifest.system)?;
    let violations = validate(&spec);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    Ok(spec)
}

/// Runs every state from scratch, replacing any earlier ledger in the output
/// directory.
pub fn run_sweep(manifest: &RunManifest) -> Result<RunLedger> {
    let spec = load_checked(manifest)?;
    let ledger = RunLedger::new(manifest, &spec.content_hash());
    execute(manifest, &spec, ledger)
}

/// Solves only the states `ledger` lacks (or recorded as failed).
pub fn resume(manifest: &RunManifest, ledger: RunLedger) -> Result<RunLedger> {
    let spec = load_checked(manifest)?;
    let expected = manifest.hash(&spec.content_hash());
    if ledger.manifest_hash != expected {
        return Err(Error::ManifestMismatch {
            ledger: ledger.manifest_hash,
            manifest: expected,
        });
    }
    execute(manifest, &spec, ledger)
}

/// Resumes from the ledger in the output directory if there is one.
pub fn run_or_resume(manifest: &RunManifest) -> Result<RunLedger> {
    if manifest.ledger_path().exists() {
        resume(manifest, RunLedger::read(&manifest.output)?)
    } else {
        run_sweep(manifest)
    }
}

fn execute(manifest: &RunManifest, spec: &PowerSystemSpec, mut ledger: RunLedger) -> Result<RunLedger> {
    let out = &manifest.output;
    for dir in [out.clone(), out.join("results"), out.join("lp")] {
        if dir.ends_with("lp") && !manifest.export_mps {
            continue;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let shares = reference_shares(manifest, spec, &ledger.system_hash)?;
    let todo = ledger.missing_states();
    ledger.write(out)?;
    log::info!("{} of {} states to solve", todo.len(), ledger.factors.subsets().len());

    let job = Job {
        spec,
        shares: &shares,
        options: &manifest.solver,
        output: out,
        export_mps: manifest.export_mps,
    };
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = manifest.parallelism.min(todo.len()).max(1);
    let mut failures: BTreeMap<FactorState, Error> = BTreeMap::new();

    std::thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel::<(FactorState, Result<LedgerEntry>, f64)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (job, next, stop, todo) = (&job, &next, &stop, &todo);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&state) = todo.get(i) else { break };
                let started = Instant::now();
                let res = job.run(state);
                if tx.send((state, res, started.elapsed().as_secs_f64())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (state, res, secs) in rx {
            match res {
                Ok(entry) => {
                    log::info!(
                        "{state}: {} after {} iterations, {secs:.1} s",
                        entry.status,
                        entry.iterations
                    );
                    if !entry.is_optimal() {
                        stop.store(true, Ordering::SeqCst);
                        failures.insert(
                            state,
                            Error::SolveFailed {
                                context: format!("state {state}"),
                                status: entry.status.to_string(),
                            },
                        );
                    }
                    ledger.entries.insert(state, entry);
                    ledger.timing.insert(state, secs);
                    ledger.write(out)?;
                }
                Err(e) => {
                    stop.store(true, Ordering::SeqCst);
                    failures.insert(state, e);
                }
            }
        }
        Ok(())
    })?;

    if let Some((_, e)) = failures.into_iter().next() {
        return Err(e);
    }
    finalize(manifest, spec, &shares, &ledger)?;
    Ok(ledger)
}

/// Writes decomposition, interconnection and residual outputs of a complete
/// ledger. Parts that need interconnection among the varied factors are
/// skipped otherwise.
pub fn finalize(
    manifest: &RunManifest,
    spec: &PowerSystemSpec,
    shares: &ReferenceShares,
    ledger: &RunLedger,
) -> Result<()> {
    let out = &manifest.output;
    let residual_state = if ledger.factors.contains(Factor::Interconnection) {
        let decompositions = decompose_ledger(ledger)?;
        write_decomposition_csv(&out.join("decomposition.csv"), &decompositions)?;
        write_decomposition_json(&out.join("decomposition.json"), &decompositions)?;
        let report = compare_interconnection(ledger)?;
        write_interconnection_report(out, &report)?;
        ledger.factors.without(Factor::Interconnection)
    } else {
        ledger.factors
    };
    let report = residual_for_state(spec, shares, ledger, residual_state, &manifest.residual_excluded)?;
    write_residual_report(&out.join("residual"), &report)
}

pub fn decompose_ledger(ledger: &RunLedger) -> Result<Vec<FactorDecomposition<f64>>> {
    decompose_metrics(ledger.factors, &ledger.outcomes())
}

/// Residual analysis on the capacities of one solved state.
pub fn residual_for_state(
    spec: &PowerSystemSpec,
    shares: &ReferenceShares,
    ledger: &RunLedger,
    state: FactorState,
    excluded: &[String],
) -> Result<ResidualReport> {
    let entry = ledger
        .entries
        .get(&state)
        .filter(|e| e.is_optimal())
        .ok_or_else(|| Error::MissingState(state.to_string()))?;
    let harmonized = apply_factor_state(spec, state, shares)?;
    residual_report(&harmonized, &entry.power_capacities(), &state.to_string(), excluded)
}

/// Re-extracts the storage summary of `state` from its persisted result file.
pub fn reextract_storage(
    spec: &PowerSystemSpec,
    shares: &ReferenceShares,
    output: &Path,
    state: FactorState,
    entry: &LedgerEntry,
) -> Result<StorageSummary> {
    let harmonized = apply_factor_state(spec, state, shares)?;
    let (lp, _) = assemble(&harmonized)?;
    if lp_hash(&lp) != entry.lp_hash {
        return Err(Error::InvalidArgument(format!(
            "LP of state {state} no longer matches the ledger"
        )));
    }
    let values = read_solution(&output.join(&entry.result_file))?;
    let result = import_solution(&lp, &values)?;
    Ok(storage_summary(&harmonized, &lp, &result))
}

/// One metric in one scope, isolated versus interconnected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub unit: String,
    /// Country code or `total`.
    pub scope: String,
    pub isolated: f64,
    pub interconnected: f64,
    /// `isolated − interconnected`.
    pub reduction: f64,
    /// `reduction / isolated`; absent when nothing is installed in isolation.
    pub relative_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterconnectionReport {
    pub isolated_state: FactorState,
    pub interconnected_state: FactorState,
    pub rows: Vec<MetricComparison>,
    /// Line → hourly mean of |flow| / NTC in the interconnected state.
    pub utilization: BTreeMap<String, f64>,
}

/// Storage needs of the native system with and without interconnection.
pub fn compare_interconnection(ledger: &RunLedger) -> Result<InterconnectionReport> {
    let on = ledger.factors;
    if !on.contains(Factor::Interconnection) {
        return Err(Error::InvalidArgument(
            "interconnection is not among the varied factors".into(),
        ));
    }
    let off = on.without(Factor::Interconnection);
    let get = |s: FactorState| {
        ledger
            .entries
            .get(&s)
            .filter(|e| e.is_optimal())
            .and_then(|e| e.storage.as_ref().map(|st| (e, st)))
            .ok_or_else(|| Error::MissingState(s.to_string()))
    };
    let (on_entry, on_storage) = get(on)?;
    let (_, off_storage) = get(off)?;
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        let mut scopes: Vec<(String, f64, f64)> = off_storage
            .per_country
            .iter()
            .map(|(c, iso)| {
                let int = on_storage.per_country.get(c).map_or(0.0, |s| metric.of(s));
                (c.clone(), metric.of(iso), int)
            })
            .collect();
        scopes.push(("total".into(), off_storage.value(metric), on_storage.value(metric)));
        for (scope, isolated, interconnected) in scopes {
            let reduction = isolated - interconnected;
            rows.push(MetricComparison {
                metric,
                unit: metric.unit().to_string(),
                scope,
                isolated,
                interconnected,
                reduction,
                relative_reduction: (isolated > 0.0).then(|| reduction / isolated),
            });
        }
    }
    Ok(InterconnectionReport {
        isolated_state: off,
        interconnected_state: on,
        rows,
        utilization: on_entry.utilization.clone(),
    })
}

/// `interconnection.csv` and `utilization.csv`.
pub fn write_interconnection_report(dir: &Path, report: &InterconnectionReport) -> Result<()> {
    let path = dir.join("interconnection.csv");
    let ctx = path.display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&ctx, e))?;
    for r in &report.rows {
        w.serialize(r).map_err(|e| Error::csv(&ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("utilization.csv");
    let ctx = path.display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&ctx, e))?;
    w.write_record(["line", "mean_utilization"])
        .map_err(|e| Error::csv(&ctx, e))?;
    for (line, u) in &report.utilization {
        w.write_record([line.clone(), u.to_string()])
            .map_err(|e| Error::csv(&ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
