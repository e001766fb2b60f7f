//! `geobal`: command-line driver for the capacity expansion and factor
//! separation toolkit.
//!
//! Exit codes: 0 success, 1 domain error (invalid system, failed solve, ...),
//! 2 usage error (bad flags, missing input files, malformed state labels).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use geobal_core::factorize::{
    read_metric_tables, shared_interactions_totals, write_decomposition_csv, write_decomposition_json,
    FactorDecomposition,
};
use geobal_core::harmonize::{apply_factor_state, derive_reference_shares, Factor, FactorState, ReferenceShares};
use geobal_core::lp::{assemble, mps};
use geobal_core::metrics::{storage_summary, Metric};
use geobal_core::model::{load_system, save_system, synthesize_system, validate, PowerSystemSpec};
use geobal_core::residual::{residual_report, write_residual_report, PowerCapacities};
use geobal_core::solver::{solve, verify_certificate, write_solution, SolveOptions};
use geobal_core::sweep::{decompose_ledger, residual_for_state, resume, run_sweep, RunLedger, RunManifest};

#[derive(Parser)]
#[command(
    name = "geobal",
    version,
    about = "Multi-region capacity expansion with factor separation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system manifest; violations go to standard error.
    Validate {
        /// System manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Solve one scenario of a system.
    Solve(SolveArgs),
    /// Run (or resume) the full factorial sweep of a run manifest.
    Sweep {
        /// Run manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
        /// Factors to vary, by name or digit; overrides the manifest.
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<Factor>>,
        /// Worker threads; overrides the manifest.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; overrides the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from the ledger in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Decompose the metrics of a finished sweep or of metric tables.
    Factorize {
        /// Run manifest whose output directory holds a complete ledger.
        #[arg(long, conflicts_with_all = ["ledger", "table"])]
        manifest: Option<PathBuf>,
        /// Ledger file (`ledger.json`).
        #[arg(long, conflicts_with = "table")]
        ledger: Option<PathBuf>,
        /// JSON metric table, or a list of them.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Directory for `decomposition.csv` and `decomposition.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Residual-load analytics of one scenario.
    Residual(ResidualArgs),
    /// Write a seeded synthetic system.
    Synthesize {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        countries: usize,
        /// Hours.
        #[arg(long, default_value_t = 336)]
        horizon: usize,
        /// Latent wind correlation between the first and every other country.
        #[arg(long, default_value_t = -0.9, allow_negative_numbers = true)]
        correlation: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the LP of one scenario in MPS format.
    ExportLp {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        mps_out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario label such as `f_123456` (native, interconnected).
    #[arg(long, default_value = "f_123456")]
    state: FactorState,
    /// Reference country for harmonized factors.
    #[arg(long, default_value = "DE")]
    reference: String,
}

#[derive(Args)]
struct SolveArgs {
    /// System manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Directory for `solution.csv` and `certificate.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the LP in MPS format.
    #[arg(long)]
    mps_out: Option<PathBuf>,
}

#[derive(Args)]
struct ResidualArgs {
    /// Run manifest of a finished sweep.
    #[arg(long, conflicts_with_all = ["system", "capacities"])]
    manifest: Option<PathBuf>,
    /// Scenario whose capacities are used; default: native without interconnection.
    #[arg(long)]
    state: Option<FactorState>,
    /// System manifest, used together with `--capacities`.
    #[arg(long, requires = "capacities")]
    system: Option<PathBuf>,
    /// CSV `country,technology,power` with power in MW.
    #[arg(long, requires = "system")]
    capacities: Option<PathBuf>,
    /// Countries left out of the event table.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Failures split by exit code.
enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn existing(path: &Path) -> Result<&Path, Failure> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::Usage(anyhow!("{} does not exist", path.display())))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Validate { manifest } => cmd_validate(&manifest),
        Command::Solve(args) => cmd_solve(&args),
        Command::Sweep {
            manifest,
            factors,
            workers,
            out,
            resume,
        } => cmd_sweep(&manifest, factors, workers, out, resume),
        Command::Factorize {
            manifest,
            ledger,
            table,
            out,
        } => cmd_factorize(manifest, ledger, table, &out),
        Command::Residual(args) => cmd_residual(&args),
        Command::Synthesize {
            seed,
            countries,
            horizon,
            correlation,
            out,
        } => {
            let spec = synthesize_system(seed, countries, horizon, correlation)?;
            let path = save_system(&spec, &out)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::ExportLp {
            manifest,
            scenario,
            mps_out,
        } => {
            let spec = load_valid(&manifest)?;
            let scenario_spec = scenario_system(&spec, &scenario)?;
            let (lp, _) = assemble(&scenario_spec)?;
            mps::write_mps(&lp, &mps_out)?;
            Ok(())
        }
    }
}

fn load_valid(manifest: &Path) -> Result<PowerSystemSpec, Failure> {
    let spec = load_system(existing(manifest)?)?;
    let violations = validate(&spec);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{v}");
        }
        return Err(Failure::Domain(anyhow!("{} violation(s)", violations.len())));
    }
    Ok(spec)
}

fn cmd_validate(manifest: &Path) -> CliResult {
    load_valid(manifest).map(drop)
}

fn needs_shares(state: FactorState) -> bool {
    [Factor::Wind, Factor::Hydro, Factor::Bioenergy]
        .into_iter()
        .any(|f| state.harmonizes(f))
}

/// The system of one scenario; reference shares are derived only when a
/// harmonized factor needs them.
fn scenario_system(spec: &PowerSystemSpec, scenario: &ScenarioArgs) -> anyhow::Result<PowerSystemSpec> {
    if spec.country(&scenario.reference).is_none() {
        bail!("reference country {} is not part of the system", scenario.reference);
    }
    let shares = if needs_shares(scenario.state) {
        derive_reference_shares(spec, &scenario.reference, &SolveOptions::default())?
    } else {
        ReferenceShares {
            reference_country: scenario.reference.clone(),
            shares: BTreeMap::new(),
            provenance: geobal_core::harmonize::ShareProvenance {
                system_hash: spec.content_hash(),
                horizon: spec.horizon(),
                objective: 0.0,
                iterations: 0,
            },
        }
    };
    Ok(apply_factor_state(spec, scenario.state, &shares)?)
}

fn cmd_solve(args: &SolveArgs) -> CliResult {
    let spec = load_valid(&args.manifest)?;
    let scenario = scenario_system(&spec, &args.scenario)?;
    let (lp, report) = assemble(&scenario)?;
    if let Some(path) = &args.mps_out {
        mps::write_mps(&lp, path)?;
    }
    let options = SolveOptions::default();
    let result = solve(&lp, &options)?;
    println!(
        "state {}: {} after {} iterations ({} rows, {} columns)",
        args.scenario.state,
        result.status,
        result.iterations,
        report.total_rows(),
        report.total_columns()
    );
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_solution(&dir.join("solution.csv"), &lp, &result)?;
    }
    if !result.is_optimal() {
        return Err(Failure::Domain(anyhow!("solve ended with status {}", result.status)));
    }
    let cert = verify_certificate(&lp, &result, options.certificate_tolerance);
    if let Some(dir) = &args.out {
        std::fs::write(
            dir.join("certificate.json"),
            serde_json::to_string_pretty(&cert)? + "\n",
        )?;
    }
    println!("objective_eur,{}", result.objective);
    let storage = storage_summary(&scenario, &lp, &result);
    for m in Metric::ALL {
        println!("{}_{},{}", m, m.unit().to_lowercase(), storage.value(m));
    }
    if !cert.passed {
        return Err(Failure::Domain(anyhow!("optimality certificate failed: {cert:?}")));
    }
    Ok(())
}

fn cmd_sweep(
    manifest: &Path,
    factors: Option<Vec<Factor>>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    resume_run: bool,
) -> CliResult {
    let mut m = RunManifest::from_path(existing(manifest)?).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(f) = factors {
        m.factors = f;
    }
    if let Some(w) = workers {
        if w == 0 {
            return Err(Failure::Usage(anyhow!("--workers must be at least 1")));
        }
        m.parallelism = w;
    }
    if let Some(o) = out {
        m.output = o;
    }
    let ledger = if resume_run && m.ledger_path().exists() {
        resume(&m, RunLedger::read(&m.output)?)?
    } else {
        run_sweep(&m)?
    };
    println!("{} states solved into {}", ledger.entries.len(), m.output.display());
    if ledger.factors.contains(Factor::Interconnection) {
        print_shares(&decompose_ledger(&ledger)?);
    }
    Ok(())
}

fn print_shares(decompositions: &[FactorDecomposition<f64>]) {
    for d in decompositions {
        match (&d.shares, d.baseline_share) {
            (Some(shares), Some(base)) => {
                let parts: Vec<String> = shares.iter().map(|(f, s)| format!("{f}={s:.4}")).collect();
                println!("{}: INT={} baseline={base:.4} {}", d.metric, d.int, parts.join(" "));
            }
            _ => println!("{}: INT={} (shares suppressed)", d.metric, d.int),
        }
    }
}

fn cmd_factorize(manifest: Option<PathBuf>, ledger: Option<PathBuf>, table: Option<PathBuf>, out: &Path) -> CliResult {
    let decompositions = if let Some(t) = table {
        read_metric_tables(existing(&t)?)?
            .iter()
            .map(shared_interactions_totals)
            .collect::<geobal_core::Result<Vec<_>>>()?
    } else {
        let dir = match (manifest, ledger) {
            (Some(m), _) => {
                RunManifest::from_path(existing(&m)?)
                    .map_err(|e| Failure::Usage(e.into()))?
                    .output
            }
            (None, Some(l)) => existing(&l)?.parent().map(Path::to_path_buf).unwrap_or_default(),
            (None, None) => return Err(Failure::Usage(anyhow!("give --manifest, --ledger or --table"))),
        };
        decompose_ledger(&RunLedger::read(&dir)?)?
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_decomposition_csv(&out.join("decomposition.csv"), &decompositions)?;
    write_decomposition_json(&out.join("decomposition.json"), &decompositions)?;
    print_shares(&decompositions);
    Ok(())
}

fn read_capacities(path: &Path) -> anyhow::Result<PowerCapacities> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = PowerCapacities::new();
    for rec in r.deserialize::<(String, String, f64)>() {
        let (c, t, p) = rec.with_context(|| format!("parsing {}", path.display()))?;
        out.insert((c, t), p);
    }
    Ok(out)
}

fn cmd_residual(args: &ResidualArgs) -> CliResult {
    let report = match (&args.manifest, &args.system, &args.capacities) {
        (Some(m), _, _) => {
            let m = RunManifest::from_path(existing(m)?).map_err(|e| Failure::Usage(e.into()))?;
            let spec = load_valid(&m.system)?;
            let ledger = RunLedger::read(&m.output)?;
            let shares: ReferenceShares = {
                let p = m.output.join("reference_shares.json");
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text)?
            };
            let state = args
                .state
                .unwrap_or_else(|| ledger.factors.without(Factor::Interconnection));
            residual_for_state(&spec, &shares, &ledger, state, &args.exclude)?
        }
        (None, Some(system), Some(caps)) => {
            let spec = load_valid(system)?;
            let caps = read_capacities(existing(caps)?)?;
            let label = args.state.map_or_else(|| "given".to_string(), |s| s.to_string());
            residual_report(&spec, &caps, &label, &args.exclude)?
        }
        _ => {
            return Err(Failure::Usage(anyhow!(
                "give --manifest, or --system with --capacities"
            )))
        }
    };
    write_residual_report(&args.out, &report)?;
    println!(
        "{} events; sum of peaks {} MWh/h, system peak {} MWh/h",
        report.events.len(),
        report.sum_of_peaks,
        report.system_peak
    );
    Ok(())
}
