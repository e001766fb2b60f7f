//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use geobal_core::factorize::{factor_totals, interaction_term, shared_interactions_totals};
use geobal_core::lp::assemble;
use geobal_core::metrics::{storage_summary, Metric};
use geobal_core::model::{annuity, synthesize_system};
use geobal_core::residual::{peak_coincidence, positive_events, ResidualSeries};
use geobal_core::solver::solve;
use geobal_core::sweep::{decompose_ledger, run_sweep};
use geobal_core::{Factor, FactorState, MetricTable, SolveOptions};
use num_rational::Rational64;
use rand::Rng;

/// Outcome of one criterion: pass flag and a short measurement summary.
type Outcome = (bool, String);

type Files = Vec<(String, Vec<u8>)>;

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let secs = start.elapsed().as_secs_f64();
    (
        ok && start.elapsed() < limit,
        format!("{detail}; {secs:.1} s of {} s", limit.as_secs()),
    )
}

fn factorization_identities() -> Outcome {
    timed(Duration::from_secs(10), || {
        let mut rng = common::rng(1);
        let states = FactorState::NATIVE.subsets();
        let one = Factor::Interconnection;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let values: Vec<f64> = (0..64).map(|_| rng.random_range(-1e6..1e6)).collect();
            let table = MetricTable::from_values("m", FactorState::NATIVE, states.iter().copied().zip(values)).unwrap();
            let full = table.get(FactorState::NATIVE).unwrap();
            let isolated = table.get(FactorState::NATIVE.without(one)).unwrap();
            let d = shared_interactions_totals(&table).unwrap();
            // Relative to the operands of the difference, not to the
            // difference itself, which may cancel to almost nothing.
            let scale = full.abs().max(isolated.abs()).max(d.int.abs());
            let with_one: f64 = states
                .iter()
                .filter(|s| s.contains(one))
                .map(|s| interaction_term(&table, *s).unwrap())
                .sum();
            let totals = d.totals.values().sum::<f64>() + d.baseline;
            worst = worst
                .max((with_one - (full - isolated)).abs() / scale)
                .max((totals - d.int).abs() / scale);
        }
        (
            worst <= 1e-9,
            format!("worst relative error {worst:.2e} over 1000 tables"),
        )
    })
}

fn two_factor_closed_form() -> Outcome {
    let mut rng = common::rng(2);
    let factors: FactorState = "f_12".parse().unwrap();
    let states = factors.subsets();
    let half = Rational64::new(1, 2);
    let mut cases = 0;
    let all = (0..500).all(|_| {
        let q: Vec<Rational64> = (0..4)
            .map(|_| Rational64::new(rng.random_range(-10_000..10_000), rng.random_range(1..100)))
            .collect();
        let (f0, f1, f2, f12) = (q[0], q[1], q[2], q[3]);
        let table = MetricTable::from_values("toy", factors, states.iter().copied().zip(q.iter().copied())).unwrap();
        let totals = factor_totals(&table).unwrap();
        cases += 1;
        totals[&Factor::Interconnection] == half * ((f1 - f0) + (f12 - f2))
            && totals[&Factor::Wind] == half * ((f2 - f0) + (f12 - f1))
    });
    (all, format!("{cases} rational tables compared exactly"))
}

fn lp_oracle() -> Outcome {
    timed(Duration::from_secs(60), || {
        let mut rng = common::rng(20240607);
        let options = SolveOptions::default();
        let mut worst: f64 = 0.0;
        let mut solved = 0;
        for _ in 0..200 {
            let dense = common::random_lp(&mut rng);
            let Some(oracle) = common::vertex_enumeration(&dense) else {
                continue;
            };
            let r = solve(&dense.to_lp(), &options).unwrap();
            if r.is_optimal() {
                solved += 1;
                worst = worst.max((r.objective - oracle).abs() / oracle.abs().max(1.0));
            }
        }
        let spec = common::wind_only_system(8760);
        let (lp, _) = assemble(&spec).unwrap();
        let r = solve(&lp, &options).unwrap();
        let n = r.primal[lp.column_index()["N[DE.wind_onshore]"]];
        let cost = 2000.0 * annuity(1182.0, 25.0, 0.04).unwrap();
        let ok = solved == 200 && worst <= 1e-8 && n == 2.0 && (r.objective - cost).abs() <= 1e-9 * cost;
        (
            ok,
            format!("{solved}/200 optimal, worst relative gap {worst:.1e}, wind-only N = {n} MW"),
        )
    })
}

fn desk_scale_reproduction(dir: &Path) -> (Outcome, Option<geobal_core::sweep::RunLedger>) {
    let mut ledger = None;
    let outcome = timed(Duration::from_secs(300), || {
        let spec = synthesize_system(7, 2, 336, -0.9).unwrap();
        let manifest = common::sweep_manifest(dir, &spec, 4, false);
        let l = run_sweep(&manifest).unwrap();
        let decompositions = decompose_ledger(&l).unwrap();
        let long = decompositions
            .iter()
            .find(|d| d.metric == Metric::LongStorageEnergy.name())
            .unwrap();
        let reduction = -long.int;
        let shares = long.shares.clone().unwrap_or_default();
        let wind = shares.get(&Factor::Wind).copied().unwrap_or(f64::NAN);
        let wind_largest = shares.iter().all(|(f, s)| *f == Factor::Wind || *s < wind);
        let ok = l.entries.len() == 64 && reduction > 0.0 && wind_largest;
        ledger = Some(l);
        (
            ok,
            format!(
                "long-duration energy {:.1} -> {:.1} MWh, s_wind {wind:.3}, next largest {:.3}",
                long.isolated,
                long.isolated + long.int,
                shares
                    .iter()
                    .filter(|(f, _)| **f != Factor::Wind)
                    .map(|(_, s)| *s)
                    .fold(f64::MIN, f64::max)
            ),
        )
    });
    (outcome, ledger)
}

fn scaled_copy_null(ledger: Option<&geobal_core::sweep::RunLedger>) -> Outcome {
    let one: FactorState = "f_1".parse().unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |f0: &geobal_core::metrics::StorageSummary, f1: &geobal_core::metrics::StorageSummary| {
        Metric::ALL.iter().all(|m| {
            let (a, b) = (f0.value(*m), f1.value(*m));
            worst = worst.max((b - a).abs() / a.abs().max(f64::MIN_POSITIVE));
            (b - a).abs() <= 1e-4 * a.abs()
        })
    };
    // Three countries, solved directly.
    let spec = synthesize_system(5, 3, 168, -0.5).unwrap();
    let shares = geobal_core::harmonize::derive_reference_shares(&spec, "DE", &SolveOptions::default()).unwrap();
    let summary = |state: FactorState| {
        let s = geobal_core::harmonize::apply_factor_state(&spec, state, &shares).unwrap();
        let (lp, _) = assemble(&s).unwrap();
        let r = solve(&lp, &SolveOptions::default()).unwrap();
        assert!(r.is_optimal());
        storage_summary(&s, &lp, &r)
    };
    let three = check(&summary(FactorState::BASELINE), &summary(one));
    let two = ledger.is_some_and(|l| {
        let get = |s: FactorState| l.entries[&s].storage.clone().unwrap();
        check(&get(FactorState::BASELINE), &get(one))
    });
    (
        three && two,
        format!("worst |f_1 - f_0| / |f_0| = {worst:.1e} over both systems and four metrics"),
    )
}

fn residual_oracle() -> Outcome {
    let mut rng = common::rng(6);
    let mut mismatches = 0;
    let mut coincidence_violations = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..=500);
        let series: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    f64::from(rng.random_range(-640_000..640_000)) / 64.0
                }
            })
            .collect();
        let got: Vec<(usize, usize, f64)> = positive_events("XX", &series)
            .iter()
            .map(|e| (e.start, e.end, e.peak_cumulative))
            .collect();
        if got != common::scan_events(&series) {
            mismatches += 1;
        }

        let countries = rng.random_range(1..=5);
        let hours = rng.random_range(1..=100);
        let draw: BTreeMap<String, ResidualSeries> = (0..countries)
            .map(|i| {
                let values = (0..hours).map(|_| rng.random_range(-1e4..1e4)).collect();
                let country = format!("C{i}");
                (
                    country.clone(),
                    ResidualSeries {
                        country,
                        values,
                        input_hash: String::new(),
                    },
                )
            })
            .collect();
        let (sum_of_peaks, system_peak) = peak_coincidence(&draw).unwrap();
        if system_peak > sum_of_peaks {
            coincidence_violations += 1;
        }
    }
    (
        mismatches == 0 && coincidence_violations == 0,
        format!("{mismatches} event mismatches, {coincidence_violations} coincidence violations in 10000 draws"),
    )
}

fn lp_exports(dir: &Path) -> Files {
    let mut files: Files = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let spec = synthesize_system(7, 2, 48, -0.9).unwrap();
    let runs: Vec<(Vec<u8>, Files)> = [1, 1, 8, 8]
        .iter()
        .map(|&p| {
            let dir = tempfile::tempdir().unwrap();
            let m = common::sweep_manifest(dir.path(), &spec, p, true);
            run_sweep(&m).unwrap();
            (fs::read(m.ledger_path()).unwrap(), lp_exports(&m.output.join("lp")))
        })
        .collect();
    let same = runs.iter().all(|r| r == &runs[0]);
    (
        same && runs[0].1.len() == 64,
        format!("4 sweeps of 64 states, {} MPS files each", runs[0].1.len()),
    )
}

fn parameter_fidelity() -> Outcome {
    let bad = common::parameter_table_mismatches();
    let spots = common::parameter_spot_checks();
    let failed: Vec<&str> = spots.iter().filter(|(_, ok)| !ok).map(|(w, _)| *w).collect();
    (
        bad.is_empty() && failed.is_empty(),
        if bad.is_empty() && failed.is_empty() {
            format!("all table cells and {} spot checks agree", spots.len())
        } else {
            format!("mismatches: {bad:?} {failed:?}")
        },
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    })
}

fn main() {
    let sweep_dir = tempfile::tempdir().unwrap();
    let mut ledger = None;
    type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 factorization identities", Box::new(factorization_identities)),
        ("2 two-factor closed form", Box::new(two_factor_closed_form)),
        ("3 LP oracle equivalence", Box::new(lp_oracle)),
        (
            "4 desk-scale reproduction",
            Box::new(|| {
                let (outcome, l) = desk_scale_reproduction(sweep_dir.path());
                ledger = l;
                outcome
            }),
        ),
    ];
    let mut failed = 0;
    let mut report = |name: &str, (ok, detail): Outcome| {
        println!("{} criterion {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    };
    for (name, f) in criteria {
        report(name, guarded(f));
    }
    report("5 scaled-copy null test", guarded(|| scaled_copy_null(ledger.as_ref())));
    report("6 residual analytics oracle", guarded(residual_oracle));
    report("7 determinism", guarded(determinism));
    report("8 parameter fidelity", guarded(parameter_fidelity));
    if failed > 0 {
        std::process::exit(1);
    }
}
