use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geobal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geobal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn synthesize(dir: &Path, horizon: usize) -> PathBuf {
    let out = geobal(&[
        "synthesize",
        "--seed",
        "3",
        "--horizon",
        &horizon.to_string(),
        "--correlation",
        "-0.8",
        "--out",
        dir.join("system").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

fn run_manifest(dir: &Path, system: &Path) -> PathBuf {
    let path = dir.join("run.json");
    let text = serde_json::json!({
        "system": system,
        "reference_country": "DE",
        "factors": ["interconnection", "wind"],
        "fixture": "cli-test",
        "output": dir.join("out"),
        "parallelism": 2,
    });
    fs::write(&path, text.to_string()).unwrap();
    path
}

#[test]
fn validate_accepts_synthetic_system() {
    let dir = tempfile::tempdir().unwrap();
    let system = synthesize(dir.path(), 24);
    assert_eq!(code(&geobal(&["validate", "--manifest", system.to_str().unwrap()])), 0);
}

#[test]
fn invalid_system_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let system = synthesize(dir.path(), 24);
    let mut manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&system).unwrap()).unwrap();
    manifest["countries"][0]["yearly_load_total"] = serde_json::json!(-1.0);
    fs::write(&system, manifest.to_string()).unwrap();
    let out = geobal(&["validate", "--manifest", system.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        code(&geobal(&["validate", "--manifest", "/nonexistent/system.json"])),
        2
    );
    assert_eq!(code(&geobal(&["solve", "--manifest", "x.json", "--state", "f_07"])), 2);
    assert_eq!(code(&geobal(&["sweep"])), 2);
    assert_eq!(code(&geobal(&["no-such-command"])), 2);
}

#[test]
fn solve_reports_objective_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let system = synthesize(dir.path(), 24);
    let out_dir = dir.path().join("solve");
    let mps = dir.path().join("lp.mps");
    let out = geobal(&[
        "solve",
        "--manifest",
        system.to_str().unwrap(),
        "--state",
        "f_1",
        "--out",
        out_dir.to_str().unwrap(),
        "--mps-out",
        mps.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("objective_eur,"));
    assert!(out_dir.join("solution.csv").exists());
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["passed"], serde_json::json!(true));
    assert!(fs::read_to_string(mps).unwrap().starts_with("NAME"));
}

#[test]
fn mini_sweep_then_factorize_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let system = synthesize(dir.path(), 24);
    let manifest = run_manifest(dir.path(), &system);
    let m = manifest.to_str().unwrap();
    let out = geobal(&["sweep", "--manifest", m]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("4 states"));
    let ledger: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/ledger.json")).unwrap()).unwrap();
    assert_eq!(ledger["entries"].as_object().unwrap().len(), 4);

    let fdir = dir.path().join("factorized");
    let out = geobal(&["factorize", "--manifest", m, "--out", fdir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(fdir.join("decomposition.csv")).unwrap();
    assert!(csv.starts_with("metric,term,subset,value,share"));

    let before = fs::read(dir.path().join("out/ledger.json")).unwrap();
    let out = geobal(&["sweep", "--manifest", m, "--resume"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(dir.path().join("out/ledger.json")).unwrap(), before);

    let rdir = dir.path().join("residual");
    let out = geobal(&["residual", "--manifest", m, "--out", rdir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(rdir.join("residual_summary.csv").exists());
}

#[test]
fn residual_without_events_keeps_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let system = synthesize(dir.path(), 24);
    let caps = dir.path().join("caps.csv");
    let mut text = String::from("country,technology,power\n");
    for c in ["DE", "FR"] {
        for t in ["pv", "wind_offshore", "wind_onshore"] {
            text.push_str(&format!("{c},{t},1e7\n"));
        }
    }
    fs::write(&caps, text).unwrap();
    let rdir = dir.path().join("residual");
    let out = geobal(&[
        "residual",
        "--system",
        system.to_str().unwrap(),
        "--capacities",
        caps.to_str().unwrap(),
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let events = fs::read_to_string(rdir.join("residual_events.csv")).unwrap();
    assert_eq!(events.trim_end(), "country,start,end,peak_cumulative,gross_positive");
}

#[test]
fn factorize_a_metric_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    let text = serde_json::json!({
        "metric": "toy",
        "factors": "f_12",
        "values": {"f_0": 0.0, "f_1": 1.0, "f_2": 2.0, "f_12": 4.0},
    });
    fs::write(&table, text.to_string()).unwrap();
    let out_dir = dir.path().join("f");
    let out = geobal(&[
        "factorize",
        "--table",
        table.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("decomposition.csv")).unwrap();
    assert!(csv.contains("toy,int,f_12,2,"), "{csv}");
}

#[test]
fn export_lp_writes_mps() {
    let dir = tempfile::tempdir().unwrap();
    let system = synthesize(dir.path(), 4);
    let path = dir.path().join("model.mps");
    let out = geobal(&[
        "export-lp",
        "--manifest",
        system.to_str().unwrap(),
        "--state",
        "f_0",
        "--mps-out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains("ROWS") && text.trim_end().ends_with("ENDATA"));
}
