use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sho-spectra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SAW: &str = r#"{"domain": "circle", "jumps": [{"location": 0.0, "K": [[1.0]]}], "continuous": "sawtooth", "dim": 1}"#;

#[test]
fn sho_spectrum_csv_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let symbol = write(dir.path(), "symbol.json", SAW);
    let out = dir.path().to_string_lossy().into_owned();
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let o = run(&["sho", "spectrum", "--symbol", &symbol, "--modes", "64", "--out", name, "--out-dir", &out]);
        assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
        files.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    assert!(text.starts_with("index,eigenvalue\n"));
    assert_eq!(text.lines().count(), 1 + 128);
    assert!(dir.path().join("a.csv.manifest.json").exists());
}

#[test]
fn scatter_scan_rerun_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", r#"{"sites": [{"n": 0, "v": 2.0}, {"n": 3, "v": -1.0}]}"#);
    let out = dir.path().to_string_lossy().into_owned();
    let mut files = Vec::new();
    for name in ["s1.csv", "s2.csv"] {
        let o = run(&["scatter", "scan", "--model", &model, "--grid", "-1.9:1.9:0.1", "--out", name, "--out-dir", &out, "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        files.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert!(String::from_utf8_lossy(&files[0]).starts_with("lambda,t_re,t_im,r_re,r_im,sigma1_re"));
}

#[test]
fn config_range_error_exits_with_two_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"kind": "dtheta-run", "parameters": {"theta": {"jumps": [{"lambda": 2.5, "kappa": 1.0}], "base": "step", "limits": [0.0, 1.0]}}}"#,
    );
    let o = run(&["run", &cfg, "--out-dir", &dir.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parameters.theta.jumps[0].lambda"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_or_missing_file_is_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let o = run(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mehler_f1_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f1.json", r#"{"kind": "mehler-verify", "parameters": {"identity": "f1"}, "output": "f1.json"}"#);
    let o = run(&["run", &cfg, "--out-dir", &dir.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("f1.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["kind"], "mehler-verify");
    assert!(manifest["checks"][0]["value"].as_f64().unwrap() < 1e-6);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn small_dtheta_run_reports_band_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", r#"{"kind": "dtheta-run", "parameters": {"box": 256, "ladder": [128, 256]}}"#);
    let o = run(&["run", &cfg, "--out-dir", &dir.path().to_string_lossy()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let a1 = report["predicted_bands"]["entries"][0]["half_width"].as_f64().unwrap();
    assert!((a1 - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(report["predicted_bands"]["entries"].as_array().unwrap().len(), 1);
    assert_eq!(report["rungs"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("eig_box256.csv").exists());
}

#[test]
fn specfun_eval_prints_plain_decimals() {
    let o = run(&["specfun", "eval", "--fn", "zeta", "--args", "-1,1"]);
    assert_eq!(o.status.code(), Some(0));
    let vals: Vec<f64> = stdout(&o)
        .lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals[0], -vals[1]);
}

#[test]
fn reproduce_only_specfun_runs_one_family() {
    let o = run(&["reproduce", "--only", "specfun"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("criterion  3 PASS"));
    assert!(!out.contains("criterion  1 "));
}

#[test]
fn corrupted_golden_file_fails_the_named_criterion() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("golden.json"), "{\"conical\": [").unwrap();
    let o = bin()
        .args(["reproduce", "--only", "specfun"])
        .env("SHO_SPECTRA_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("criterion  3 FAIL"), "{out}");
    assert!(out.contains("golden"), "{out}");
}
