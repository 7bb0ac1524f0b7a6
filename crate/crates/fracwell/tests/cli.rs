//! End-to-end runs of the `fracwell` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
name = "small"
seed = 3

[kernel]
type = "power"
p = 2.0
s = 0.4

[source]
type = "single-power"
q = 3.0

[mesh]
nodes = 8

[integrator]
t_end = 2.0

[initial]
type = "fiber"
direction = "sin(pi*x)"
factor = 0.5
"#;

fn fracwell(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwell"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn presets_reach_their_expected_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    for (preset, status, region) in [("S1", "vanished", "w"), ("S2", "blown-up", "v")] {
        let out = dir.path().join(preset);
        let o = fracwell(&["run", "--preset", preset], &out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let run = json(&out.join("run.json"));
        assert_eq!(run["schema_version"], 1);
        assert_eq!(run["kind"], "run");
        assert_eq!(run["status"], status);
        assert_eq!(run["classification"]["region"], region);
        for f in ["trajectory.csv", "final_state.csv", "initial_state.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
    }
    let s2 = json(&dir.path().join("S2").join("run.json"));
    assert_eq!(s2["analysis"]["bound_flags"]["blowup_bound_respected"], true);

    let out = dir.path().join("S4");
    assert_eq!(fracwell(&["run", "--preset", "S4"], &out).status.code(), Some(0));
    let run = json(&out.join("run.json"));
    assert_eq!(run["status"], "blown-up");
    assert!(run["classification"]["nehari"].as_f64().unwrap() < 0.0);
    assert_eq!(run["analysis"]["bound_flags"]["high_energy_inequality"], true);
}

#[test]
fn check_family_reports_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracwell(&["check-family", "--preset", "variable-exponent"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("conditions.json"));
    assert_eq!(doc["all_required_pass"], true);

    let bad = SMALL.replace("q = 3.0", "q = 12.0");
    let cfg = write_config(dir.path(), &bad);
    let out = dir.path().join("bad");
    let o = fracwell(&["check-family", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(1));
    let doc = json(&out.join("conditions.json"));
    assert_eq!(doc["all_required_pass"], false);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = SMALL.replace("nodes = 8", "nodes = 8\nbogus = 1");
    let cfg = write_config(dir.path(), &unknown);
    assert_eq!(fracwell(&["classify", "--config", &cfg], dir.path()).status.code(), Some(2));
    assert_eq!(fracwell(&["classify", "--preset", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(fracwell(&["classify"], dir.path()).status.code(), Some(2));
    let cfg = write_config(dir.path(), &SMALL.replace("nodes = 8", "nodes = 2"));
    assert_eq!(fracwell(&["classify", "--config", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn classify_and_depth_curve_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(fracwell(&["classify", "--config", &cfg], &out).status.code(), Some(0));
    let doc = json(&out.join("classify.json"));
    assert_eq!(doc["report"]["region"], "w");
    assert!(doc["report"]["energy"].as_f64().unwrap() < doc["report"]["d_hat"].as_f64().unwrap());

    assert_eq!(fracwell(&["depth-curve", "--config", &cfg], &out).status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("depth_curve.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("delta"));
    assert!(csv.lines().count() > 5);
}

#[test]
fn runs_are_reproducible_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(fracwell(&["run", "--config", &cfg], &a).status.code(), Some(0));
    assert_eq!(fracwell(&["run", "--config", &cfg], &b).status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("trajectory.csv")).unwrap(), std::fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn sweep_and_report_cover_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\nparameter = \"initial.factor\"\nvalues = [0.3, 0.6]\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("sweep");
    let o = fracwell(&["sweep", "--config", &cfg, "--threads", "1"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let index = json(&out.join("index.json"));
    let runs = index["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for r in runs {
        assert_eq!(r["exit_code"], 0);
        assert!(out.join(r["dir"].as_str().unwrap()).join("run.json").exists());
    }

    let o = fracwell(&["report"], &out);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("sweep-index"));
    assert_eq!(text.matches("run [small]").count(), 2);
}

#[test]
fn matrices_are_dumped_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("t_end = 2.0", "t_end = 0.01"));
    let out = dir.path().join("m");
    assert_eq!(fracwell(&["run", "--config", &cfg, "--dump-matrices"], &out).status.code(), Some(0));
    for f in ["stiffness.csv", "jacobian.csv", "mass.csv"] {
        let rows = std::fs::read_to_string(out.join(f)).unwrap().lines().count();
        assert!(rows >= 8, "{f} has {rows} rows");
    }
}
