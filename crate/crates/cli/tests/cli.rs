use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dichotomy"))
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_scenario(name: &str, out: &Path) -> Output {
    let path = corpus().join(format!("{name}.json"));
    run(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn counterexample_scenario_is_bounded_and_not_dichotomic() {
    let dir = TempDir::new().unwrap();
    let o = run_scenario("02_arc_counterexample", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["classification"], "non_convergent_bounded");
    let t1 = r["verdicts"].as_array().unwrap().iter().find(|v| v["check"] == "theorem1_static").unwrap();
    assert_eq!(t1["holds"], false);
}

#[test]
fn primitive_inequality_reaches_consensus() {
    let dir = TempDir::new().unwrap();
    let o = run_scenario("01_primitive_inequality", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("01_primitive_inequality: consensus"));
    for f in ["trajectory.csv", "sorted.csv", "verdicts.json", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn balanced_signed_network_keeps_a_nonzero_modulus() {
    let dir = TempDir::new().unwrap();
    let o = run_scenario("08_signed_balanced", dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["classification"], "modulus_consensus");
    let limit = r["convergence"]["classification"]["limit"].as_f64().unwrap();
    // the gauge-transformed average of (2, 1, 0.5)
    assert!((limit - 3.5 / 3.0).abs() < 1e-8, "{limit}");
    assert!(dir.path().join("modulus.csv").exists());
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for name in ["06_monotone_product_bound", "12_projected_nedic"] {
        run_scenario(name, a.path());
        run_scenario(name, b.path());
        for entry in fs::read_dir(a.path()).unwrap() {
            let file = entry.unwrap().file_name();
            if file == "report.json" {
                continue;
            }
            assert_eq!(
                fs::read(a.path().join(&file)).unwrap(),
                fs::read(b.path().join(&file)).unwrap(),
                "{name}: {file:?} differs"
            );
        }
    }
}

#[test]
fn unmet_expectation_exits_one() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(corpus().join("01_primitive_inequality.json")).unwrap();
    let mut spec: Value = serde_json::from_str(&text).unwrap();
    spec["expect"] = Value::from("equilibrium");
    let path = dir.path().join("s.json");
    fs::write(&path, spec.to_string()).unwrap();
    let o = run(&["run", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn schema_errors_exit_two_with_the_field_path() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"name": "bad", "protocol": {"kind": "equality"}, "horizon": "ten"}"#).unwrap();
    let o = run(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn sweep_of_empty_dir_writes_header_only() {
    let (src, out) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let o = run(&["sweep", src.path().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("name,classification,checks_passed,checks_failed"));
}

#[test]
fn sweep_records_malformed_scenarios_as_error_rows() {
    let (src, out) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for name in ["01_primitive_inequality", "03_periodic_counterexample"] {
        fs::copy(corpus().join(format!("{name}.json")), src.path().join(format!("{name}.json"))).unwrap();
    }
    fs::write(src.path().join("00_broken.json"), "{ not json").unwrap();
    let o = run(&[
        "sweep",
        src.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("00_broken,error,"));
    assert!(rows[1].starts_with("01_primitive_inequality,consensus,2,0,true,"));
    assert!(rows[2].starts_with("03_periodic_counterexample,non_convergent_bounded,1,1,true,"));
}

#[test]
fn bundled_corpus_sweeps_clean() {
    let out = TempDir::new().unwrap();
    let o = run(&[
        "sweep",
        corpus().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--jobs",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    let n = fs::read_dir(corpus()).unwrap().count();
    assert_eq!(summary.lines().count(), n + 1);
}

#[test]
fn check_matrix_reports_classification() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("w.json");
    fs::write(&path, "[[0.0, 1.0], [0.5, 0.5]]").unwrap();
    let o = run(&["check-matrix", path.to_str().unwrap(), "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("dichotomic: true"));
    assert!(out.contains("consensus_dichotomic: true"));
    assert!(out.contains("primitivity_witness: 2"));
    assert!(out.contains("in_s_eps: false"));

    fs::write(&path, r#"{"rows": [[0.0, 1.0], [1.0, 0.0]]}"#).unwrap();
    let out = stdout(&run(&["check-matrix", path.to_str().unwrap()]));
    assert!(out.contains("dichotomic: false"));
    assert!(out.contains("primitivity_witness: none"));

    fs::write(&path, "[[0.5, 0.6], [0.5, 0.5]]").unwrap();
    assert_eq!(run(&["check-matrix", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn project_prints_the_projection() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("set.json");
    fs::write(&path, r#"{"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}"#).unwrap();
    let o = run(&["project", "--set", path.to_str().unwrap(), "--point", "3,4"]);
    assert_eq!(o.status.code(), Some(0));
    let coords: Vec<f64> = stdout(&o).trim().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(coords, vec![0.6, 0.8]);

    let o = run(&["project", "--set", path.to_str().unwrap(), "--point", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}
