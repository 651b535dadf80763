use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use xychain::table::Table;

fn xychain(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xychain"))
        .args(args)
        .current_dir(dir)
        .env_remove("XYCHAIN_OUTPUT_DIR")
        .env_remove("XYCHAIN_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file of an output directory, sorted by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const QUICK_TWO_ATOM: [&str; 6] = [
    "--set",
    "two_atom_exchange.n_realizations=3",
    "--set",
    "two_atom_exchange.taus.max=3",
    "--set",
    "two_atom_exchange.taus.step=0.1",
];

#[test]
fn catalog_is_sorted_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let o = xychain(&["list-scenarios", "--json"], tmp.path());
    assert_eq!(code(&o), 0);
    let catalog: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = catalog.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for want in ["two-atom-exchange", "distance-scan", "three-chain", "temperature-ablation", "long-chain", "calibrate-epsilon"] {
        assert!(names.contains(&want), "{want}");
    }
    assert!(catalog.as_array().unwrap().iter().all(|e| !e["figure"].as_str().unwrap().is_empty()));
}

#[test]
fn ideal_three_chain_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let o = xychain(&["run", "three-chain", "--ideal", "--range", "full", "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out");
    let text = fs::read_to_string(out.join("populations.csv")).unwrap();
    assert!(text.starts_with("tau_us,P_udd,P_dud,P_ddu\n"));
    let table = Table::read_csv(text.as_bytes()).unwrap();
    table.require_time_series().unwrap();
    assert_eq!(table.index.len(), 141);
    for f in ["summary.json", "resolved_config.toml", "provenance.json", "envelope.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["scenario"], "three-chain");
    assert_eq!(summary["eigenvalues_mhz"].as_array().unwrap().len(), 3);
}

#[test]
fn distance_scan_reports_the_power_law() {
    let tmp = tempfile::tempdir().unwrap();
    let o = xychain(&["run", "distance-scan", "--out", "scan"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&tmp.path().join("scan/summary.json"));
    let exponent = s["power_law"]["exponent"].as_f64().unwrap();
    let prefactor = s["fixed_exponent"]["prefactor"].as_f64().unwrap();
    assert!((exponent + 3.0).abs() < 0.005, "{exponent}");
    assert!((prefactor / 7965.0 - 1.0).abs() < 0.005, "{prefactor}");
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "seed = 3\n[three_chain]\nspcing = 20.0\n").unwrap();
    let o = xychain(&["run", "three-chain", "--config", "bad.toml", "--out", "never"], tmp.path());
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("spcing"), "{err}");
    assert!(!tmp.path().join("never").exists());

    fs::write(tmp.path().join("syntax.toml"), "seed = = 3\n").unwrap();
    let o = xychain(&["validate-config", "syntax.toml", "--scenario", "three-chain"], tmp.path());
    assert_eq!(code(&o), 2);

    let o = xychain(&["run", "no-such-scenario", "--out", "never"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = xychain(&["run", "calibrate-epsilon", "--ideal", "--out", "never"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = xychain(&["run", "three-chain", "--set", "three_chain.spacing=-1", "--out", "never"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("never").exists());
}

#[test]
fn valid_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("ok.toml"),
        "# three atoms\nscenario = \"three-chain\"\nseed = 7\n[three_chain]\nideal = true\ntaus = { max = 3.0, step = 0.1 }\n",
    )
    .unwrap();
    let o = xychain(&["validate-config", "ok.toml"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn failed_fit_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = xychain(
        &["run", "two-atom-exchange", "--ideal", "--set", "two_atom_exchange.taus.max=1", "--out", "never"],
        tmp.path(),
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!tmp.path().join("never").exists());
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("file"), "").unwrap();
    let o = xychain(&["run", "calibrate-epsilon", "--out", "file/sub"], tmp.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn provenance_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "two-atom-exchange", "--seed", "11", "--out", "first"];
    args.extend(QUICK_TWO_ATOM);
    let o = xychain(&args, tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let prov = read_json(&tmp.path().join("first/provenance.json"));
    assert_eq!(prov["seed"], 11);
    fs::write(tmp.path().join("again.toml"), prov["resolved_config"].as_str().unwrap()).unwrap();

    let o = xychain(&["run", "two-atom-exchange", "--config", "again.toml", "--out", "second"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = snapshot(&tmp.path().join("first"));
    let b = snapshot(&tmp.path().join("second"));
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        if name_a != "provenance.json" {
            assert!(bytes_a == bytes_b, "{name_a} differs");
        }
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for workers in ["1", "3"] {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_xychain"));
        cmd.args(["run", "two-atom-exchange"]).args(QUICK_TWO_ATOM).current_dir(tmp.path());
        cmd.env("XYCHAIN_WORKERS", workers).env("XYCHAIN_OUTPUT_DIR", format!("w{workers}"));
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        runs.push(snapshot(&tmp.path().join(format!("w{workers}"))));
    }
    assert_eq!(runs[0], runs[1]);
}
