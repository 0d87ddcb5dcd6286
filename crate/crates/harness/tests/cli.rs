use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn urnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urnlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const FRIEDMAN: &str = r#"
model = "urn"
horizon = 10
replicates = 1
master_seed = 5
checkpoints = [1, 5, 10]

[generator]
kind = "deterministic"
matrix = [[0, 1], [1, 0]]
"#;

#[test]
fn simulate_writes_exact_totals_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "friedman.toml", FRIEDMAN);
    let out = dir.path().join("out");
    let status = urnlab(&["simulate", "--config", &config, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# urnlab "));
    assert!(summary.contains("# master_seed = 5"));
    assert!(summary.contains("# kind = \"deterministic\""));
    // S_10 / 10 = (2 + 10) / 10
    let row = summary.lines().find(|l| l.starts_with("urn,total_per_epoch,10,")).unwrap();
    let mean: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(mean * 10.0, 12.0);
    let replicates = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert!(replicates.lines().any(|l| l.ends_with(",total_per_epoch,10,1.2000000000000000e0")));
    for f in ["config.toml", "plot.csv"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = FRIEDMAN.replace("horizon = 10", "horizon = 2000").replace("replicates = 1", "replicates = 6").replace(
        "checkpoints = [1, 5, 10]",
        "checkpoints = [10, 100, 2000]",
    );
    let config = write_config(dir.path(), "c.toml", &body);
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "3", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        assert!(urnlab(&["simulate", "-c", &config, "-o", out.to_str().unwrap(), "-w", workers]).status.success());
        outputs.push(["summary.csv", "replicates.csv", "plot.csv"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_field = write_config(dir.path(), "bad.toml", &FRIEDMAN.replace("horizon = 10", "horizon = \"ten\""));
    let out = urnlab(&["simulate", "-c", &bad_field]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("horizon") && err.contains("line"), "{err}");

    let reducible = write_config(dir.path(), "red.toml", &FRIEDMAN.replace("[[0, 1], [1, 0]]", "[[1, 0], [0, 1]]"));
    assert_eq!(urnlab(&["simulate", "-c", &reducible]).status.code(), Some(3));

    let missing = dir.path().join("missing.toml");
    assert_eq!(urnlab(&["simulate", "-c", missing.to_str().unwrap()]).status.code(), Some(4));

    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let ok = write_config(dir.path(), "ok.toml", FRIEDMAN);
    let nested = blocker.join("out");
    assert_eq!(urnlab(&["simulate", "-c", &ok, "-o", nested.to_str().unwrap()]).status.code(), Some(4));

    assert_eq!(urnlab(&["simulate"]).status.code(), Some(2));
    assert_eq!(urnlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_subcommand() {
    let out = urnlab(&["analyze", "--matrix", "[[2,1],[1,2]]", "--format", "json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["lambda"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((report["pi"][0].as_f64().unwrap() - 0.5).abs() < 1e-9);

    let lax = urnlab(&["analyze", "--matrix", "[[1,0],[0,1]]"]);
    assert_eq!(lax.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lax.stdout).contains("not irreducible"));
    assert_eq!(urnlab(&["analyze", "--matrix", "[[1,0],[0,1]]", "--strict"]).status.code(), Some(3));

    let erw = urnlab(&["analyze", "--erw", "d=1", "a=1", "p=0.5", "q=0.5", "--format", "json"]);
    assert!(erw.status.success());
    let report: serde_json::Value = serde_json::from_slice(&erw.stdout).unwrap();
    assert!((report["lambda"].as_f64().unwrap() - 2.0).abs() < 1e-9);

    assert_eq!(urnlab(&["analyze", "--matrix", "[[1,2],[3]]"]).status.code(), Some(2));
}

#[test]
fn plot_data_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", FRIEDMAN);
    let out = dir.path().join("out");
    assert!(urnlab(&["simulate", "-c", &config, "-o", out.to_str().unwrap()]).status.success());
    let plot = dir.path().join("plot.csv");
    let status = urnlab(&["plot-data", "--summary", out.join("summary.csv").to_str().unwrap(), "--out", plot.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(&plot).unwrap();
    assert_eq!(text.lines().next().unwrap(), "model,series,n,mean,stderr,replicates,seed");
    assert_eq!(text, fs::read_to_string(out.join("plot.csv")).unwrap());
    let keys: Vec<(String, u64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn diagnose_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let body = FRIEDMAN.replace("horizon = 10", "horizon = 1000").replace("checkpoints = [1, 5, 10]", "checkpoints = [10, 1000]");
    let config = write_config(dir.path(), "c.toml", &body);
    let out = dir.path().join("diag");
    let status = urnlab(&["diagnose", "-c", &config, "-o", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(json["limit"]["irreducible"], true);
    assert_eq!(json["moment"]["flagged"], false);
    assert!(json["traces"].as_array().unwrap().iter().any(|t| t["series"] == "eta"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let config = urnlab_harness::config::ExperimentConfig::load(&path).unwrap();
        config.validate().unwrap();
        seen += 1;
    }
    assert!(seen >= 4);
}
