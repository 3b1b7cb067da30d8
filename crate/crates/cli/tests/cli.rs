use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn zvlab(args: &[&str], out: &Path, workers: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_zvlab"));
    cmd.args(args).arg("--out").arg(out);
    match workers {
        Some(n) => cmd.env("ZVLAB_WORKERS", n.to_string()),
        None => cmd.env_remove("ZVLAB_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = zvlab(&["validate", config("ou_t1.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = zvlab(&["validate", config("expanding.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&bad), 1);
    let report = read_json(&dir.path().join("validation.json"));
    let failed: Vec<&serde_json::Value> =
        report["data"]["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| !c["inequality"].as_str().unwrap().is_empty()));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn malformed_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = zvlab(
        &["validate", config("ou_t1.toml").to_str().unwrap(), "--set", "harness.gaussian_tail.sizez=[1]"],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("harness.gaussian_tail") && err.contains("sizez"), "{err}");

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "seed = [\n").unwrap();
    let o = zvlab(&["validate", broken.to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn zero_drift_gives_zero_transform() {
    let dir = tempfile::tempdir().unwrap();
    let o = zvlab(&["zvonkin", config("zero_drift.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let u = read_json(&dir.path().join("u.json"));
    assert!(u["data"]["values"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
    let phi = read_json(&dir.path().join("homeomorphism.json"));
    assert_eq!(phi["data"]["grad_bound"].as_f64(), Some(0.0));
    assert!(dir.path().join("contraction.csv").exists());
}

#[test]
fn dini_benchmark_auto_lambda_and_forced_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = zvlab(&["zvonkin", config("dini_benchmark.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let phi = read_json(&dir.path().join("homeomorphism.json"));
    assert!(phi["data"]["grad_bound"].as_f64().unwrap() < 0.5);
    let sweep = std::fs::read_to_string(dir.path().join("lambda_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 5);

    let forced = tempfile::tempdir().unwrap();
    let o = zvlab(
        &["zvonkin", config("dini_benchmark.toml").to_str().unwrap(), "--set", "pipeline.lambda=0.01"],
        forced.path(),
        None,
    );
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("0.01"), "{err}");
    let trace = std::fs::read_to_string(forced.path().join("lambda_trace.csv")).unwrap();
    assert!(trace.lines().nth(1).unwrap().contains("0.01"));
}

#[test]
fn invariance_only_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = zvlab(&["invariance", config("invariance.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("1000 trials, 0 failures"), "{out}");
    assert!(!dir.path().join("counterexamples.json").exists());
}

#[test]
fn t2_config_reports_three_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let o = zvlab(&["tci", config("ou_t2.toml").to_str().unwrap(), "--set", "harness.t2.n_paths=128"], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&dir.path().join("tci_report.json"));
    assert_eq!(report["data"]["t2"]["rows"].as_array().unwrap().len(), 3);
    assert!(report["data"]["constants"]["c2_hat"].as_f64().unwrap() > 0.0);
    let t2 = std::fs::read_to_string(dir.path().join("t2.csv")).unwrap();
    assert_eq!(t2.lines().count(), 4);
}

fn small_t1(out: &Path, workers: usize) -> Output {
    zvlab(
        &[
            "tci",
            config("ou_t1.toml").to_str().unwrap(),
            "--set",
            "harness.gaussian_tail.sizes=[1000, 4000, 16000]",
            "--set",
            "harness.exp_functional.n_paths=2000",
            "--set",
            "harness.coupling.n_pairs=100",
        ],
        out,
        Some(workers),
    )
}

#[test]
fn t1_config_outputs_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = small_t1(a.path(), 1);
    let ob = small_t1(b.path(), 8);
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stdout));
    assert_eq!(code(&ob), 0);
    assert_eq!(oa.stdout, ob.stdout);

    let report = read_json(&a.path().join("tci_report.json"));
    assert_eq!(report["data"]["thresholds"]["delta_max"].as_f64(), Some(0.0625));
    assert_eq!(report["data"]["constants"]["t1"]["delta"].as_f64(), Some(0.05));
    assert_eq!(report["data"]["constants"]["t1"]["original"].as_f64(), Some(20.0));
    let stdout = String::from_utf8_lossy(&oa.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS threshold.delta")));

    let hash = report["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        let bytes = std::fs::read(&path).unwrap();
        let other = std::fs::read(b.path().join(path.file_name().unwrap())).unwrap();
        assert_eq!(bytes, other, "{} differs between worker counts", path.display());
        let text = String::from_utf8(bytes).unwrap();
        if path.extension().unwrap() == "json" {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["config_hash"].as_str(), Some(hash.as_str()));
            assert_eq!(v["seed"].as_u64(), Some(2024));
        } else {
            let mut rows = text.lines();
            assert!(rows.next().unwrap().starts_with("config_hash,seed"));
            assert!(rows.all(|r| r.starts_with(&format!("{hash},2024,"))), "{}", path.display());
        }
    }
}

#[test]
fn simulate_writes_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = zvlab(
        &["simulate", config("ou_t1.toml").to_str().unwrap(), "--set", "simulate.n_paths=3", "--set", "simulate.steps=8"],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), 0);
    let paths = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 1 + 3 * 9);
    assert!(paths.lines().next().unwrap().ends_with("path,step,t,x0"));
}

#[test]
fn invalid_worker_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_zvlab"))
        .args(["invariance", config("invariance.toml").to_str().unwrap()])
        .arg("--out")
        .arg(dir.path())
        .env("ZVLAB_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
