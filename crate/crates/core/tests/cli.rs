use std::path::Path;
use std::process::Command;

use ncclab::config::{Experiment, ExperimentConfig, Format};
use proptest::prelude::*;

fn ncclab(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ncclab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NCCLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_round_trips(
        nu in 2usize..200, delta in 0.0f64..0.99, lo in 0.5f64..0.75, seed in any::<u64>(), trials in 1usize..5000,
        json in any::<bool>(),
    ) {
        let mut cfg = ExperimentConfig::new(Experiment::Sample);
        cfg.params.nu = nu;
        cfg.params.delta = delta;
        cfg.params.xi_window = [lo, 1.0];
        cfg.params.seed = seed;
        cfg.params.trials = trials;
        cfg.format = if json { Format::Json } else { Format::Csv };
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn minimal_config_takes_defaults() {
    let cfg = ExperimentConfig::from_json(r#"{"experiment": "growth"}"#).unwrap();
    assert_eq!(cfg, ExperimentConfig::new(Experiment::Growth));
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        r#"{"experiment": "growth", "colour": 1}"#,
        r#"{"experiment": "growth", "params": {"nu_lst": [8]}}"#,
        r#"{"experiment": "growth", "params": {"tol": -1e-10}}"#,
        r#"{"experiment": "sample", "params": {"delta": 1.0}}"#,
        r#"{"experiment": "sample", "params": {"xi_window": [0.25, 1.0]}}"#,
        r#"{"experiment": "sample", "params": {"sample": {"spacing_factor": 0.5}}}"#,
        r#"{"experiment": "nonsense"}"#,
    ] {
        assert!(ExperimentConfig::from_json(bad).is_err(), "accepted {bad}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(ncclab(&["figure2", "--format", "csv"], &out).status.code(), Some(0));
    assert_eq!(ncclab(&["figure3"], &out).status.code(), Some(2));
    assert_eq!(ncclab(&["sample", "--threads", "zero"], &out).status.code(), Some(2));

    let negative = write_config(dir.path(), r#"{"experiment": "sample", "params": {"tol": -1.0}}"#);
    assert_eq!(ncclab(&["sample", "--config", &negative], &out).status.code(), Some(2));
    let unknown = write_config(dir.path(), r#"{"experiment": "sample", "extra": true}"#);
    assert_eq!(ncclab(&["sample", "--config", &unknown], &out).status.code(), Some(2));
    let other = write_config(dir.path(), r#"{"experiment": "growth"}"#);
    assert_eq!(ncclab(&["sample", "--config", &other], &out).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(ncclab(&["sample", "--config", missing.to_str().unwrap()], &out).status.code(), Some(2));
}

#[test]
fn figure2_trace_is_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncclab(&["figure2"], dir.path());
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("figure2_trace.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["eta", "re_value", "im_value", "unwrapped_arg"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 10);
    assert_eq!(rows[0][0], 100.0);
    assert_eq!(rows.last().unwrap()[0], 0.0);
    assert!(rows.windows(2).all(|w| w[1][0] < w[0][0]));
    assert!(rows.iter().all(|r| (r[1] * r[1] + r[2] * r[2]).sqrt() >= 1.0 - 1e-6));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("figure2_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"].as_u64().unwrap() as usize, rows.len());
}

#[test]
fn zero_delta_sample_writes_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "sample", "params": {"nu": 8, "delta": 0.0}}"#);
    let o = ncclab(&["sample", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sample_summary.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "value").unwrap();
    let values: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(values, vec![0.0; 4]);
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let runs: Vec<Vec<u8>> = ["1", "2"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = write_config(dir.path(), r#"{"experiment": "sample", "params": {"nu": 8, "delta": 0.5}}"#);
            let o = ncclab(&["sample", "--config", &cfg, "--threads", threads], dir.path());
            assert!(o.status.success());
            std::fs::read(dir.path().join("sample_report.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}
