use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsf")).args(args).env("RUST_LOG", "warn").output().expect("spawn dsf")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn chain_config(gamma: f64, m: usize) -> Value {
    json!({
        "model": { "kind": "mass_spring_damper_chain", "agents": 3, "gamma": gamma },
        "seed": 5,
        "partition": { "m": m },
        "policy": { "kind": "adversarial-outward" },
        "horizon": 300,
        "episodes": 2,
        "compare": { "pairs": 20 },
        "family": "out/family.json"
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn synthesize_simulate_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &chain_config(0.2, 3));
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    let s = dsf(&["synthesize", "--config", c, "--out", o, "--workers", "2"]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let family = read_json(&out.join("family.json"));
    assert!(!family["family"]["regions"].as_array().unwrap().is_empty());
    let hash = family["provenance"]["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(family["provenance"]["partition_seed"], 5);
    assert!(out.join("synthesis_log.json").exists());

    let s = dsf(&["simulate", "--config", c, "--out", o]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["episodes"].as_array().unwrap().len(), 2);
    assert_eq!(summary["provenance"]["config_hash"], hash.as_str());
    let csv = std::fs::read_to_string(out.join("episode_0000.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with(&format!("# config_hash={hash}")));
    assert!(lines.next().unwrap().starts_with("k,agent,x_0,x_1,u_learning_0,u_applied_0,intervened,set_index,max_residual"));

    let s = dsf(&["compare", "--config", c, "--out", o]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let cmp = read_json(&out.join("comparison.json"));
    assert_eq!(cmp["injection_violations"], 0);
    assert!(cmp["explicit_magnitudes"].is_object() && cmp["implicit_magnitudes"].is_object());
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &chain_config(0.2, 2));
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let s = dsf(&["synthesize", "--config", c, "--out", out.to_str().unwrap(), "--workers", workers]);
        assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    }
    assert_eq!(std::fs::read(a.join("family.json")).unwrap(), std::fs::read(b.join("family.json")).unwrap());
}

#[test]
fn single_set_family_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &chain_config(0.2, 1));
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(code(&dsf(&["partition", "--config", c, "--out", o])), 0);
    assert_eq!(read_json(&out.join("partition.json"))["regions"], 1);
    assert_eq!(code(&dsf(&["synthesize", "--config", c, "--out", o, "--objective", "max-trace"])), 0);
    assert_eq!(read_json(&out.join("family.json"))["family"]["regions"].as_array().unwrap().len(), 1);
}

#[test]
fn fingerprint_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &chain_config(0.2, 2));
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(code(&dsf(&["synthesize", "--config", c, "--out", o])), 0);
    let other = write_config(dir.path(), "d.json", &chain_config(0.1, 2));
    let s = dsf(&["simulate", "--config", other.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&s), 1);
    assert!(String::from_utf8_lossy(&s.stderr).contains("fingerprint"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out");
    let o = o.to_str().unwrap();

    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{ \"model\": ").unwrap();
    assert_eq!(code(&dsf(&["synthesize", "--config", p.to_str().unwrap(), "--out", o])), 2);

    let mut cfg = chain_config(0.2, 2);
    cfg["horizn"] = json!(10);
    let p = write_config(dir.path(), "typo.json", &cfg);
    let s = dsf(&["simulate", "--config", p.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&s), 2);
    assert!(String::from_utf8_lossy(&s.stderr).contains("horizn"));

    let mut cfg = chain_config(0.2, 2);
    cfg["compare"]["pairs"] = json!(0);
    let p = write_config(dir.path(), "zero.json", &cfg);
    let s = dsf(&["compare", "--config", p.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&s), 2);
    assert!(String::from_utf8_lossy(&s.stderr).contains("compare.pairs"));

    let p = write_config(dir.path(), "nofam.json", &chain_config(0.2, 2));
    assert_eq!(code(&dsf(&["simulate", "--config", p.to_str().unwrap(), "--out", o])), 2);

    assert_eq!(code(&dsf(&["coverage", "--config", "/nonexistent.json", "--out", o])), 2);
}

#[test]
fn coverage_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = chain_config(0.2, 2);
    cfg["coverage"] = json!({ "m_list": [2], "gamma_list": [0.2], "partitions_per_cell": 2, "samples": 500 });
    let p = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("out");
    let s = dsf(&["coverage", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let csv = std::fs::read_to_string(out.join("coverage.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[1].starts_with("M,gamma,partition_id"));
    assert_eq!(lines.len(), 4);
    let json = read_json(&out.join("coverage.json"));
    let mean = json["cells"][0]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));
}
