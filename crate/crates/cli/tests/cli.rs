use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nmfbandit"));
    c.env_remove("NMFBANDIT_THREADS");
    c
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let cfg = r#"{
        "instance": {"source": "simple", "l": 12, "k": 6, "m": 2, "corrupt_frac": 0.0, "seed": 3},
        "T": 50,
        "seeds": [1, 2],
        "nmf": {"m": 2, "m_prime": 1, "theta": 0.05, "anchor_method": "spa"},
        "sweep": {"thetas": [0.05, 1.0], "m_primes": [1]}
    }"#;
    let p = dir.join("cfg.json");
    fs::write(&p, cfg).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn print_config_is_valid_json_with_defaults() {
    let out = run(&["run", "--print-config", "--T", "7"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["T"], 7);
    assert_eq!(v["setting"], "S1");
    assert!(v["nmf"]["theta"].is_number());
}

#[test]
fn run_writes_traces_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["nmf_bandit", "ucb1", "thompson"] {
        for seed in [1, 2] {
            let f = format!("traces/{name}_seed{seed}.csv");
            let ta = fs::read(a.join(&f)).unwrap();
            assert_eq!(ta, fs::read(b.join(&f)).unwrap());
            assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 51);
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["policies"]["ucb1"]["runs"].as_array().unwrap().len(), 2);

    let o = run(&["summarize", "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    let again: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(
        again["policies"]["thompson"]["mean_final_regret"],
        summary["policies"]["thompson"]["mean_final_regret"]
    );
}

#[test]
fn seed_and_policy_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("o");
    let o = run(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--seed", "9", "--policy", "ucb1", "--T", "5", "--threads", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(out.join("traces"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["ucb1_seed9.csv"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "--T", "0"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--policy", "greedy"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let small = dir.path().join("small.json");
    fs::write(
        &small,
        r#"{"instance": {"source": "simple", "l": 11, "k": 6, "m": 2, "corrupt_frac": 0.0, "seed": 0},
            "nmf": {"m": 2, "m_prime": 2}, "policies": ["nmf_bandit"], "T": 5}"#,
    )
    .unwrap();
    let o = run(&["run", "--config", small.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("L >= 2 * 3 * m' = 12"));
}

#[test]
fn generate_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let matrix = dir.path().join("instance.csv");
    assert!(dir.path().join("instance.meta.json").is_file());
    let file_cfg = dir.path().join("file.json");
    fs::write(
        &file_cfg,
        format!(
            r#"{{"instance": {{"source": "file", "path": {:?}}}, "reward_model": null,
                "policies": ["ucb1"], "T": 20, "seeds": [0]}}"#,
            matrix
        ),
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&["run", "--config", file_cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // No ground-truth factors for file instances.
    let o = run(&["check-rip", "--config", file_cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_rip_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["check-rip", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rip.json")).unwrap()).unwrap();
    assert_eq!(report["trials"], 200);
    assert!(report["l1_w"]["failure_frequency"].as_f64().unwrap() <= 1.0);
}

#[test]
fn sweep_labels_each_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let keys: Vec<&str> = v["policies"].as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(
        keys,
        ["nmf_bandit_theta0.05_mprime1", "nmf_bandit_theta1_mprime1", "thompson", "ucb1"]
    );
}
