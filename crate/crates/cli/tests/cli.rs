//! The `kucbvi` binary driven as a subprocess.

use std::path::Path;
use std::process::{Command, Output};

fn kucbvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kucbvi")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let cfg = r#"
name = "tiny"
algorithms = ["kernel_ucbvi", "ucbvi"]
episodes = 30
horizon = 5
seeds = [1, 2]
beta = 0.01

[env]
kind = "discrete_grid"
size = 4
slip = 0.1
reward_noise_std = 0.1
goal = [1.0, 1.0]
reward_width = 0.2
start = [0.0, 0.0]

[bandwidth]
kind = "constant"
sigma = 0.2

[bonus]
kind = "practical"
variant = "discrete"
sigma_factor = 1.0
"#;
    let p = dir.join("tiny.toml");
    std::fs::write(&p, cfg).unwrap();
    p.to_string_lossy().into_owned()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") && !n.ends_with(".samples.csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_logs_and_replay_confirms_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let o = kucbvi(&["run", "--config", &cfg, "--out", out_s, "--parallel", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let logs = csv_files(&out);
    assert_eq!(logs.len(), 4, "{logs:?}");
    assert!(logs.iter().all(|n| n.starts_with("tiny-")));
    let header = std::fs::read_to_string(out.join(&logs[0])).unwrap();
    assert!(header.starts_with("run_id,seed,algo,env,k,episode_metric,cumulative_metric,sigma_k,wall_ms\n"));

    let o = kucbvi(&["replay", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("replay identical").count(), 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, par) in [(&a, "1"), (&b, "3")] {
        let o = kucbvi(&[
            "run",
            "--config",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
            "--parallel",
            par,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in csv_files(&a) {
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn preset_with_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = kucbvi(&[
        "run",
        "--preset",
        "bandit",
        "--out",
        out,
        "--seeds",
        "7",
        "--episodes",
        "50",
        "--no-samples",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let logs = csv_files(tmp.path());
    assert_eq!(logs.len(), 2);
    assert!(logs.iter().all(|n| n.ends_with("-s7.csv")), "{logs:?}");
    assert!(!std::fs::read_dir(tmp.path()).unwrap().any(|e| e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".samples.csv")));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("beta = 0.01", "beta = -0.5");
    std::fs::write(&cfg, text).unwrap();
    let o = kucbvi(&["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("beta"), "{}", stderr(&o));
    assert!(csv_files(tmp.path()).is_empty());
}

#[test]
fn usage_errors_exit_with_two() {
    let o = kucbvi(&["run", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kucbvi(&["run", "--preset", "nope", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"), "{}", stderr(&o));
}

#[test]
fn list_envs_shows_presets() {
    let o = kucbvi(&["list-envs"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in [
        "bandit",
        "grid8",
        "continuous",
        "continuous_optql",
        "lipschitz_bandit",
        "discrete_grid",
        "continuous_grid",
    ] {
        assert!(s.contains(name), "{name} missing from {s}");
    }
}

#[test]
fn verify_bounds_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kucbvi(&[
        "verify-bounds",
        "--trials",
        "300",
        "--t-max",
        "50",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("coverage.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["coverage"].as_array().unwrap().len(), 9);
}
