use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[pool]
k = 100.0
x0 = 10.0
eps0 = 1.0
sigma0 = 0.1

[control]
a_min = -1.0
a_max = 1.0

[cost]
family = "quadratic"
phi_h = 0.1
phi_l = 1.0

[noise]
sigma = 0.5

[time]
horizon = 1.0
steps = 50

[grid]
x_lo = -4.0
x_hi = 4.0
n_x = 41

[law0]
family = "gaussian"
mean = 0.0
sd = 1.0

[mfg]
particles = 2000
seed = 1

[game]
n = 4
n_paths = 200
seed = 2

[sweep]
n_list = [2, 4]
"#;

fn ammfg(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ammfg"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("AMMFG_THREADS")
        .output()
        .unwrap()
}

fn setup(text: &str) -> (TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, text).unwrap();
    (dir, cfg)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

#[test]
fn validate_writes_only_the_manifest() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    let run = ammfg(&["validate"], &cfg, &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(listing(&out), ["manifest.json"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "validate");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["seeds"]["mfg"], 1);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let (dir, cfg) = setup(SMALL);
    let run = ammfg(&["solve"], &cfg, &dir.path().join("out"));
    assert!(!run.status.success());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn mfg_flow_has_one_row_per_iteration_and_node() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    let run = ammfg(&["mfg"], &cfg, &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(listing(&out), ["manifest.json", "mfg_flow.csv", "mfg_summary.csv"]);
    let summary = std::fs::read_to_string(out.join("mfg_summary.csv")).unwrap();
    let iterations = summary.lines().count() - 1;
    assert!(iterations >= 1);
    let flow = std::fs::read_to_string(out.join("mfg_flow.csv")).unwrap();
    assert_eq!(flow.lines().count(), 1 + iterations * 51);
    let last: Vec<&str> = summary.lines().last().unwrap().split(',').collect();
    assert!(!last[2].is_empty());
}

#[test]
fn failed_runs_leave_no_files() {
    // dx = 0.02 with 10 steps breaks the explicit scheme's stability bound
    let text = SMALL.replace("steps = 50", "steps = 10").replace("n_x = 41", "n_x = 401");
    let (dir, cfg) = setup(&text);
    let out = dir.path().join("out");
    let run = ammfg(&["hjb"], &cfg, &out);
    assert_eq!(run.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&run.stderr).starts_with("error[numerical]"));
    assert!(listing(&out).is_empty());
    assert_eq!(listing(dir.path()), ["run.toml"]);
}

#[test]
fn configuration_errors_exit_with_two() {
    let (dir, cfg) = setup(&SMALL.replace("k = 100.0\n", ""));
    let run = ammfg(&["validate"], &cfg, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("pool.k"));
}

#[test]
fn inadmissible_configurations_exit_with_three() {
    let (dir, cfg) = setup(&SMALL.replace("a_max = 1.0", "a_max = 9.5"));
    let run = ammfg(&["validate"], &cfg, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let (dir, cfg) = setup(SMALL);
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ammfg"))
            .args(["game", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("AMMFG_THREADS", threads)
            .output()
            .unwrap();
        (status, out)
    };
    let (ok, out) = run("2", "two");
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let (bad, _) = run("0", "zero");
    assert_eq!(bad.status.code(), Some(2));
    let (one, out1) = run("1", "one");
    assert!(one.status.success());
    let a = std::fs::read(out.join("game_summary.csv")).unwrap();
    let b = std::fs::read(out1.join("game_summary.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_flag_overrides_the_file() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    let run = Command::new(env!("CARGO_BIN_EXE_ammfg"))
        .args(["validate", "--seed", "77", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["mfg"], 77);
    assert_eq!(manifest["seeds"]["game"], 77);
}
