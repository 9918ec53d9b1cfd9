use std::path::PathBuf;

use ammfg::{CliError, RunConfig};

fn reference_text() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    std::fs::read_to_string(path).unwrap()
}

fn parse_err(text: &str) -> CliError {
    RunConfig::parse(text).expect_err("configuration should be rejected")
}

#[test]
fn shipped_configs_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}

#[test]
fn reference_resolves_defaults() {
    let cfg = RunConfig::parse(&reference_text()).unwrap();
    assert_eq!(cfg.space.n_x, 401);
    assert_eq!(cfg.time.steps, 400);
    assert_eq!(cfg.fixed_point.seed, 3);
    assert_eq!(cfg.fixed_point.max_iter, 50);
    assert_eq!(cfg.game.n, 8);
    assert_eq!(cfg.n_list, vec![2, 8, 32, 128]);
}

#[test]
fn echo_is_a_fixed_point() {
    let cfg = RunConfig::parse(&reference_text()).unwrap();
    let once = cfg.echo();
    let twice = RunConfig::parse(&once).unwrap().echo();
    assert_eq!(once, twice);
}

#[test]
fn missing_key_is_named() {
    let text = reference_text().replace("k = 100.0\n", "");
    let err = parse_err(&text);
    assert!(err.to_string().contains("pool.k"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn inadmissible_control_reports_the_bound() {
    let text = reference_text()
        .replace("a_max = 1.0", "a_max = 4.0")
        .replace("horizon = 1.0\nsteps = 400", "horizon = 3.0\nsteps = 1200");
    let err = parse_err(&text);
    assert!(err.to_string().contains("4 ≥ (10\u{2212}1)/3 = 3"), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert_eq!(err.category(), "admissibility");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = reference_text().replace("sigma = 0.5", "sigma = 0.5\nvolatility = 2.0");
    let err = parse_err(&text);
    assert!(err.to_string().contains("volatility"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn syntax_errors_carry_a_line_number() {
    let text = reference_text().replace("n_x = 401", "n_x = = 401");
    let line = text.lines().position(|l| l.contains("= =")).unwrap() + 1;
    let err = parse_err(&text);
    assert!(err.to_string().starts_with(&format!("line {line}:")), "{err}");
}

#[test]
fn keys_of_another_family_are_rejected() {
    let text = reference_text().replace("sd = 1.0", "sd = 1.0\nc = 0.0");
    let err = parse_err(&text);
    assert!(err.to_string().contains("law0.c does not apply to family \"gaussian\""), "{err}");
}

#[test]
fn sweep_list_must_ascend() {
    let err = parse_err(&reference_text().replace("[2, 8, 32, 128]", "[8, 2]"));
    assert_eq!(err.exit_code(), 2);
    let err = parse_err(&reference_text().replace("[2, 8, 32, 128]", "[]"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn seed_override_reaches_every_stream() {
    let mut cfg = RunConfig::parse(&reference_text()).unwrap();
    cfg.override_seed(42).unwrap();
    assert_eq!(cfg.fixed_point.seed, 42);
    assert_eq!(cfg.game.seed, 42);
    assert!(cfg.override_seed(u64::MAX).is_err());
}
