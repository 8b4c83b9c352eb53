use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sncv_core::dataset::ClassScheme;
use sncv_core::synth::GraderPool;
use tempfile::TempDir;

fn sncv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sncv")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = sncv(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small generated world in `dir/data`, optionally with a custom pool.
fn gen(dir: &Path, seed: &str, pool: Option<&Path>) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["gen", "--seed", seed, "--n", "1200", "--tune-n", "400", "--test-n", "400", "--out", s(&data)];
    if let Some(p) = pool {
        args.extend(["--pool", s(p)]);
    }
    ok(&args);
    data
}

fn pipeline(data: &Path, out: &Path) {
    ok(&[
        "pipeline",
        "--seed",
        "3",
        "--max-epochs",
        "10",
        "--dataset",
        s(&data.join("train.csv")),
        "--tune",
        s(&data.join("tune.csv")),
        "--out",
        s(out),
    ]);
}

#[test]
fn gen_is_reproducible_from_the_seed() {
    let tmp = TempDir::new().unwrap();
    let a = gen(&tmp.path().join("a"), "7", None);
    let b = gen(&tmp.path().join("b"), "7", None);
    for f in ["population.csv", "train.csv", "tune.csv", "test.csv", "truth.csv", "pool.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = gen(&tmp.path().join("c"), "8", None);
    assert_ne!(fs::read(a.join("train.csv")).unwrap(), fs::read(c.join("train.csv")).unwrap());
}

#[test]
fn missing_input_exits_with_code_two_and_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere").join("scheme.json");
    let out = sncv(&["gen", "--seed", "1", "--scheme", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(sncv(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn noiseless_graders_are_not_flagged_and_default_threshold_is_030() {
    let tmp = TempDir::new().unwrap();
    let pool = tmp.path().join("pool.json");
    fs::write(&pool, GraderPool::noiseless(&ClassScheme::gsr()).to_json().unwrap()).unwrap();
    let data = gen(tmp.path(), "5", Some(&pool));
    let run = tmp.path().join("run");
    pipeline(&data, &run);

    let scored = run.join("scored.csv");
    let default = tmp.path().join("default");
    let explicit = tmp.path().join("explicit");
    ok(&["graders", "--scored", s(&scored), "--pool", s(&pool), "--out", s(&default)]);
    ok(&[
        "graders",
        "--scored",
        s(&scored),
        "--pool",
        s(&pool),
        "--mismatch-threshold",
        "0.3",
        "--out",
        s(&explicit),
    ]);
    let csv = fs::read_to_string(default.join("graders.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",false")), "{csv}");
    for f in ["graders.csv", "roles.csv"] {
        assert_eq!(fs::read(default.join(f)).unwrap(), fs::read(explicit.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn burden_on_the_whole_set_has_no_subsample_gap() {
    let tmp = TempDir::new().unwrap();
    let data = gen(tmp.path(), "9", None);
    let out = tmp.path().join("burden");
    ok(&[
        "burden",
        "--seed",
        "4",
        "--fraction",
        "1.0",
        "--max-epochs",
        "8",
        "--n-boot",
        "100",
        "--dataset",
        s(&data.join("train.csv")),
        "--tune",
        s(&data.join("tune.csv")),
        "--test",
        s(&data.join("test.csv")),
        "--out",
        s(&out),
    ]);
    let csv = fs::read_to_string(out.join("burden_tests.csv")).unwrap();
    let row = csv
        .lines()
        .find(|l| l.starts_with("subsample,full,two-tailed,"))
        .unwrap_or_else(|| panic!("{csv}"));
    let delta: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert_eq!(delta, 0.0);
}

#[test]
fn readme_config_example_parses() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let cfg = sncv_cli::config::RunConfig::from_toml(block).unwrap();
    assert_eq!(cfg.seed, Some(1));
    assert_eq!(cfg.hyperparams, sncv_core::Hyperparams::default());
}
