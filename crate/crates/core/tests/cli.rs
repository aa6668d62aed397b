use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memlab::harness::{ClassifierKind, ExperimentConfig, CURVE_CSV_HEADER};

fn memlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memlab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn memlab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk_logit();
    cfg.trials = 2;
    cfg.out = dir.join("out");
    cfg
}

#[test]
fn unknown_suite_is_usage_error() {
    let o = memlab(&["verify", "nope"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown suite"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(code(&memlab(&["frobnicate"])), 2);
}

#[test]
fn verify_prints_checks_and_succeeds() {
    let o = memlab(&["verify", "prob"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("PASS prob/")));
    assert!(out.contains("0 failed"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    for (text, line) in [
        ("[experiment]\nn = 100\nd = = 3\n", "line 3"),
        ("[experiment]\nn = 100\n\n[train]\nwarp = 9\n", "line 5"),
        ("[experiment]\ntrials = -1\n", "line 2"),
    ] {
        std::fs::write(&path, text).unwrap();
        let o = memlab(&["--config", path.to_str().unwrap(), "generate"]);
        assert_eq!(code(&o), 2, "{text:?}");
        assert!(stderr(&o).contains(line), "{text:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_config_is_usage_error() {
    assert_eq!(code(&memlab(&["--config", "/nonexistent/x.toml", "train"])), 2);
}

#[test]
fn shipped_configs_parse() {
    let dir = repo_root().join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
    assert_eq!(
        ExperimentConfig::load(&dir.join("paper_logit.toml")).unwrap(),
        ExperimentConfig {
            out: "results/paper_logit".into(),
            ..ExperimentConfig::paper_logit()
        }
    );
}

#[test]
fn bounds_sweep_matches_fixture() {
    let sweep = repo_root().join("configs/bounds_sweep.txt");
    let o = memlab(&["bounds", sweep.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out, include_str!("fixtures/bounds_sweep.csv"));
    assert!(out.contains("nsp_oneshot,d=1000;delta=0;eps=0,500.5,"));
    assert!(out.contains("dp_info,alpha=0;beta=0;n=500;d=1000,0,"));
}

#[test]
fn bounds_parse_error_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.txt");
    std::fs::write(&path, "fano k=2 err=0.1\n\nfano k=2 err=oops\n").unwrap();
    let o = memlab(&["bounds", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn zero_trials_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.trials = 0;
    let c = write_config(dir.path(), &cfg);
    let o = memlab(&["--config", &c, "generate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let files = std::fs::read_dir(&cfg.out).map(|d| d.count()).unwrap_or(0);
    assert_eq!(files, 0);
}

#[test]
fn desk_logit_errors_reproduce_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let c = write_config(dir.path(), &cfg);
    for cmd in ["generate", "train"] {
        let o = memlab(&["--config", &c, "--threads", "1", cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    let got = std::fs::read_to_string(cfg.out.join("errors.csv")).unwrap();
    assert_eq!(got, include_str!("fixtures/desk_logit_errors.csv"));
}

#[test]
fn nn_classifier_has_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.classifier = ClassifierKind::Nn;
    let c = write_config(dir.path(), &cfg);
    for cmd in ["generate", "train"] {
        assert_eq!(code(&memlab(&["--config", &c, cmd])), 0);
    }
    assert!(!cfg.out.join("trial_000.ckpt").exists());
    let errors = std::fs::read_to_string(cfg.out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + cfg.trials + 1);
    assert!(errors.lines().nth(1).unwrap().contains(",nn,"));
}

#[test]
fn attack_without_checkpoints_skips_trials() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let c = write_config(dir.path(), &cfg);
    assert_eq!(code(&memlab(&["--config", &c, "generate"])), 0);
    let o = memlab(&["--config", &c, "attack"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("NA"));
}

#[test]
fn zero_snapshots_gives_header_only_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.snapshot_every = 0;
    let c = write_config(dir.path(), &cfg);
    let o = memlab(&["--config", &c, "curve"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let curve = std::fs::read_to_string(cfg.out.join("curve.csv")).unwrap();
    assert_eq!(curve, format!("{CURVE_CSV_HEADER}\n"));
}

#[test]
fn seed_and_out_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.trials = 1;
    let c = write_config(dir.path(), &cfg);
    let other = dir.path().join("elsewhere");
    let o = memlab(&[
        "--config",
        &c,
        "--seed",
        "9",
        "--out",
        other.to_str().unwrap(),
        "generate",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(other.join("trial_000.data").exists());
    assert!(!cfg.out.exists());
}
