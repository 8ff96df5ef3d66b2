//! End-to-end checks of the `aoi-marl` binary: exit codes, outputs and reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
[env]
num_platoons = 2
followers_per_platoon = 1
num_subchannels = 2
episode_slots = 8

[train]
episodes = 3
batch_size = 4
actor_hidden = [8]
local_critic_hidden = [8]
global_critic_hidden = [8]

[sweep]
gaps_m = [10.0, 20.0]
platoon_sizes = [1]
algorithms = ["modified_maddpg_tdec", "ddpg"]
seeds = [1, 2]
"#;

fn aoi_marl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi-marl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn metrics_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

#[test]
fn help_exits_zero() {
    let out = aoi_marl(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("sweep"));
}

#[test]
fn negative_gap_is_a_config_error_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &TINY.replace("gaps_m = [10.0, 20.0]", "gaps_m = [-5.0]"));
    let out = aoi_marl(&["config", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &TINY.replace("[train]", "[train]\nlearning_speed = 3"));
    let out = aoi_marl(&["run", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("learning_speed"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoi_marl(&["run", "--config", s(&dir.path().join("absent.toml"))]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn invalid_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = aoi_marl(&["run", "--config", s(&config), "--gap", "-1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn run_is_reproducible_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = aoi_marl(&[
            "run",
            "--config",
            s(&config),
            "--out",
            s(out_dir),
            "--episodes",
            "4",
            "--seed",
            "9",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let (fa, fb) = (metrics_files(&a), metrics_files(&b));
    assert_eq!(fa.len(), 1);
    let text = std::fs::read_to_string(&fa[0]).unwrap();
    assert_eq!(text, std::fs::read_to_string(&fb[0]).unwrap());
    assert!(text.contains("seed=9"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 4, "header plus one row per episode");
    assert!(a.join("config.toml").is_file());
}

#[test]
fn sweep_writes_every_point_and_skips_them_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("sweep");
    let first = aoi_marl(&["sweep", "--config", s(&config), "--out", s(&out_dir), "--jobs", "2"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(metrics_files(&out_dir).len(), 8);
    assert_eq!(stdout(&first).lines().filter(|l| l.starts_with("wrote")).count(), 8);

    let second = aoi_marl(&["sweep", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    assert_eq!(stdout(&second).lines().filter(|l| l.starts_with("skipped")).count(), 8);

    let table = aoi_marl(&["aggregate", s(&out_dir), "--tail-episodes", "2"]);
    assert_eq!(table.status.code(), Some(0), "{}", stderr(&table));
    let text = stdout(&table);
    assert!(text.contains("modified_maddpg_tdec") && text.contains("ddpg"), "{text}");

    let plots = dir.path().join("plots");
    let export = aoi_marl(&["export", s(&out_dir), "--out", s(&plots)]);
    assert_eq!(export.status.code(), Some(0), "{}", stderr(&export));
    assert_eq!(std::fs::read_dir(&plots).unwrap().count(), 5);
}

#[test]
fn output_path_that_is_a_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = aoi_marl(&["run", "--config", s(&config), "--out", s(&blocker)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn aggregating_a_missing_directory_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoi_marl(&["aggregate", s(&dir.path().join("nothing"))]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}
