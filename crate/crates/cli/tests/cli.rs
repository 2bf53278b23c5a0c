use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn grasplab(runs: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grasplab"))
        .args(args)
        .env("GRASPLAB_RUNS_DIR", runs)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(runs: &Path, args: &[&str]) {
    let out = grasplab(runs, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Every file under `dir`, relative path and contents, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.cfg");
    fs::write(
        &path,
        "[collect]\nattempts = 24\n\n[train]\nbatch = 8\nsteps = 2\nbins = 1\n\n[eval]\ntrials = 1\n",
    )
    .unwrap();
    path
}

#[test]
fn seed_is_required() {
    let runs = TempDir::new().unwrap();
    let out = grasplab(runs.path(), &["scene"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn usage_errors_exit_with_two() {
    let runs = TempDir::new().unwrap();
    let r = runs.path();
    assert_eq!(code(&grasplab(r, &["--seed", "1", "frobnicate"])), 2);
    assert_eq!(code(&grasplab(r, &["--seed", "1", "--gripper", "X9", "collect"])), 2);
    assert_eq!(code(&grasplab(r, &["--seed", "1", "train"])), 2);
    assert_eq!(code(&grasplab(r, &["--seed", "1", "eval", "--plan", "7"])), 2);
    assert_eq!(code(&grasplab(r, &["--seed", "1", "report"])), 2);
    assert_eq!(code(&grasplab(r, &["--seed", "1", "--config", "/nonexistent.cfg", "scene"])), 2);
}

#[test]
fn infeasible_requests_exit_with_three() {
    let runs = TempDir::new().unwrap();
    let out = grasplab(runs.path(), &["--seed", "1", "scene", "--objects", "60", "--spacing", "0.05"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = small_config(runs.path());
    let cfg = cfg.to_str().unwrap();
    ok(runs.path(), &["--seed", "1", "--config", cfg, "collect", "--no-images"]);
    ok(runs.path(), &["--seed", "1", "--config", cfg, "train"]);
    let img = runs.path().join("small.png");
    let tiny = grasplab::scene::Image::filled(200, 300, &[0.5, 0.5, 0.5]);
    tiny.save_color_png(&img).unwrap();
    let out = grasplab(
        runs.path(),
        &["--seed", "1", "--config", cfg, "maps", "--image", img.to_str().unwrap()],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rotation_plan_rejects_single_bin_checkpoint() {
    let runs = TempDir::new().unwrap();
    let cfg = small_config(runs.path());
    let cfg = cfg.to_str().unwrap();
    ok(runs.path(), &["--seed", "2", "--config", cfg, "collect", "--no-images"]);
    ok(runs.path(), &["--seed", "2", "--config", cfg, "train"]);
    let ckpt = runs.path().join("default/checkpoints/planner-1.grsp");
    assert!(ckpt.is_file());
    let curve = fs::read_to_string(runs.path().join("default/checkpoints/planner-1.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert_eq!(curve.lines().next(), Some("step,loss,accuracy"));
    let out = grasplab(
        runs.path(),
        &["--seed", "2", "--config", cfg, "eval", "--plan", "1", "--checkpoint", ckpt.to_str().unwrap()],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("9-bin"));
}

#[test]
fn run_layout_and_manifest() {
    let runs = TempDir::new().unwrap();
    let cfg = small_config(runs.path());
    let cfg = cfg.to_str().unwrap();
    ok(runs.path(), &["--seed", "3", "--name", "demo", "--config", cfg, "scene"]);
    ok(runs.path(), &["--seed", "3", "--name", "demo", "--config", cfg, "collect"]);
    let run = runs.path().join("demo");
    for p in [
        "scenes/scene-3.txt",
        "scenes/scene-3.png",
        "scenes/scene-3_depth.png",
        "dataset/records.txt",
        "dataset/outcomes.txt",
        "dataset/images/00000.png",
        "dataset/scenes/00000.txt",
        "manifest.txt",
    ] {
        assert!(run.join(p).is_file(), "{p} missing");
    }
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("collect.seed 3"));
    assert!(manifest.contains("collect.records_sha256 "));
    assert!(manifest.contains("scene.catalog_sha256 "));
    let outcomes = fs::read_to_string(run.join("dataset/outcomes.txt")).unwrap();
    let first = outcomes.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(first.split_whitespace().count(), 9);
    // rerunning a command replaces its block instead of appending
    ok(runs.path(), &["--seed", "3", "--name", "demo", "--config", cfg, "collect"]);
    assert_eq!(fs::read_to_string(run.join("manifest.txt")).unwrap(), manifest);
}

#[test]
fn collection_is_reproducible_and_thread_independent() {
    let runs = TempDir::new().unwrap();
    let cfg = small_config(runs.path());
    let cfg = cfg.to_str().unwrap();
    ok(runs.path(), &["--seed", "4", "--name", "a", "--config", cfg, "collect"]);
    ok(runs.path(), &["--seed", "4", "--name", "b", "--config", cfg, "collect"]);
    ok(runs.path(), &["--seed", "4", "--name", "c", "--jobs", "4", "--config", cfg, "collect"]);
    let a = snapshot(&runs.path().join("a"));
    assert!(!a.is_empty());
    assert_eq!(a, snapshot(&runs.path().join("b")));
    assert_eq!(a, snapshot(&runs.path().join("c")));
    ok(runs.path(), &["--seed", "5", "--name", "d", "--config", cfg, "collect"]);
    assert_ne!(a, snapshot(&runs.path().join("d")));
}
