use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use panosplat::lidario::{load_frame, save_frame};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn panosplat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panosplat")).args(args).output().expect("spawn panosplat")
}

fn ok(args: &[&str]) -> Output {
    let out = panosplat(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    panosplat(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_smoke(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&["synth", "--preset", "smoke", "--out", s(&data)]);
    data
}

fn train_smoke(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--data", s(data), "--preset", "smoke", "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
}

fn frame_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "pslf")).collect();
    v.sort();
    v
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = synth_smoke(tmp.path());
    let b = tmp.path().join("again");
    ok(&["synth", "--preset", "smoke", "--out", s(&b)]);
    let (fa, fb) = (frame_files(&a), frame_files(&b));
    assert_eq!(fa.len(), 10);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    assert!(a.join("scene.toml").exists());
}

#[test]
fn synth_from_spec_file_round_trips() {
    let tmp = TempDir::new().unwrap();
    let a = synth_smoke(tmp.path());
    let b = tmp.path().join("from-spec");
    ok(&["synth", "--spec", s(&a.join("scene.toml")), "--out", s(&b)]);
    for (x, y) in frame_files(&a).iter().zip(&frame_files(&b)) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn synth_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&["synth", "--out", s(&out)]), 2);
    assert_eq!(code(&["synth", "--preset", "smoke", "--frames", "0", "--out", s(&out)]), 2);
    assert_eq!(code(&["synth", "--preset", "nowhere", "--out", s(&out)]), 2);
    assert_eq!(code(&["synth", "--spec", s(&tmp.path().join("missing.toml")), "--out", s(&out)]), 3);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn train_writes_outputs_and_resume_continues_the_log() {
    let tmp = TempDir::new().unwrap();
    let data = synth_smoke(tmp.path());
    let full = tmp.path().join("full");
    train_smoke(&data, &full, &["--checkpoint-every", "20"]);
    for f in ["run.json", "log.jsonl", "checkpoint.psls", "checkpoint_000020.psls", "checkpoint_000040.psls", "metrics.json", "metrics.txt"] {
        assert!(full.join(f).exists(), "missing {f}");
    }
    let resumed = tmp.path().join("resumed");
    train_smoke(&data, &resumed, &["--resume", s(&full.join("checkpoint_000020.psls"))]);
    let a = fs::read_to_string(full.join("log.jsonl")).unwrap();
    let b = fs::read_to_string(resumed.join("log.jsonl")).unwrap();
    let tail: Vec<&str> = a.lines().skip(20).collect();
    assert_eq!(b.lines().collect::<Vec<_>>(), tail);
    assert_eq!(fs::read(full.join("checkpoint.psls")).unwrap(), fs::read(resumed.join("checkpoint.psls")).unwrap());
}

#[test]
fn bad_checkpoint_version_is_a_format_error() {
    let tmp = TempDir::new().unwrap();
    let data = synth_smoke(tmp.path());
    let run = tmp.path().join("run");
    train_smoke(&data, &run, &["--iterations", "2"]);
    let ck = run.join("checkpoint.psls");
    let mut bytes = fs::read(&ck).unwrap();
    bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
    fs::write(&ck, bytes).unwrap();
    let out = tmp.path().join("render");
    assert_eq!(code(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--out", s(&out)]), 3);
}

#[test]
fn render_splits_drop_and_poses() {
    let tmp = TempDir::new().unwrap();
    let data = synth_smoke(tmp.path());
    let run = tmp.path().join("run");
    train_smoke(&data, &run, &[]);
    let ck = run.join("checkpoint.psls");

    let test_dir = tmp.path().join("test");
    ok(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--split", "test", "--points", "--out", s(&test_dir)]);
    assert_eq!(frame_files(&test_dir).len(), 1);
    assert!(test_dir.join("render_0000.xyz").exists());

    let hits = |dir: &Path| -> usize { frame_files(dir).iter().map(|p| load_frame(p).unwrap().hit_count()).sum() };
    let dropped = tmp.path().join("dropped");
    let kept = tmp.path().join("kept");
    ok(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--out", s(&dropped)]);
    ok(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--no-drop", "--out", s(&kept)]);
    assert_eq!(frame_files(&kept).len(), 10);
    assert!(hits(&kept) >= hits(&dropped));

    let poses = tmp.path().join("poses.json");
    let id = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    fs::write(&poses, serde_json::json!([{ "timestamp": 0.25, "pose": id }]).to_string()).unwrap();
    let novel = tmp.path().join("novel");
    ok(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--poses", s(&poses), "--out", s(&novel)]);
    assert_eq!(load_frame(&frame_files(&novel)[0]).unwrap().timestamp, 0.25);

    let mut sheared = id;
    sheared[1] = 0.5;
    fs::write(&poses, serde_json::json!([{ "timestamp": 0.25, "pose": sheared }]).to_string()).unwrap();
    assert_eq!(code(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--poses", s(&poses), "--out", s(&novel)]), 2);
    assert_eq!(code(&["render", "--checkpoint", s(&ck), "--data", s(&data), "--drop-threshold", "0", "--out", s(&novel)]), 2);
}

/// Copies a dataset with every hit pushed one meter further out, re-hashing the manifest.
fn offset_copy(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    let mut manifest = json(&src.join("manifest.json"));
    for entry in manifest["frames"].as_array_mut().unwrap() {
        let name = entry["file"].as_str().unwrap().to_string();
        let mut f = load_frame(&src.join(&name)).unwrap();
        f.range.iter_mut().filter(|r| **r > 0.0).for_each(|r| *r += 1.0);
        save_frame(&dst.join(&name), &f).unwrap();
        entry["sha256"] = serde_json::Value::String(format!("{:x}", Sha256::digest(fs::read(dst.join(&name)).unwrap())));
    }
    fs::write(dst.join("manifest.json"), manifest.to_string()).unwrap();
}

#[test]
fn eval_identity_and_offset() {
    let tmp = TempDir::new().unwrap();
    let data = synth_smoke(tmp.path());
    let same = tmp.path().join("same.json");
    let out = ok(&["eval", "--pred", s(&data), "--gt", s(&data), "--out", s(&same)]);
    assert!(String::from_utf8_lossy(&out.stdout).lines().last().unwrap().starts_with("mean\t"));
    let m = &json(&same)["mean"];
    assert_eq!(m["chamfer"].as_f64().unwrap(), 0.0);
    assert_eq!(m["fscore"].as_f64().unwrap(), 1.0);
    assert_eq!(m["depth_rmse"].as_f64().unwrap(), 0.0);

    let shifted = tmp.path().join("shifted");
    offset_copy(&data, &shifted);
    let off = tmp.path().join("off.json");
    ok(&["eval", "--pred", s(&shifted), "--gt", s(&data), "--out", s(&off)]);
    let m = &json(&off)["mean"];
    assert!((m["depth_rmse"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert!((m["depth_medae"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert_eq!(m["drop_accuracy"].as_f64().unwrap(), 1.0);
}

#[test]
fn eval_rejects_tampered_frames() {
    let tmp = TempDir::new().unwrap();
    let data = synth_smoke(tmp.path());
    let first = &frame_files(&data)[0];
    let mut bytes = fs::read(first).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(first, bytes).unwrap();
    assert_eq!(code(&["eval", "--pred", s(&data), "--gt", s(&data)]), 3);
}

#[test]
fn ablate_runs_requested_variants() {
    let tmp = TempDir::new().unwrap();
    let data = synth_smoke(tmp.path());
    let out = tmp.path().join("ablate");
    ok(&["ablate", "--data", s(&data), "--variants", "full,baseline3d,no-vibration", "--preset", "smoke", "--iterations", "5", "--out", s(&out)]);
    let rows = json(&out.join("ablation.json"));
    let names: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["full", "baseline3d", "no-vibration"]);
    let table = fs::read_to_string(out.join("ablation.md")).unwrap();
    assert!(table.contains("no-vibration"));
    assert_eq!(code(&["ablate", "--data", s(&data), "--variants", "full,bogus", "--out", s(&out)]), 2);
}
