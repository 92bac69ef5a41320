use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timelapse"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn timelapse")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn train_sample_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = run(d, &["--preset", "toy", "train", "--steps", "3", "--out", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.bin", "metrics.jsonl", "config.toml", "training_state.bin"] {
        assert!(d.join("run").join(f).exists(), "missing {f}");
    }

    let out = run(d, &["--preset", "toy", "train", "--steps", "5", "--out", "run"]);
    assert!(out.status.success());
    let lines = std::fs::read_to_string(d.join("run/metrics.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);

    for name in ["a", "b"] {
        let out = run(d, &["--seed", "4", "sample-video", "--model", "run/model.bin", "--out", name, "--frames", "4"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = files(&d.join("a"));
    assert_eq!(a.len(), 4);
    assert_eq!(a, files(&d.join("b")));
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, &["train"]).status.code(), Some(2));
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));

    std::fs::write(d.join("bad.toml"), "version = 9\n").unwrap();
    let out = run(d, &["--config", "bad.toml", "train", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().find(|l| l.starts_with('{')).expect("json error line");
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert!(v["message"].as_str().unwrap().contains("newer"));

    let out = run(d, &["sample-video", "--model", "missing.bin", "--out", "x"]);
    assert_eq!(out.status.code(), Some(4));
}
