//! The `piconvae` binary end to end on a short series.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const LENGTH: &str = "1200";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_piconvae"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn generate(tmp: &TempDir, name: &str, seed: &str) -> PathBuf {
    let dir = tmp.path().join(name);
    ok(&["generate", "--length", LENGTH, "--seed", seed, "--run-dir", s(&dir)]);
    dir.join("data.csv")
}

fn train(tmp: &TempDir, data: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let dir = tmp.path().join(name);
    let mut args = vec![
        "train",
        "--data",
        s(data),
        "--epochs",
        "2",
        "--steps-per-epoch",
        "3",
        "--seed",
        "1",
        "--run-dir",
        s(&dir),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    dir
}

#[test]
fn generate_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let a = read(generate(&tmp, "a", "3"));
    let b = read(generate(&tmp, "b", "3"));
    let c = read(generate(&tmp, "c", "4"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().next().unwrap(), "t,v,i,theta,delta,p,q");
    assert_eq!(a.lines().count(), 1201);
    assert!(tmp.path().join("a/manifest.toml").exists());
}

#[test]
fn inject_labels_the_rounded_up_fraction_of_the_test_split() {
    let tmp = TempDir::new().unwrap();
    let data = generate(&tmp, "g", "1");
    let dir = tmp.path().join("i");
    ok(&["inject", "--data", s(&data), "--run-dir", s(&dir)]);
    let labels = read(dir.join("labels.csv"));
    let rows: Vec<&str> = labels.lines().skip(1).collect();
    // test split of 1200 samples is 180 long; ceil(180 · 0.026) = 5
    assert_eq!(rows.len(), 180);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",1")).count(), 5);
    let clean = read(data);
    let attacked = read(dir.join("attacked.csv"));
    let differing = clean.lines().zip(attacked.lines()).filter(|(a, b)| a != b).count();
    assert_eq!(differing, 5);
}

#[test]
fn baseline_training_leaves_physics_columns_empty() {
    let tmp = TempDir::new().unwrap();
    let data = generate(&tmp, "g", "1");
    let pi = read(train(&tmp, &data, "pi", &[]).join("losses.csv"));
    let base = read(train(&tmp, &data, "base", &["--no-physics"]).join("losses.csv"));
    for line in base.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 12);
        for k in [5, 6, 10, 11] {
            assert!(cols[k].is_empty(), "{line}");
        }
    }
    for line in pi.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(cols[5].parse::<f64>().unwrap() >= 0.0);
    }
    assert!(read(tmp.path().join("base/train.txt")).contains("model = convae"));
}

#[test]
fn full_pipeline_replays_to_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let data = generate(&tmp, "g", "2");
    let trained = train(&tmp, &data, "t", &[]);
    let model = trained.join("model.ckpt");

    let det = tmp.path().join("d");
    ok(&["detect", "--model", s(&model), "--data", s(&data), "--run-dir", s(&det)]);
    let metrics = read(det.join("metrics.txt"));
    for key in ["tp", "fp", "prec", "rec", "f1", "threshold"] {
        assert!(metrics.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key} missing:\n{metrics}");
    }
    let verdicts = read(det.join("verdicts.csv"));
    assert_eq!(verdicts.lines().count(), 181);

    let ev = tmp.path().join("e");
    ok(&["evaluate", "--verdicts", s(&det.join("verdicts.csv")), "--oracle", "--run-dir", s(&ev)]);
    let re = read(ev.join("metrics.txt"));
    let line = |text: &str, key: &str| text.lines().find(|l| l.starts_with(&format!("{key} = "))).map(str::to_owned);
    assert_eq!(line(&re, "f1"), line(&metrics, "f1"));
    assert!(re.contains("oracle_f1"));

    let sw = tmp.path().join("s");
    ok(&["sweep", "--model", s(&model), "--data", s(&data), "--sweep-steps", "3", "--run-dir", s(&sw)]);
    let sweep = read(sw.join("sweep.csv"));
    assert_eq!(sweep.lines().next().unwrap(), "alpha,acc,prec,rec,f1");
    assert_eq!(sweep.lines().count(), 4);

    for (name, dir) in [("train", &trained), ("detect", &det), ("sweep", &sw)] {
        let again = tmp.path().join(format!("replay-{name}"));
        let out = ok(&["replay", s(dir), "--run-dir", s(&again)]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(!text.contains("MISMATCH"), "{name}: {text}");
        assert!(text.lines().filter(|l| l.starts_with("match ")).count() >= 1);
    }
}

#[test]
fn replay_reports_mismatched_outputs_with_exit_code_3() {
    let tmp = TempDir::new().unwrap();
    let data = generate(&tmp, "g", "5");
    let dir = tmp.path().join("i");
    ok(&["inject", "--data", s(&data), "--run-dir", s(&dir)]);
    let manifest = dir.join("manifest.toml");
    let text = read(manifest.clone());
    let digest = text
        .lines()
        .find(|l| l.starts_with("\"labels.csv\" = "))
        .and_then(|l| l.split('"').nth(3))
        .unwrap()
        .to_owned();
    std::fs::write(&manifest, text.replace(&digest, &"0".repeat(64))).unwrap();
    let out = run(&["replay", s(&manifest), "--run-dir", s(&tmp.path().join("r"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("MISMATCH labels.csv"));
}

#[test]
fn replay_refuses_changed_inputs() {
    let tmp = TempDir::new().unwrap();
    let data = generate(&tmp, "g", "5");
    let dir = tmp.path().join("i");
    ok(&["inject", "--data", s(&data), "--run-dir", s(&dir)]);
    let mut text = read(data.clone());
    text.push_str(&text.lines().last().unwrap().to_owned());
    std::fs::write(&data, text).unwrap();
    let out = run(&["replay", s(&dir), "--run-dir", s(&tmp.path().join("r"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["generate", "--channel", "x"])), 1);
    assert_eq!(code(&run(&["generate", "--length", "2", "--run-dir", s(&tmp.path().join("a"))])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let missing = tmp.path().join("nope.csv");
    assert_eq!(code(&run(&["inject", "--data", s(&missing)])), 2);

    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "t,v,i,theta,delta,p,q\n0,1,1,0,0,1,x\n").unwrap();
    let out = run(&["inject", "--data", s(&bad), "--run-dir", s(&tmp.path().join("b"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("column"));

    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "t,v,i,theta,delta,p,q\n").unwrap();
    assert_eq!(code(&run(&["inject", "--data", s(&empty), "--run-dir", s(&tmp.path().join("c"))])), 2);

    let garbage = tmp.path().join("garbage.ckpt");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let data = generate(&tmp, "g", "1");
    let out = run(&["detect", "--model", s(&garbage), "--data", s(&data), "--run-dir", s(&tmp.path().join("d"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\n[generator]\nlength = 600\n").unwrap();
    let dir = tmp.path().join("g");
    ok(&["generate", "--config", s(&cfg), "--run-dir", s(&dir)]);
    assert_eq!(read(dir.join("data.csv")).lines().count(), 601);
    let dir2 = tmp.path().join("g2");
    ok(&["generate", "--config", s(&cfg), "--length", "300", "--run-dir", s(&dir2)]);
    assert_eq!(read(dir2.join("data.csv")).lines().count(), 301);
    let manifest = read(dir2.join("manifest.toml"));
    assert!(manifest.contains("length = 300"));

    std::fs::write(&cfg, "[generator]\nlenght = 600\n").unwrap();
    assert_eq!(code(&run(&["generate", "--config", s(&cfg), "--run-dir", s(&tmp.path().join("x"))])), 1);
}
