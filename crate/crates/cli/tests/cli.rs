use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use igcn::geometry::DistanceCalibration;
use igcn::numerics::poly_eval;

const SMALL_MODEL: &str = "[model]\nhidden = 8\nh_graph = 4\n";

fn igcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igcn"))
        .args(args)
        .env("IGCN_LOG", "error")
        .output()
        .expect("spawn igcn")
}

fn ok(args: &[&str]) -> String {
    let out = igcn(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    igcn(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) {
    ok(&["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(dir)]);
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, SMALL_MODEL).unwrap();
    path
}

#[test]
fn synth_writes_a_reproducible_corpus() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    synth(&a, 3, 7);
    synth(&b, 3, 7);
    let clips = fs::read_to_string(a.join("clips.jsonl")).unwrap();
    assert_eq!(clips.lines().count(), 15);
    for name in ["clips.jsonl", "manifest.json", "calibration.json", "synth.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(code(&["synth", "--n", "0", "--out", s(&root.path().join("c"))]), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["gradcheck", "--seeds", "many"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn training_is_deterministic_and_records_ablations() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    synth(&data, 2, 1);
    let cfg = small_config(root.path());
    let run = |name: &str, extra: &[&str]| {
        let out = root.path().join(name);
        let mut args = vec!["--config", s(&cfg), "train", "--data", s(&data), "--out", s(&out), "--epochs", "3", "--seed", "5"];
        args.extend_from_slice(extra);
        ok(&args);
        out
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let history = |dir: &Path| fs::read_to_string(dir.join("history.csv")).unwrap();
    assert_eq!(history(&a), history(&b));
    assert_eq!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(b.join("checkpoint.json")).unwrap());
    let first = history(&a).lines().next().unwrap().to_string();
    assert!(first.starts_with("# config_hash=") && first.ends_with("ablate=none"), "{first}");
    assert_eq!(history(&a).lines().count(), 2 + 3);

    let c = run("c", &["--ablate", "first-person-motion", "--ablate", "mutual-attention"]);
    let first = history(&c).lines().next().unwrap().to_string();
    assert!(first.contains("ablate=mutual-attention,first-person-motion"), "{first}");
    assert_ne!(history(&a).lines().next(), history(&c).lines().next());

    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&root.path().join("d")), "--ablate", "gaze"]), 1);
}

#[test]
fn eval_reports_and_checks_slot_capacity() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    synth(&data, 2, 2);
    let cfg = small_config(root.path());
    let out = root.path().join("run");
    ok(&[
        "--config", s(&cfg), "train", "--data", s(&data), "--out", s(&out), "--epochs", "150", "--lr", "0.01",
        "--batch-size", "1", "--no-augment",
    ]);
    let ckpt = out.join("checkpoint.json");
    let metrics = root.path().join("metrics.csv");
    let confusion = root.path().join("confusion.csv");
    ok(&[
        "eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--split", "train", "--out", s(&metrics),
        "--confusion-out", s(&confusion),
    ]);
    let csv = fs::read_to_string(&metrics).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 5 + 3 + 1, "{csv}");
    assert!(rows.contains(&"accuracy,1,5"), "overfit training split should be perfect:\n{csv}");
    assert!(rows.last().unwrap().starts_with("config_hash,"));
    assert_eq!(fs::read_to_string(&confusion).unwrap().lines().count(), 6);

    let mismatch = igcn(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--m-max", "4"]);
    assert_eq!(mismatch.status.code(), Some(2));
    let err = String::from_utf8_lossy(&mismatch.stderr);
    assert!(err.contains("M_max = 6") && err.contains("M_max = 4"), "{err}");

    let predicted = ok(&["predict", "--checkpoint", s(&ckpt), "--clips", s(&data.join("clips.jsonl"))]);
    let lines: Vec<&str> = predicted.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 1 + 10);
    for row in &lines[1..] {
        let p: f64 = row.split(',').skip(2).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-9);
    }
}

#[test]
fn gradcheck_passes_and_catches_corruption() {
    let out = ok(&["gradcheck", "--seeds", "5"]);
    assert!(out.lines().any(|l| l.trim() == "PASS"), "{out}");
    assert_eq!(code(&["gradcheck", "--seeds", "2", "--corrupt"]), 3);
}

#[test]
fn distance_fit_recovers_exact_polynomials() {
    let root = tempfile::tempdir().unwrap();
    let coefficients = [9.0, -0.045, 5.75e-5];
    let mut csv = String::from("face_height_px,distance_m\n");
    for k in 0..12 {
        let h = 30.0 + 25.0 * k as f64;
        csv.push_str(&format!("{h},{}\n", poly_eval(&coefficients, h)));
    }
    let input = root.path().join("samples.csv");
    fs::write(&input, csv).unwrap();
    let out = root.path().join("cal.json");
    ok(&["fit-distance-model", "--csv", s(&input), "--degree", "2", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let cal = DistanceCalibration::from_json(&text).unwrap();
    assert_eq!(DistanceCalibration::from_json(&cal.to_json()).unwrap(), cal);
    for k in 0..12 {
        let h = 30.0 + 25.0 * k as f64;
        assert!((poly_eval(&cal.coefficients, h) - poly_eval(&coefficients, h)).abs() < 1e-8);
    }

    let single = root.path().join("one.csv");
    fs::write(&single, "100,3.0\n").unwrap();
    assert_eq!(code(&["fit-distance-model", "--csv", s(&single), "--out", s(&out)]), 2);
}

#[test]
fn missing_inputs_are_data_errors() {
    let root = tempfile::tempdir().unwrap();
    let absent = root.path().join("absent");
    let out = igcn(&["train", "--data", s(&absent), "--out", s(&root.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent"));
    assert_eq!(code(&["dump-graph", "--clips", s(&absent.join("clips.jsonl"))]), 2);
    assert_eq!(code(&["--config", s(&absent.join("run.toml")), "gradcheck"]), 2);
    assert!(!root.path().join("o").exists());

    let bad = root.path().join("bad.toml");
    fs::write(&bad, "[model]\nhiden = 3\n").unwrap();
    assert_eq!(code(&["--config", s(&bad), "gradcheck"]), 1);
}

#[test]
fn dump_graph_prints_valid_json() {
    let root = tempfile::tempdir().unwrap();
    synth(root.path(), 1, 3);
    let text = ok(&["dump-graph", "--clips", s(&root.path().join("clips.jsonl")), "--frame", "2"]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["frame"], 2);
    assert!(doc["graph"].is_object());
}
