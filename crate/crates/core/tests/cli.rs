use std::path::Path;
use std::process::{Command, Output};

fn lvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvs"))
        .args(args)
        .output()
        .expect("spawn lvs")
}

fn ok(args: &[&str]) -> String {
    let out = lvs(args);
    assert!(
        out.status.success(),
        "lvs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(&["generate", "--n", "100", "--po", "0.5", "--seed", "7", "--out", s(dir.path())]);
    }
    for f in ["dataset.csv", "dataset.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let c = tempfile::tempdir().unwrap();
    ok(&["generate", "--n", "100", "--po", "0.5", "--seed", "8", "--out", s(c.path())]);
    assert_ne!(
        std::fs::read(a.path().join("dataset.csv")).unwrap(),
        std::fs::read(c.path().join("dataset.csv")).unwrap()
    );
}

#[test]
fn fig2_writes_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "fig2", "--seed", "1", "--out", s(dir.path()), "--max-seconds", "15", "--n-test", "200",
    ]);
    assert_eq!(stdout.lines().count(), 4);
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["fig2_lrt.csv", "fig2_nlos300.csv", "fig2_nlos500.csv", "fig2_nlos700.csv"]
    );
    let text = std::fs::read_to_string(dir.path().join("fig2_nlos500.csv")).unwrap();
    assert!(text.contains("# seed: 1\n"));
    assert!(text.contains("\nsecond,total_error,alpha,beta\n"));
}

#[test]
fn eval_lrt_noiseless_reports_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--n", "300", "--sigma", "1e-6", "--nlos", "0", "--seed", "4", "--out", s(d)]);
    let data = d.join("dataset.csv");
    let dec = d.join("decisions.csv");
    let stdout = ok(&["eval-lrt", "--data", s(&data), "--decisions", s(&dec)]);
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "lrt");
    assert_eq!(row[7], "0.000000", "total error in {stdout}");
    let dec_text = std::fs::read_to_string(&dec).unwrap();
    let header = dec_text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.ends_with(",lrt_decision"));
}

#[test]
fn train_nn_saves_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--n", "150", "--seed", "5", "--out", s(d)]);
    let model = d.join("m.json");
    let data = d.join("dataset.csv");
    let stdout = ok(&["train-nn", "--data", s(&data), "--model", s(&model), "--test", s(&data)]);
    assert!(stdout.starts_with("method,"));
    let m = lvs_core::MlpModel::from_json(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m.n_bs(), 4);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 11, "thermal_noise_std_ns": 250}"#).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["--config", s(&cfg), "--out", s(&a), "generate", "--n", "20"]);
    ok(&["--config", s(&cfg), "--seed", "12", "--out", s(&b), "generate", "--n", "20"]);
    let meta_a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("dataset.json")).unwrap()).unwrap();
    let meta_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("dataset.json")).unwrap()).unwrap();
    assert_eq!(meta_a["seed"], 11);
    assert_eq!(meta_a["thermal_noise_std_ns"], 250.0);
    assert_eq!(meta_b["seed"], 12);
}

#[test]
fn usage_and_runtime_errors() {
    let out = lvs(&["fig2", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lvs(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));

    let out = lvs(&["eval-lrt", "--data", "/definitely/missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("missing.csv"));

    let dir = tempfile::tempdir().unwrap();
    let out = lvs(&["generate", "--po", "1.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_documents_flags() {
    let text = ok(&["--help"]);
    for flag in ["--seed", "--config", "--out"] {
        assert!(text.contains(flag), "{flag}");
    }
    for cmd in ["generate", "eval-lrt", "train-nn", "curve", "fig2", "fig3", "fig4", "fig5", "all"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
