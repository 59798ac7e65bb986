//! End-to-end checks of the binary: reproducibility, resume, manifests
//! and the exit-code contract.

use std::path::Path;
use std::process::Command;

fn meshfree() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meshfree"))
}

fn run_ok(args: &[&str]) -> String {
    let out = meshfree().args(args).output().expect("spawn meshfree");
    assert!(
        out.status.success(),
        "meshfree {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen_small_dataset(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("ds");
    run_ok(&[
        "gen-data",
        "--nx",
        "20",
        "--ny",
        "20",
        "--spacing",
        "0.05",
        "--stencil-n",
        "8",
        "--count",
        "1200",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    out.join("dataset.mfds")
}

#[test]
fn gen_data_is_reproducible_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_small_dataset(&dir.path().join("a"));
    let b = gen_small_dataset(&dir.path().join("b"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest = a.parent().unwrap().join("manifest.json");
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(body["subcommand"], "gen-data");
    assert_eq!(body["config"]["count"], 1200);
}

#[test]
fn train_writes_checkpoint_log_and_target_moments() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_small_dataset(dir.path());
    let out = dir.path().join("tr");
    run_ok(&[
        "train",
        "--dataset",
        ds.to_str().unwrap(),
        "--operator",
        "laplacian",
        "--p",
        "2",
        "--f-h",
        "8",
        "--layers",
        "1",
        "--epochs",
        "2",
        "--lr",
        "1e-3",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(out.join("model.ckpt").exists());
    assert!(out.join("loss_log.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(
        manifest["config"]["target_moments"],
        serde_json::json!([0.0, 0.0, 1.0, 0.0, 1.0])
    );
}

#[test]
fn interrupted_training_resumes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_small_dataset(dir.path());
    let common = |out: &Path, epochs: &str, resume: bool| {
        let mut args = vec![
            "train".to_string(),
            "--dataset".into(),
            ds.to_str().unwrap().into(),
            "--f-h".into(),
            "8".into(),
            "--layers".into(),
            "1".into(),
            "--epochs".into(),
            epochs.into(),
            "--lr".into(),
            "2e-3".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ];
        if resume {
            args.push("--resume".into());
        }
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        run_ok(&argv);
    };
    let full = dir.path().join("full");
    common(&full, "4", false);
    let split = dir.path().join("split");
    common(&split, "2", false);
    common(&split, "4", true);
    let log_full = std::fs::read_to_string(full.join("loss_log.csv")).unwrap();
    let log_split = std::fs::read_to_string(split.join("loss_log.csv")).unwrap();
    assert_eq!(log_full, log_split);
    assert_eq!(
        std::fs::read(full.join("model_last.ckpt")).unwrap(),
        std::fs::read(split.join("model_last.ckpt")).unwrap()
    );
}

#[test]
fn diagnose_moments_emits_table_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diag");
    let stdout = run_ok(&[
        "diagnose",
        "--suite",
        "moments",
        "--providers",
        "labfm",
        "--epsilon",
        "0.5",
        "--nx",
        "16",
        "--clouds",
        "1",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("labfm-p2"));
    let csv = std::fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(csv.starts_with("provider,operator,metric,count,x,y"));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("moments.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["epsilon"], 0.5);
    assert!(sidecar["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn exit_codes_follow_the_contract() {
    // unknown flag -> 1
    let out = meshfree().args(["diagnose", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // nemdo without checkpoint -> invalid argument -> 1
    let out = meshfree()
        .args(["diagnose", "--suite", "moments", "--providers", "nemdo"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // unreadable dataset path -> io error -> 3
    let out = meshfree()
        .args(["train", "--dataset", "/nonexistent/ds.mfds", "--out", "/tmp/x-train"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // --help -> 0
    let out = meshfree().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
