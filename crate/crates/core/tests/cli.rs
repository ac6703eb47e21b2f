use std::fs;
use std::path::Path;
use std::process::Command;

const BASE: &str = r#"
name = "cli"
seed = 5

[subnets]
count = 3
n = 4
sparsity = SPARSITY
magnitude = MAGNITUDE
max_attempts = 20

[topology]
kind = "all_to_all"

[coupling]
mode = "negative_feedback"

[task]
kind = "synthetic"
task = "delayed_class"
test_size = 12

[task.params]
size = 24
classes = 3
seq_len = 6

[train]
epochs = 2
batch_size = 8
lr_cut_epochs = []
"#;

fn write_config(dir: &Path, sparsity: f64, magnitude: f64) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    let text = BASE
        .replace("SPARSITY", &sparsity.to_string())
        .replace("MAGNITUDE", &magnitude.to_string());
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_contractnet"))
        .args(args)
        .env("CONTRACTNET_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn zero_sparsity_certifies_at_unit_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.0, 6.0);
    let out = dir.path().join("run");
    let (code, _) = run(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    for s in report["subnets"].as_array().unwrap() {
        assert_eq!(s["rate"].as_f64().unwrap(), 1.0, "{s}");
    }
}

#[test]
fn exhausted_certification_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1.0, 50.0);
    let out = dir.path().join("run");
    let (code, _) = run(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "name = 3\n").unwrap();
    assert_eq!(run(&["certify", "--config", path.to_str().unwrap()]).0, 1);
    assert_eq!(run(&["certify"]).0, 1);
    assert_eq!(run(&["no-such-command"]).0, 1);
}

#[test]
fn train_then_eval_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.3, 0.5);
    let out = dir.path().join("run");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(run(&["train", "--config", cfg, "--out", out]).0, 0);
    let (code, stdout) = run(&["eval", "--config", cfg, "--out", out]);
    assert_eq!(code, 0);
    let eval: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert!(eval["accuracy"].as_f64().unwrap() >= 0.0);
    assert_eq!(run(&["ablate", "--config", cfg, "--out", out]).0, 0);
    assert_eq!(run(&["report", "--out", out]).0, 0);
    assert!(Path::new(out).join("report.json").exists());
}
