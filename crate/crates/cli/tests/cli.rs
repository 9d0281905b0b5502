use std::path::Path;
use std::process::{Command, Output};

fn veinorigin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veinorigin"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn synth_small(dir: &Path) -> String {
    let data = dir.join("data");
    let out = veinorigin(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--classes",
        "3",
        "--per-class",
        "12",
        "--width",
        "96",
        "--height",
        "72",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.join("config.json").to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn synth_then_single_cell_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_small(dir.path());
    let out_dir = dir.path().join("results");
    let out = veinorigin(&[
        "matrix",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--descriptors",
        "WMV",
        "--variant",
        "orig",
        "--enhance",
        "off",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("descriptor,orig-noenh:auc_roc,orig-noenh:auc_pr"), "{stdout}");
    assert!(stdout.contains("\nWMV,"));
    for f in ["report.json", "table.csv", "table1.csv", "curves/WMV_orig-noenh_roc.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn train_evaluate_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_small(dir.path());
    let out_dir = dir.path().join("r");
    let out_s = out_dir.to_str().unwrap();
    let cell = ["--descriptors", "IMHIST", "--variant", "orig", "--enhance", "on"];
    let mut args = vec!["train", "--config", &config, "--out", out_s];
    args.extend(cell);
    let out = veinorigin(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = out_dir.join("model_IMHIST_orig-enh.json");
    assert!(model.exists());

    let model_s = model.to_str().unwrap().to_string();
    let out = veinorigin(&["evaluate", "--config", &config, "--out", out_s, "--model", &model_s]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("auc_roc="));
    assert!(out_dir.join("evaluation_IMHIST_orig-enh.json").exists());

    let out = veinorigin(&["stats", "--config", &config, "--out", out_s]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(out_dir.join("stats.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
}

#[test]
fn train_needs_one_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_small(dir.path());
    let out = veinorigin(&["train", "--config", &config, "--descriptors", "WMV,FRF"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(code(&veinorigin(&["matrix"])), 1);
    assert_eq!(code(&veinorigin(&["bogus"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"data_root": "x", "split_fraction": 2.0}"#).unwrap();
    let out = veinorigin(&["matrix", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("split_fraction"));
    let config = synth_small(dir.path());
    assert_eq!(code(&veinorigin(&["matrix", "--config", &config, "--descriptors", "SIFT"])), 1);
    assert_eq!(code(&veinorigin(&["--help"])), 0);
}

#[test]
fn missing_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"classes": [{"label": "a", "path": "nowhere"}, {"label": "b", "path": "gone"}]}"#).unwrap();
    let out = veinorigin(&["matrix", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn failed_cells_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_small(dir.path());
    // A ROI larger than the 96x72 samples fails every ROI cell.
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    cfg["roi"]["out_w"] = 500.into();
    std::fs::write(&config, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("r3");
    let out = veinorigin(&[
        "matrix",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--descriptors",
        "IMHIST",
        "--enhance",
        "off",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("table.csv")).unwrap();
    assert!(table.contains("IMHIST,orig-noenh,ok"));
    assert!(table.contains("IMHIST,roi-noenh,failed"));
}
