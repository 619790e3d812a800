use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deepstate::cli::{read_forecast_csv, read_forecast_metadata};

fn demo_series() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/series.csv")
}

const BASE: &str = r#"
seed = 3

[data]
path = "series.csv"
time_features = ["hour_of_day"]
train_rows = 1904

[model]
latent_dim = 2
hidden_dim = 6
mlp_dim = 6

[train]
window = 48
batch_size = 2
iterations = 20
samples = 1
checkpoint_every = 10

[forecast]
horizon = 12
trials = 40
chunk_size = 16

[evaluate]
horizon = 6
windows = 2
trials = 30
baseline_period = 24
"#;

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(demo_series(), dir.path().join("series.csv")).unwrap();
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepstate"))
        .args(args)
        .arg("--config")
        .arg(dir.join("run.toml"))
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn train_forecast_evaluate_relevance_round_trip() {
    let dir = setup(BASE);
    let d = dir.path();
    ok(run(d, &["train"]));
    for f in ["checkpoint.json", "checkpoint-10.json", "checkpoint-20.json", "loss.csv"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    let loss = std::fs::read_to_string(d.join("out/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 21);

    ok(run(d, &["forecast"]));
    let rows = read_forecast_csv(d.join("out/forecast.csv")).unwrap();
    let meta = read_forecast_metadata(d.join("out/forecast.json")).unwrap();
    assert_eq!(rows.len(), 12 * meta.levels.len());
    assert_eq!(meta.levels.len(), 11);
    assert_eq!(meta.seed, 3);

    let text = ok(run(d, &["evaluate"]));
    assert!(text.contains("seasonal_naive"));
    let eval = std::fs::read_to_string(d.join("out/evaluation.csv")).unwrap();
    assert!(eval.lines().count() >= 3);

    ok(run(d, &["relevance"]));
    let rel = std::fs::read_to_string(d.join("out/relevance.csv")).unwrap();
    let total: f64 = rel.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn untrained_model_has_uniform_relevance() {
    let dir = setup(&BASE.replace("iterations = 20", "iterations = 0"));
    ok(run(dir.path(), &["train"]));
    ok(run(dir.path(), &["relevance"]));
    let rel = std::fs::read_to_string(dir.path().join("out/relevance.csv")).unwrap();
    let weights: Vec<f64> = rel.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(weights.len(), 2);
    for w in weights {
        assert!((w - 0.5).abs() < 1e-15);
    }
}

#[test]
fn config_errors_exit_2_without_artifacts() {
    let dir = setup(&BASE.replace("window = 48", "window = 48\nwindwo = 3"));
    let out = run(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!dir.path().join("out").exists());

    let dir = setup(&BASE.replace("trials = 40", "trials = 0"));
    assert_eq!(run(dir.path(), &["forecast"]).status.code(), Some(2));
    assert!(!dir.path().join("out").exists());

    let dir = setup(&BASE.replace("window = 48", "window = 5000"));
    assert_eq!(run(dir.path(), &["train"]).status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = setup(BASE);
    assert_eq!(run(dir.path(), &["forecast"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["fly"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_deepstate")).arg("train").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1() {
    let dir = setup(&BASE.replace("iterations = 20", "iterations = 200\nlearning_rate = 1e6"));
    let out = run(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/checkpoint-last-good.json").exists());
    let dir = setup(BASE);
    std::fs::write(dir.path().join("series.csv"), "timestamp,x:a\n2024-01-01,1\n2024-01-01,2\n").unwrap();
    assert_eq!(run(dir.path(), &["train"]).status.code(), Some(1));
}

#[test]
fn seed_flag_and_out_flag_override_config() {
    let dir = setup(BASE);
    let d = dir.path();
    let a = d.join("a");
    let b = d.join("b");
    ok(run(d, &["train", "--out", a.to_str().unwrap()]));
    ok(run(d, &["train", "--out", b.to_str().unwrap(), "--seed", "4"]));
    let la = std::fs::read(a.join("loss.csv")).unwrap();
    let lb = std::fs::read(b.join("loss.csv")).unwrap();
    assert_ne!(la, lb);
    let ckpt = a.join("checkpoint.json");
    ok(run(d, &["forecast", "--checkpoint", ckpt.to_str().unwrap(), "--out", a.to_str().unwrap()]));
    assert!(a.join("forecast.csv").exists());
}

#[test]
fn standardized_output_flag_changes_units() {
    let dir = setup(BASE);
    let d = dir.path();
    ok(run(d, &["train"]));
    ok(run(d, &["forecast"]));
    let original = read_forecast_csv(d.join("out/forecast.csv")).unwrap();
    let config = BASE.replace("chunk_size = 16", "chunk_size = 16\nstandardized_output = true");
    std::fs::write(d.join("run.toml"), config).unwrap();
    ok(run(d, &["forecast"]));
    let scaled = read_forecast_csv(d.join("out/forecast.csv")).unwrap();
    let median = |rows: &[deepstate::cli::ForecastRow]| {
        rows.iter().filter(|r| r.level == 0.5).map(|r| r.value).sum::<f64>() / 12.0
    };
    assert!(median(&original) > 20.0);
    assert!(median(&scaled).abs() < 5.0);
}
