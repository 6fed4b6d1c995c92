use std::process::Command;

use swsr::cli::{analyze, read_trial_file, simulate, write_demo, write_report};
use swsr::config::{parse_config, ExperimentConfig, Mode, OutputFormat};
use swsr::simcore::{figure1_demo, DemoConfig, ReportRow};
use swsr::Method;

const BIN: &str = env!("CARGO_BIN_EXE_swsr");

#[test]
fn table_layout_has_sixty_four_rows() {
    let cfg = parse_config(
        r#"
        mode = "simulate"
        scenarios = ["S1", "S2", "S3", "S4"]
        thetas = [0.0, 0.1]
        methods = ["WTT", "WT", "SLR", "WLR", "RR", "RT(T)", "RT(W)", "SWSR"]
        n_iter = 2
        n_perm = 20
        "#,
    )
    .unwrap();
    let report = simulate(&cfg).unwrap();
    assert_eq!(report.rows.len(), 64);
    assert_eq!(report.rows[0].method, Method::Wtt);
    assert_eq!(report.rows[8].theta, 0.1);
    assert_eq!(report.rows[63].scenario, "S4");

    let mut buf = Vec::new();
    write_report(&mut buf, &report.rows, OutputFormat::Csv).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, ReportRow::COLUMNS.join(","));
    assert_eq!(text.lines().count(), 65);
}

#[test]
fn echoed_default_config_round_trips() {
    let cfg = parse_config("mode = \"simulate\"\nscenarios = [\"S1\"]\nvariance = [\"equal\"]").unwrap();
    assert_eq!(cfg, ExperimentConfig::defaults(Mode::Simulate));
    let echoed = cfg.to_toml();
    assert!(echoed.contains("alpha = 0.025"));
    assert_eq!(parse_config(&echoed).unwrap(), cfg);
}

#[test]
fn demo_csv_has_twenty_three_columns() {
    let s = figure1_demo(&DemoConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_demo(&mut buf, &s, OutputFormat::Csv).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for line in text.lines() {
        assert_eq!(line.split(',').count(), 23);
    }
    assert_eq!(text.lines().count(), 1 + s.samples.len());
}

fn write_noiseless_dataset(path: &std::path::Path) {
    let mut text = String::from("t,a,y\n");
    for i in 1..=200 {
        let a = (i * 7 % 3 == 0) as u8;
        let y = 0.2 + 0.001 * i as f64 + 0.5 * a as f64;
        text.push_str(&format!("{i},{a},{y}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn analyze_recovers_noiseless_effect() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    write_noiseless_dataset(&path);
    let data = read_trial_file(&path).unwrap();
    let cfg = ExperimentConfig {
        n_perm: 200,
        ..ExperimentConfig::defaults(Mode::Analyze)
    };
    let rows = analyze(&data, &cfg);
    let swsr = rows.iter().find(|r| r.method == Method::Swsr).unwrap();
    assert!((swsr.theta_hat.unwrap() - 0.5).abs() < 1e-8, "{swsr:?}");
    let slr = rows.iter().find(|r| r.method == Method::Slr).unwrap();
    assert!((slr.theta_hat.unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn binary_analyze_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("trial.csv");
    write_noiseless_dataset(&data);
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "mode = \"analyze\"\nmethods = [\"SWSR\", \"SLR\"]\n").unwrap();
    let out = Command::new(BIN)
        .args(["--config", config.to_str().unwrap(), "--data", data.to_str().unwrap()])
        .args(["--format", "json-lines"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let first: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(first["method"], "SWSR");
    assert!((first["theta_hat"].as_f64().unwrap() - 0.5).abs() < 1e-8);

    std::fs::write(&config, "mode = \"simulate\"\nalpha = 1.5\n").unwrap();
    let out = Command::new(BIN)
        .args(["--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,t,a\n1,1,0\n2,2,3\n").unwrap();
    let out = Command::new(BIN)
        .args(["--mode", "analyze", "--data", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn binary_demo_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("demo.csv");
    let out = Command::new(BIN)
        .args(["--mode", "demo", "--seed", "4", "--out", out_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_path).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 23);
    assert_eq!(&header[..4], ["t", "f_true", "f_hat", "basis_1"]);
    assert_eq!(header[22], "basis_20");
}

#[test]
fn binary_simulate_threads_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        "mode = \"simulate\"\nmethods = [\"WTT\", \"SWSR\"]\nthetas = [0.0, 0.1]\nn_iter = 20\n",
    )
    .unwrap();
    let run = |threads: &str| {
        let out = Command::new(BIN)
            .args(["--config", config.to_str().unwrap()])
            .env("SWSR_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run("1");
    assert_eq!(a, run("3"));
    assert_eq!(a.lines().count(), 5);
}
