//! End-to-end runs of the `magnon` binary: file emission, reproducibility,
//! config precedence, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn magnon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magnon"))
}

fn run(args: &[&str]) -> Output {
    magnon().args(args).output().expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("magnon-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn verify_oracle_passes_and_exits_zero() {
    let out = run(&["verify-oracle", "--n", "5", "--trials", "6", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("[PASS]")), "{text}");
}

#[test]
fn chain_too_short_for_an_encoding_exits_one() {
    let out = run(&["fig1", "--n-max", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("too short"), "{err}");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("verify-oracle"));
}

#[test]
fn trace_csv_reparses_exactly_and_runs_are_byte_identical() {
    let dir = tmp_dir("trace");
    let out_a = dir.join("a.csv");
    let out_b = dir.join("b.csv");
    let args = |p: &Path| {
        vec![
            "trace".to_string(),
            "--n".into(),
            "16".into(),
            "--t-max".into(),
            "20".into(),
            "--dt".into(),
            "0.25".into(),
            "--out".into(),
            p.to_str().unwrap().to_string(),
        ]
    };
    assert!(magnon().args(args(&out_a)).status().unwrap().success());
    assert!(magnon()
        .args(args(&out_b))
        .env("MAGNON_THREADS", "1")
        .status()
        .unwrap()
        .success());
    let text_a = read(&out_a);
    assert_eq!(text_a, read(&out_b), "results must not depend on worker count");

    let mut lines = text_a.lines();
    assert_eq!(lines.next(), Some("t,F"));
    for (i, line) in lines.enumerate() {
        let mut cols = line.split(',');
        let t: f64 = cols.next().unwrap().parse().unwrap();
        let f: f64 = cols.next().unwrap().parse().unwrap();
        assert_eq!(t.to_bits(), (i as f64 * 0.25).to_bits());
        assert!((0.0..=1.0 + 1e-12).contains(&f));
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tmp_dir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "n = 10\nt_max = 10\ndt = 0.5\n# comment\n").unwrap();
    let out_cfg = dir.join("from-config.csv");
    let status = magnon()
        .args([
            "trace",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_cfg.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    // 10 / 0.5 + 1 = 21 samples + header
    assert_eq!(read(&out_cfg).lines().count(), 22);

    let out_flag = dir.join("flag-wins.csv");
    let status = magnon()
        .args([
            "trace",
            "--config",
            cfg.to_str().unwrap(),
            "--t-max",
            "5",
            "--out",
            out_flag.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read(&out_flag).lines().count(), 12);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "n = 10\nno_such_knob = 1\n").unwrap();
    let out = run(&["trace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("no_such_knob"));
}

#[test]
fn propagator_of_a_single_site_is_the_field_phase() {
    let out = run(&["propagator", "--n", "1", "--t", "2.0", "--h", "0.7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().nth(1).unwrap();
    let cols: Vec<&str> = line.split(',').collect();
    let re: f64 = cols[2].parse().unwrap();
    let im: f64 = cols[3].parse().unwrap();
    assert!((re - (2.0f64 * 0.7 * 2.0).cos()).abs() < 1e-12);
    assert!((im + (2.0f64 * 0.7 * 2.0).sin()).abs() < 1e-12);
}

#[test]
fn protocol_dual_report_is_well_formed() {
    let dir = tmp_dir("dual");
    let path = dir.join("dual.json");
    let status = magnon()
        .args([
            "protocol-dual",
            "--n",
            "12",
            "--theta",
            "1.0",
            "--t",
            "6.0",
            "--out",
            path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&read(&path)).unwrap();
    let probs = report["outcome_probabilities"].as_array().unwrap();
    let total: f64 = probs.iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-10);
    assert!(report["p_confirm"].as_f64().unwrap() >= 0.0);
    assert!(report["f_conditioned"].as_f64().unwrap() <= 1.0);
}

#[test]
fn protocol_memory_report_matches_the_swap_count() {
    let dir = tmp_dir("memory");
    let path = dir.join("memory.json");
    let status = magnon()
        .args([
            "protocol-memory",
            "--n",
            "10",
            "--swaps",
            "4.5,9.0,13.5",
            "--out",
            path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&read(&path)).unwrap();
    assert_eq!(report["etas"].as_array().unwrap().len(), 3);
    let failures = report["cumulative_failure"].as_array().unwrap();
    let mut prev = 1.0;
    for f in failures {
        let v = f.as_f64().unwrap();
        assert!(v <= prev + 1e-15);
        prev = v;
    }
}

#[test]
fn fig3_emits_one_block_of_rows_per_site() {
    let dir = tmp_dir("fig3");
    let out = dir.join("fig3.csv");
    let peaks = dir.join("fig3-peaks.json");
    let status = magnon()
        .args([
            "fig3",
            "--n",
            "12",
            "--sites",
            "3,12",
            "--t-max",
            "10",
            "--dt",
            "0.5",
            "--out",
            out.to_str().unwrap(),
            "--peaks-out",
            peaks.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    // header + 2 sites x 21 samples
    assert_eq!(read(&out).lines().count(), 43);
    let report: serde_json::Value = serde_json::from_str(&read(&peaks)).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
}

#[test]
fn fig4_and_avg_fidelity_report_the_half_floor() {
    let dir = tmp_dir("fig4");
    let out = dir.join("fig4.csv");
    let status = magnon()
        .args([
            "fig4", "--n-min", "6", "--n-max", "8", "--n-step", "2", "--t-max", "10", "--dt",
            "0.25", "--out", out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    // schemes x lengths rows, every optimized value at least the t=0 floor
    assert_eq!(text.lines().count(), 5);
    for line in text.lines().skip(1) {
        let f_av: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.5..=1.0).contains(&f_av), "{line}");
    }

    let summary = dir.join("avg.json");
    let status = magnon()
        .args([
            "avg-fidelity",
            "--n",
            "10",
            "--t-max",
            "15",
            "--dt",
            "0.25",
            "--optimize-h",
            "--out",
            dir.join("avg.csv").to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    assert!(report["f_av_max"].as_f64().unwrap() >= 0.5);
    assert_eq!(report["optimized_over_field"], serde_json::Value::Bool(true));
}

#[test]
fn fig2_summary_locates_the_singlet_angle() {
    let dir = tmp_dir("fig2");
    let summary = dir.join("fig2.json");
    let status = magnon()
        .args([
            "fig2",
            "--n-min",
            "12",
            "--n-max",
            "12",
            "--t-max",
            "40",
            "--dt",
            "0.1",
            "--out",
            dir.join("fig2.csv").to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&read(&summary)).unwrap();
    let theta_star = report[0]["theta_star"].as_f64().unwrap();
    assert!((theta_star - 2.0 * std::f64::consts::PI / 3.0).abs() < 0.06);
}
