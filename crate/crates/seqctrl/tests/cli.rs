//! End-to-end checks of the `seqctrl` binary: subcommand wiring, CSV shapes,
//! and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn seqctrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqctrl"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("seqctrl-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_preset(dir: &std::path::Path) -> PathBuf {
    let path = dir.join("config.json");
    let out = seqctrl(&["pendulum", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    path
}

#[test]
fn pendulum_preset_round_trips_through_simulate() {
    let dir = temp_dir("simulate");
    let config = write_preset(&dir);
    let traj = dir.join("traj.csv");
    let out = seqctrl(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run,k,x1,x2,x3,x4,u1,theta,step_cost"
    );
    assert_eq!(lines.count(), 150);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn design_prints_gain_and_radius() {
    let dir = temp_dir("design");
    let config = write_preset(&dir);
    let out = seqctrl(&["design", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gain:"));
    assert!(stdout.contains("closed_loop_radius:"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stability_reports_verdict() {
    let dir = temp_dir("stability");
    let config = write_preset(&dir);
    // Shrink the sequence so the moment matrix stays small.
    let text = std::fs::read_to_string(&config).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["sequence_length"] = serde_json::json!(2);
    json["network"]["delay_pmf"] = serde_json::json!([0.8, 0.15, 0.05]);
    std::fs::write(&config, json.to_string()).unwrap();

    let out = seqctrl(&["stability", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("radius:"));
    assert!(stdout.contains("mss: true"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn montecarlo_writes_summary_rows() {
    let dir = temp_dir("mc");
    let config = write_preset(&dir);
    let summary = dir.join("summary.csv");
    let out = seqctrl(&[
        "montecarlo",
        "--config",
        config.to_str().unwrap(),
        "--runs",
        "4",
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&summary).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "controller,sigma_w,runs,mean_cost,std_error");
    assert_eq!(lines.len(), 4, "one row per default controller kind");
    assert!(lines[1].starts_with("cs,0.006,4,"));
    assert!(lines[2].starts_with("ol,0.006,4,"));
    assert!(lines[3].starts_with("vci,0.006,4,"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn montecarlo_single_controller_filtered() {
    let dir = temp_dir("mc-filtered");
    let config = write_preset(&dir);
    let out = seqctrl(&[
        "montecarlo",
        "--config",
        config.to_str().unwrap(),
        "--runs",
        "2",
        "--controller",
        "vci-filtered",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|line| line.starts_with("vci-filtered,")));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_errors_exit_with_code_2() {
    let out = seqctrl(&["design", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = temp_dir("badcfg");
    let config = write_preset(&dir);
    let text = std::fs::read_to_string(&config).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["network"]["delay_pmf"] = serde_json::json!([0.5, 0.4]);
    std::fs::write(&config, json.to_string()).unwrap();
    let out = seqctrl(&["design", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("network"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn numerical_failure_exits_with_code_3() {
    let dir = temp_dir("numfail");
    let config = dir.join("config.json");
    // Unstabilizable pair: A = 2 with zero input matrix.
    std::fs::write(
        &config,
        serde_json::json!({
            "plant": {"linear": {"a": [[2.0]], "b": [[0.0]], "noise_cov": [[0.0]]}},
            "network": {"delay_pmf": [1.0], "loss_prob": 0.0},
            "sequence_length": 1,
            "initial_state": [1.0],
            "cost": {"q": [[1.0]], "r": [[1.0]]}
        })
        .to_string(),
    )
    .unwrap();
    let out = seqctrl(&["design", "--config", config.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stability_dimension_cap_exits_with_code_4() {
    let dir = temp_dir("cap");
    let config = write_preset(&dir);
    let text = std::fs::read_to_string(&config).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    // d = 45, mode dimension 49, moment matrix 11·49² far above the cap.
    json["sequence_length"] = serde_json::json!(9);
    json["network"]["delay_pmf"] =
        serde_json::json!([0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]);
    std::fs::write(&config, json.to_string()).unwrap();
    let out = seqctrl(&["stability", "--config", config.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::remove_dir_all(&dir).ok();
}
