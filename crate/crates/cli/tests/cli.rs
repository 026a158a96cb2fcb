use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mvsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvsde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(command: &str, config: &Path, prefix: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        command,
        "--config",
        config.to_str().unwrap(),
        "--output",
        prefix.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    mvsde(&args)
}

/// CSV body without the `#` header lines.
fn csv_body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn phase_diagram_reports_three_to_one_transition() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("pd");
    let out = run_config("phase-diagram", &configs().join("phase-diagram-bistable.json"), &prefix, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_body(&prefix.with_extension("csv"));
    assert_eq!(rows[0], "sigma,n_roots,m_1,m_2,m_3");
    let counts: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    let switch = counts.windows(2).position(|w| w == ["3", "1"]).expect("3 -> 1 row");
    assert!(counts[..=switch].iter().all(|c| *c == "3"));
    assert!(counts[switch + 1..].iter().all(|c| *c == "1"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(json["config"]["sigma_grid"].as_array().unwrap().len(), 16);
    assert_eq!(json["result"]["diagram"]["transition_estimates"].as_array().unwrap().len(), 1);
}

#[test]
fn critical_curve_three_thetas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("curve.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"v_prime": {"poly": [0, -1, 0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 2},
            "theta_grid": {"start": 1.5, "stop": 2.5, "count": 3}}"#,
    )
    .unwrap();
    let prefix = dir.path().join("curve");
    let out = run_config("critical-curve", &cfg, &prefix, &[]);
    assert!(out.status.success());
    let rows = csv_body(&prefix.with_extension("csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], "theta,sigma_star");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["result"]["curve"]["monotone"], true);
}

#[test]
fn audit_gaussian_all_hold() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("audit");
    let out = run_config("audit", &configs().join("audit-gaussian.json"), &prefix, &["--format", "json"]);
    assert!(out.status.success());
    assert!(!prefix.with_extension("csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["result"]["all_hold"], true);
    assert_eq!(json["config"]["model"]["theta"], 1.0);
}

#[test]
fn config_errors_exit_one_and_name_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"v_prime": {"poly": [0, -1, 0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 2}, "sigma_grid": [-0.5, 1.0]}"#,
    )
    .unwrap();
    let out = run_config("phase-diagram", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_grid"));

    std::fs::write(&cfg, r#"{"model": {"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 1}, "sigmas": [1]}"#).unwrap();
    let out = run_config("audit", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigmas"));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // V' = x has no positive zero, so σ_r is undefined
    let cfg = dir.path().join("gauss.json");
    std::fs::write(&cfg, r#"{"model": {"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 1}}"#).unwrap();
    let prefix = dir.path().join("sr");
    let out = run_config("sigma-r", &cfg, &prefix, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!prefix.with_extension("csv").exists());
}

#[test]
fn command_flag_sigma_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("roots");
    let out = run_config(
        "roots",
        &configs().join("roots-bistable.json"),
        &prefix,
        &["--sigma", "2.0", "--format", "csv"],
    );
    assert!(out.status.success());
    let rows = csv_body(&prefix.with_extension("csv"));
    assert_eq!(rows.len(), 2, "{rows:?}");
    let header = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert!(header.contains("\"sigma\":2.0"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("phase-diagram-bistable.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_config("phase-diagram", &cfg, &a, &["--threads", "1"]).status.success());
    assert!(run_config("phase-diagram", &cfg, &b, &["--threads", "4"]).status.success());
    assert_eq!(csv_body(&a.with_extension("csv")), csv_body(&b.with_extension("csv")));
}

#[test]
fn short_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"v_prime": {"poly": [0, -1, 0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 2},
            "simulation": {"sigma": 0.6, "n": 2000, "dt": 0.01, "t_burn": 1, "t_sample": 1, "seed": 7, "trace_stride": 10}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_config("simulate", &cfg, &a, &["--threads", "1"]).status.success());
    assert!(run_config("simulate", &cfg, &b, &["--threads", "2"]).status.success());
    let rows = csv_body(&a.with_extension("csv"));
    assert_eq!(rows[0], "t,mean,stderr");
    assert_eq!(rows.len(), 1 + 21);
    assert_eq!(rows, csv_body(&b.with_extension("csv")));
}
