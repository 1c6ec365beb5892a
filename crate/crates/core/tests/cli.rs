use std::path::Path;
use std::process::{Command, Output};

fn forecast(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forecast"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn config(models: &str, learning_rate: f64) -> String {
    format!(
        r#"{{
  "station": {{"code": "SYN-BIOTOPO", "name": "Synthetic Biotopo",
    "position": {{"latitude_deg": 1.41, "longitude_deg": -78.28, "altitude_m": 512.0}},
    "region": "Pacific", "period": ["2014-01-01", "2014-02-10"]}},
  "track": "daily_insolation",
  "models": {models},
  "seed": 5,
  "learning_rate": {learning_rate},
  "data": {{"kind": "synthetic", "seed": 2, "n_days": 40, "gap_fraction": 0.1}}
}}"#
    )
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), config(r#"["arima", "slfnn"]"#, 0.01)).unwrap();
    let out = forecast(&["run", "--config", "c.json", "--out", "o", "--qc-report", "qc.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["o/report.json", "o/report.csv", "o/forecasts.csv", "qc.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let header = std::fs::read_to_string(dir.path().join("o/forecasts.csv")).unwrap();
    assert!(header.starts_with("date,hour,model,kc_pred,phys_pred,observed,provenance\n"));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = forecast(&["run", "--config", "absent.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("c.json"), config("[]", 0.01)).unwrap();
    let out = forecast(&["run", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(
        dir.path().join("c.json"),
        config(r#"["arima"]"#, 0.01).replace(r#""n_days": 40"#, r#""n_days": 5"#),
    )
    .unwrap();
    let out = forecast(&["run", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn all_diverged_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), config(r#"["slfnn", "mlfnn"]"#, 1e12)).unwrap();
    let out = forecast(&["run", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/report.json").is_file());
}

#[test]
fn synth_then_qc_and_impute() {
    let dir = tempfile::tempdir().unwrap();
    let out = forecast(&["synth", "--seed", "3", "--days", "60", "--gap-fraction", "0.2", "--out", "s"], dir.path());
    assert!(out.status.success());
    let hourly = std::fs::read_to_string(dir.path().join("s/hourly.csv")).unwrap();
    let daily = std::fs::read_to_string(dir.path().join("s/daily.csv")).unwrap();
    let merged = hourly + daily.split_once('\n').unwrap().1;
    std::fs::write(dir.path().join("all.csv"), merged).unwrap();
    let cfg = config(r#"["arima"]"#, 0.01).replace(
        r#"{"kind": "synthetic", "seed": 2, "n_days": 40, "gap_fraction": 0.1}"#,
        r#"{"kind": "csv", "path": "all.csv", "t_max_variable": "t_max", "t_min_variable": "t_min"}"#,
    );
    std::fs::write(dir.path().join("c.json"), cfg).unwrap();

    let out = forecast(&["qc", "--config", "c.json", "--out", "q"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("q/qc_report.json")).unwrap()).unwrap();
    assert_eq!(report["n_input"], 60 * 13);

    for mode in ["hourly", "daily"] {
        let out = forecast(
            &["impute", "--config", "c.json", "--out", "i", "--mode", mode, "--mask-eval", "0.1", "--seed", "1"],
            dir.path(),
        );
        assert!(out.status.success(), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.path().join("i/imputation_eval.json").is_file());
}

#[test]
fn gradcheck_reports_small_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = forecast(&["gradcheck", "--model", "mlfnn", "--instances", "3"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let err: f64 = text.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-4, "{text}");
}
