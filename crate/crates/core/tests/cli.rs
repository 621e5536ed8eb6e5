//! End-to-end checks of the `rbl` binary.

use std::path::Path;
use std::process::{Command, Output};

fn rbl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbl"))
        .args(args)
        .current_dir(dir)
        .env("RBL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const SMALL: &str = r#"{
    "scenario": "rmse_vs_sensors",
    "sigma_list": [0.0, 0.1],
    "sensor_counts": [4, 8],
    "trials": 10
}"#;

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL);
    let out = rbl(&["run", &cfg, "--out-dir", "out"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("sigma,sensors,"));
}

#[test]
fn overrides_change_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL);
    let run = |seed: &str, out: &str| {
        let o = rbl(
            &["run", &cfg, "--seed", seed, "--trials", "7", "--out-dir", out],
            dir.path(),
        );
        assert!(o.status.success());
        std::fs::read_to_string(dir.path().join(out).join("results.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("2", "b");
    assert_ne!(a, b);
    assert!(a.lines().nth(1).unwrap().contains(",7,0,"));
}

#[test]
fn json_and_plot_data_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL);
    assert!(rbl(&["run", &cfg, "--format", "json"], dir.path())
        .status
        .success());
    assert!(dir.path().join("results.json").exists());
    assert!(rbl(&["run", &cfg, "--format", "plot-data"], dir.path())
        .status
        .success());
    let plot = std::fs::read_to_string(dir.path().join("plot_translation_rmse.csv")).unwrap();
    assert!(plot.starts_with("x,y,series"));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", SMALL);
    let out = rbl(&["validate", &good], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"scenario": "rmse_vs_sensors", "sensor_counts": [1]}"#,
    );
    let out = rbl(&["validate", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sensor_counts"));

    let broken = write(dir.path(), "broken.json", "{\"scenario\": \n 5}");
    let out = rbl(&["run", &broken], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(
        rbl(&["validate", "missing.json"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        rbl(&["run", &good, "--trials", "0"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn runtime_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL);
    // output directory path is occupied by a file
    write(dir.path(), "taken", "");
    let out = rbl(&["run", &cfg, "--out-dir", "taken"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_rbl"))
        .args(["run", &cfg])
        .current_dir(dir.path())
        .env("RBL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RBL_THREADS"));
}

#[test]
fn placement_writes_positions_and_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "place.json",
        r#"{
            "problem": {"num_anchors": 4, "dim": 2, "target_center": [0, 0], "anchor_radius": 20, "seed": 3},
            "evaluation": {"sigma_list": [0.0, 0.1], "trials": 20}
        }"#,
    );
    let out = rbl(&["placement", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("placement.json")).unwrap()).unwrap();
    assert_eq!(doc["positions"].as_array().unwrap().len(), 4);
    assert!((doc["frame_potential"].as_f64().unwrap() - 8.0).abs() < 1e-3);
    let eval = std::fs::read_to_string(dir.path().join("placement_evaluation.csv")).unwrap();
    assert_eq!(eval.lines().count(), 3);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"problem": {"num_anchors": 0, "dim": 2, "target_center": [0, 0], "anchor_radius": 20, "seed": 3}}"#,
    );
    assert_eq!(rbl(&["placement", &bad], dir.path()).status.code(), Some(2));
}

fn planar_edm() -> (Vec<Vec<f64>>, f64) {
    let pts: [[f64; 2]; 8] = [
        [0.0, 0.0],
        [3.0, 0.5],
        [1.0, 4.0],
        [-2.0, 2.5],
        [4.0, 3.0],
        [-1.0, -3.0],
        [2.5, -2.0],
        [5.0, -1.0],
    ];
    let d: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                .collect()
        })
        .collect();
    let hidden = d[0][7];
    (d, hidden)
}

#[test]
fn complete_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (d, truth) = planar_edm();
    let n = d.len();
    let values: Vec<Vec<serde_json::Value>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if (i, j) == (0, 7) || (i, j) == (7, 0) {
                        serde_json::Value::Null
                    } else {
                        d[i][j].into()
                    }
                })
                .collect()
        })
        .collect();
    let mask: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| (i, j) != (0, 7) && (i, j) != (7, 0)).collect())
        .collect();
    let doc = serde_json::json!({"values": values, "mask": mask, "dim": 2});
    let f = write(dir.path(), "edm.json", &doc.to_string());
    let out = rbl(&["complete", &f, "--format", "json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let done: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("completed.json")).unwrap()).unwrap();
    let got = done["values"][0][7].as_f64().unwrap();
    assert!((got - truth).abs() < 1e-6 * truth, "{got} vs {truth}");

    let text: String = (0..n)
        .map(|i| {
            let row: Vec<String> = (0..n)
                .map(|j| {
                    if (i, j) == (0, 7) || (i, j) == (7, 0) {
                        "NaN".into()
                    } else {
                        d[i][j].to_string()
                    }
                })
                .collect();
            row.join(",") + "\n"
        })
        .collect();
    let csv = write(dir.path(), "edm.csv", &text);
    assert_eq!(rbl(&["complete", &csv], dir.path()).status.code(), Some(2));
    let out = rbl(&["complete", &csv, "--dim", "2"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("completed.csv").exists());
}
