use std::path::Path;
use std::process::{Command, Output};

use isobayes::harness::{generate_dataset, save_csv, TestFunction};
use isobayes::rng::Substreams;

fn isobayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isobayes"))
        .args(args)
        .output()
        .unwrap()
}

fn write_data(dir: &Path) -> String {
    let path = dir.join("data.csv");
    let data = generate_dataset(TestFunction::F1, 120, 2, 0.3, &mut Substreams::new(1).stream(&[])).unwrap();
    save_csv(&data, &path).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fit_reports_a_monotone_surface() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let v = json(&isobayes(&["fit", "--data", &data, "--cells", "3,4"]));
    assert_eq!(v["cells"], serde_json::json!([3, 4]));
    let fitted: Vec<f64> = serde_json::from_value(v["fitted"].clone()).unwrap();
    assert_eq!(fitted.len(), 12);
    for r in 0..3 {
        for c in 0..4 {
            let here = fitted[4 * r + c];
            assert!(c == 3 || here <= fitted[4 * r + c + 1]);
            assert!(r == 2 || here <= fitted[4 * (r + 1) + c]);
        }
    }
}

#[test]
fn interval_with_recalibration_is_narrower() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let v = json(&isobayes(&[
        "interval",
        "--data",
        &data,
        "--x0",
        "0.5,0.5",
        "--draws",
        "400",
        "--recalibrate",
    ]));
    let width = |key: &str| v[key]["upper"].as_f64().unwrap() - v[key]["lower"].as_f64().unwrap();
    assert!(width("recalibrated") <= width("interval"));
    assert!(v["recalibrated"]["credibility"].as_f64().unwrap() < 0.95);
}

#[test]
fn one_sided_interval_has_no_lower_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let v = json(&isobayes(&[
        "interval",
        "--data",
        &data,
        "--x0",
        "0.3,0.6",
        "--draws",
        "200",
        "--sided",
        "one-sided",
    ]));
    assert!(v["interval"]["lower"].is_null());
    assert!(v["interval"]["upper"].is_f64());
}

#[test]
fn simulate_zb_writes_the_table_schema() {
    let out = isobayes(&[
        "simulate-zb",
        "--d",
        "1",
        "--kind",
        "2",
        "--m",
        "10",
        "--horizon",
        "2",
        "--outer",
        "10",
        "--inner",
        "5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,d,beta,z,cdf"));
    assert!(lines.next().unwrap().starts_with("2,1,1,0.0,"));
    assert_eq!(text.lines().count(), 1002);
}

#[test]
fn compare_dhz_on_one_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let v = json(&isobayes(&[
        "compare-dhz",
        "--data",
        &data,
        "--x0",
        "0.5,0.5",
        "--c-gamma",
        "0.05=2.0,0.1=1.6",
        "--draws",
        "200",
    ]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let len = |r: &serde_json::Value| r["dhz"]["upper"].as_f64().unwrap() - r["dhz"]["lower"].as_f64().unwrap();
    assert!(len(&rows[0]) > len(&rows[1]));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let bad_config = dir.path().join("bad.toml");
    std::fs::write(
        &bad_config,
        "function = \"f1\"\nn = 10\nlevels = [0.05]\nreplications = 1\nbogus = 1\n",
    )
    .unwrap();
    for args in [
        vec!["coverage", "--config", bad_config.to_str().unwrap()],
        vec!["compare-dhz", "--data", &data, "--x0", "0.5,0.5"],
        vec!["compare-dhz", "--data", &data, "--x0", "0.5,0.5", "--c-gamma", "0.05"],
        vec!["simulate-zb", "--d", "3"],
        vec!["simulate-zb", "--d", "2", "--beta", "1"],
        vec![
            "interval",
            "--data",
            &data,
            "--x0",
            "0.5,0.5",
            "--recalibrate",
            "--beta",
            "7,7",
        ],
        vec!["fit", "--data", &data, "--workers", "0"],
    ] {
        let out = isobayes(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn data_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,x2,y\n0.1,0.2,1\n0.3,nope,2\n").unwrap();
    let out = isobayes(&["fit", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3:"));

    let missing = dir.path().join("missing.csv");
    let out = isobayes(&["interval", "--data", missing.to_str().unwrap(), "--x0", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(3));

    let data = write_data(dir.path());
    let out = isobayes(&["interval", "--data", &data, "--x0", "0.5,1.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
