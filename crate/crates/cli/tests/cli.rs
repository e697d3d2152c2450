use std::path::Path;
use std::process::{Command, Output};

fn crib_bse(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crib-bse"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn chart_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = crib_bse(&["sweep", "--preset", "chart3"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 63);
    for r in rows.iter().filter(|r| !r.starts_with("CvxCSV")) {
        assert!(r.contains(",inf,inf,false,"), "{r}");
    }
}

#[test]
fn chart_one_gaussian_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = crib_bse(&["sweep", "--preset", "chart1", "--format", "json"], dir.path());
    let v = json(&o);
    let at_one: Vec<&serde_json::Value> = v["rows"].as_array().unwrap().iter().filter(|r| r["value"] == 1.0).collect();
    assert_eq!(at_one.len(), 3);
    for r in at_one {
        assert_eq!(r["identifiable"], r["model"] == "CvxCSV");
        if r["identifiable"] == false {
            assert!(r["isr"].is_null() && r["isr_db"].is_null());
        }
    }
}

#[test]
fn custom_grid_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let o = crib_bse(&["sweep", "--axis", "alpha", "--grid", "0.5:2:4:log", "--models", "cvxcsv", "--tau", "0.5"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("CvxCSV,alpha,0.5,5,5000,10,0.5,0.0,0.5,"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["sweep", "--preset", "chart1", "--N", "5001"],
        vec!["sweep", "--axis", "gamma"],
        vec!["sweep", "--preset", "chart2", "--models", "ica"],
        vec!["sweep", "--preset", "chart2", "--format", "xml"],
        vec!["sweep", "--preset", "chart2", "--schedule", "cosine"],
        vec!["validate", "--suite", "nonsense"],
        vec!["simulate", "--N", "5001", "--T", "10", "--out", "x.json"],
        vec!["estimate", "--dataset", "missing.json"],
        vec!["frobnicate"],
    ] {
        let o = crib_bse(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = crib_bse(&["sweep", "--preset", "chart1", "--N", "5001"], dir.path());
    assert!(String::from_utf8_lossy(&o.stderr).contains("N:"));
}

#[test]
fn failing_suite_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = crib_bse(&["validate", "--suite", "sampler-moments", "--rho-factor", "1.1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["passed"], false);
    let o = crib_bse(&["validate", "--suite", "coincidence"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let check = &v["suites"][0]["checks"][0];
    assert!(check["measured"].is_number() && check["bound"].is_number() && check["pass"] == true);
}

#[test]
fn simulate_reports_block_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = crib_bse(&["simulate", "--d", "5", "--N", "5000", "--T", "10", "--out", "a.json"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("d=5 N=5000 T=10 N_b=500"));
    assert_eq!(text.lines().count(), 12);
    let file: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(file["header"]["N_b"], 500);
}

#[test]
fn oracle_estimate_has_zero_isr() {
    let dir = tempfile::tempdir().unwrap();
    crib_bse(&["simulate", "--d", "3", "--N", "2000", "--alpha", "0.5", "--geometry", "random", "--out", "d.bin", "--format", "bin"], dir.path());
    let o = crib_bse(&["estimate", "--dataset", "d.bin", "--init", "oracle"], dir.path());
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["isr"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["identifiable"], true);
    assert!(v["warning"].is_null());
}

#[test]
fn fitted_estimate_is_near_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    crib_bse(&["simulate", "--d", "3", "--N", "10000", "--alpha", "0.3", "--tau", "0.5", "--seed", "2", "--out", "d.json"], dir.path());
    let o = crib_bse(&["estimate", "--dataset", "d.json", "--restarts", "2"], dir.path());
    let v = json(&o);
    let ratio = v["ratio"].as_f64().unwrap();
    assert!(ratio > 0.01 && ratio < 20.0, "{ratio}");
}

#[test]
fn unidentifiable_dataset_carries_warning() {
    let dir = tempfile::tempdir().unwrap();
    crib_bse(&["simulate", "--d", "3", "--N", "1000", "--alpha", "1", "--tau", "1", "--out", "g.json"], dir.path());
    let o = crib_bse(&["estimate", "--dataset", "g.json", "--restarts", "1", "--max-iters", "20"], dir.path());
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["identifiable"], false);
    assert!(v["crib"].is_null() && v["ratio"].is_null());
    assert!(v["warning"].as_str().unwrap().contains("not identifiable"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"preset": "chart2", "N": 1000, "T": 5, "models": "cvxcsv"}"#).unwrap();
    let o = crib_bse(&["--config", "cfg.json", "sweep", "--N", "2000"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().nth(1).unwrap().starts_with("CvxCSV,gamma,0.0,5,2000,5,"));

    std::fs::write(dir.path().join("bad.json"), r#"{"preset": "chart2", "sensors": 4}"#).unwrap();
    let o = crib_bse(&["--config", "bad.json", "sweep"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sensors"));
}

#[test]
fn gnuplot_script_uses_relative_csv_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("plots")).unwrap();
    let o = crib_bse(&["sweep", "--preset", "chart2", "--out", "chart2.csv", "--gnuplot", "plots/chart2.gp"], dir.path());
    assert!(o.status.success());
    let script = std::fs::read_to_string(dir.path().join("plots/chart2.gp")).unwrap();
    assert!(script.contains("'../chart2.csv'"));
    assert!(!script.contains(dir.path().to_str().unwrap()));
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_crib-bse"))
            .args(["sweep", "--preset", "chart1"])
            .env("CRIB_BSE_THREADS", v)
            .current_dir(dir.path())
            .output()
            .unwrap()
    };
    let (one, two) = (run("1"), run("2"));
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(run("0").status.code(), Some(2));
}
