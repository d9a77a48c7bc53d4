use std::process::{Command, Output};

fn fracflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracflow")).args(args).output().expect("binary runs")
}

fn last_stderr_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(err.lines().last().expect("stderr line")).expect("json line")
}

const SMALL: [&str; 8] = ["--L", "1", "--h", "0.125", "--T", "0.1", "--snapshots", "2"];

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["simulate", "--scenario", "plane_stability", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    let o = fracflow(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["params"]["h"], 0.125);
    for f in ["report.json", "monitors.csv", "snapshots/snap_0002.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let o = fracflow(&["simulate", "--scenario", "no_such_thing"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(last_stderr_json(&o)["code"], 2);
    let o = fracflow(&["simulate", "--scenario", "plane_stability", "--s", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fracflow(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fracflow(&["bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "scenario = \"plane_stability\"\nhalf_width = 1.0\nh = 0.25\nhorizon = 0.1\nslope = 0.2\n").unwrap();
    let o = fracflow(&["simulate", "--config", cfg.to_str().unwrap(), "--h", "0.125"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["params"]["h"], 0.125);
    assert_eq!(report["params"]["slope"], 0.2);
    assert_eq!(report["params"]["half_width"], 1.0);

    std::fs::write(&cfg, "scenario = \"plane_stability\"\nnot_a_key = 3\n").unwrap();
    let o = fracflow(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let mut outs = vec![];
    for t in ["1", "4"] {
        let o = fracflow(&["simulate", "--scenario", "bump_decay", "--threads", t]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(o.stdout);
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn study_reports_exact_order_for_planes() {
    let o = fracflow(&["study", "--scenario", "plane_curvature", "--h", "0.25", "--L", "2", "--k", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["quantities"]["hs_at_origin"]["order"], "exact");
    let o = fracflow(&["study", "--scenario", "plane_curvature", "--k", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pin_oracles_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pins.json");
    let o = fracflow(&["pin-oracles", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pins: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["gs", "gs_infinity", "cbar", "hs"] {
        assert!(pins[key].as_array().is_some_and(|a| !a.is_empty()), "{key}");
    }
}
