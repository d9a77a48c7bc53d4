mod common;

use fracflow::experiments::{
    bump_radius, convergence_study, decay_fit, fit_log_linear, graph_distance, holder_modulus, quantity, run_scenario,
    run_scenario_to, ObservedOrder, ScenarioConfig, ScenarioName,
};
use fracflow::flow::{Diagnostics, FlowMode, Trajectory};
use fracflow::gridfield::{FarFieldModel, GridFunction};
use fracflow::kernel::KernelParams;
use fracflow::Error;

fn constant(l: f64, h: f64, c: f64) -> GridFunction {
    GridFunction::sample(common::spec(l, h), FarFieldModel::affine(vec![0.0], c), |_| c).unwrap()
}

fn synthetic(times: &[f64], q: impl Fn(f64) -> f64) -> Trajectory {
    Trajectory {
        mode: FlowMode::Unrescaled,
        params: KernelParams::new(1, 0.5).unwrap(),
        samples: times
            .iter()
            .map(|&t| Diagnostics {
                time: t,
                sup: q(t),
                inf: -q(t),
                oscillation: 2.0 * q(t),
                lipschitz: 0.0,
                sup_w: 0.0,
                steps: 0,
            })
            .collect(),
        snapshots: times.iter().map(|&t| (t, constant(1.0, 0.25, q(t)))).collect(),
    }
}

fn small_plane() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(ScenarioName::PlaneStability);
    cfg.half_width = 1.0;
    cfg.h = 1.0 / 8.0;
    cfg.horizon = 0.2;
    cfg.snapshots = 4;
    cfg
}

#[test]
fn graph_distance_examples() {
    assert_eq!(graph_distance(&constant(1.0, 0.25, 1.0), &constant(1.0, 0.25, -0.5)).unwrap(), 1.5);
    assert!(matches!(
        graph_distance(&constant(1.0, 0.25, 0.0), &constant(1.0, 0.125, 0.0)),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn log_linear_fit_examples() {
    let t: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
    let q: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
    let (rate, r2) = fit_log_linear(&t, &q).unwrap();
    assert!((rate + 2.0).abs() < 1e-12);
    assert!((r2 - 1.0).abs() < 1e-12);
    assert!(fit_log_linear(&t[..5], &q[..5]).is_err());
    let mut z = q.clone();
    z[3] = 0.0;
    assert!(fit_log_linear(&t, &z).is_err());
    let traj = synthetic(&t, |t| (-t).exp());
    let (rate, _) = decay_fit(&traj, "oscillation").unwrap();
    assert!((rate + 1.0).abs() < 1e-12);
    assert_eq!(quantity(&traj, "sup_abs").unwrap(), quantity(&traj, "sup").unwrap());
    assert!(quantity(&traj, "energy").is_err());
}

#[test]
fn holder_modulus_of_square_root() {
    // q = √t gives modulus 1 at exponent 1/2, attained from t = 0
    let t = [0.0, 0.25, 1.0, 4.0];
    let traj = synthetic(&t, f64::sqrt);
    assert!((holder_modulus(&traj, 0.5).unwrap() - 1.0).abs() < 1e-15);
    assert!(holder_modulus(&synthetic(&t[..2], f64::sqrt), 0.5).is_err());
}

#[test]
fn bump_radius_examples() {
    assert_eq!(bump_radius(0.01, 0.05), 0.0);
    assert!((bump_radius(1.0, (-4.0f64).exp()) - 2.0).abs() < 1e-12);
}

#[test]
fn plane_scenario_passes_and_reports() {
    let v = run_scenario(&small_plane()).unwrap();
    assert!(v.pass, "{:?}", v.failures());
    let json: serde_json::Value = serde_json::from_str(&v.to_json().unwrap()).unwrap();
    for key in ["scenario", "params", "pass", "measured", "bounds", "lower_bounds", "artifacts"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["scenario"], "plane_stability");
    assert!(v.measured["distance_final"] < 1e-8);
}

#[test]
fn run_scenario_to_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = run_scenario_to(&small_plane(), dir.path()).unwrap();
    for f in ["report.json", "monitors.csv", "snapshots/snap_0000.csv", "snapshots/snap_0004.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(v.artifacts.contains(&"report.json".to_string()));
    let csv = std::fs::read_to_string(dir.path().join("monitors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn bump_scenario_passes() {
    let v = run_scenario(&ScenarioConfig::new(ScenarioName::BumpDecay)).unwrap();
    assert!(v.pass, "{:?}", v.failures());
    assert_eq!(v.measured["barrier_violations"], 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_plane();
    cfg.s = 1.2;
    assert!(matches!(run_scenario(&cfg), Err(Error::Scenario { .. })));
    let mut cfg = small_plane();
    cfg.h = 0.0;
    assert!(run_scenario(&cfg).is_err());
    let mut cfg = small_plane();
    cfg.cfl = 2.0;
    assert!(run_scenario(&cfg).is_err());
    assert!(matches!("no_such".parse::<ScenarioName>(), Err(Error::UnknownScenario(_))));
}

#[test]
fn studies() {
    let mut base = small_plane();
    base.h = 0.25;
    let r = convergence_study("plane_curvature", &base, 3).unwrap();
    assert_eq!(r.spacings, vec![0.25, 0.125, 0.0625]);
    assert_eq!(r.quantities["hs_at_origin"].order, ObservedOrder::Exact);
    let r = convergence_study("gaussian_curvature", &base, 2).unwrap();
    assert_eq!(r.quantities["hs_at_origin"].order, ObservedOrder::Undetermined);
    assert!(convergence_study("plane_curvature", &base, 1).is_err());
}

#[test]
fn runs_are_deterministic() {
    let a = run_scenario(&small_plane()).unwrap().to_json().unwrap();
    let b = run_scenario(&small_plane()).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}
