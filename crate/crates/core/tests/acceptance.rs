//! Acceptance criteria 1-14, one line each. Every criterion runs even when
//! an earlier one fails; the test fails at the end if any did.
//!
//! cargo test -p fracflow --test acceptance

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use fracflow::curvature::{hs_at, hs_at_kernel_form, QuadratureConfig};
use fracflow::experiments::{run_scenario, run_scenario_to, ScenarioConfig, ScenarioName, Verdict};
use fracflow::flow::{FlowMode, FlowState, Monitors, SchemeMode, StepControl};
use fracflow::gridfield::{Continuation, FarFieldModel, GridFunction, GridSpec};
use fracflow::kernel::{unit_ball_curvature, GsTable, KernelParams};
use fracflow::selfsimilar::{homothety_check, solve_expander_with_table, ExpanderOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kp(s: f64) -> KernelParams {
    KernelParams::new(1, s).unwrap()
}

/// Scenario verdicts, each scenario run once at its default settings.
struct Runs(BTreeMap<ScenarioName, Result<Verdict, String>>);

impl Runs {
    fn get(&mut self, name: ScenarioName) -> Result<Verdict, String> {
        self.0
            .entry(name)
            .or_insert_with(|| {
                let t = Instant::now();
                let v = run_scenario(&ScenarioConfig::new(name)).map_err(|e| e.to_string());
                eprintln!("  ({name} ran in {:.1} s)", t.elapsed().as_secs_f64());
                v
            })
            .clone()
    }
}

fn measured(v: &Verdict, key: &str) -> Result<f64, String> {
    v.measured.get(key).copied().ok_or_else(|| format!("{} reports no `{key}`", v.scenario))
}

fn c1_operator() -> Outcome {
    let t = Instant::now();
    let h = 1.0 / 64.0;
    let mut worst: f64 = 0.0;
    let mut worst_affine: f64 = 0.0;
    let mut count = 0;
    for p in common::pins().hs {
        if ![0.25, 0.5, 0.75].contains(&p.s) {
            continue;
        }
        let (g, cfg, idx) = common::corpus_field(&p.function, h, p.x);
        let e = (hs_at(kp(p.s), &g, idx, cfg).map_err(|e| e.to_string())? - p.value).abs();
        if p.function == "affine" {
            worst_affine = worst_affine.max(e);
        } else {
            worst = worst.max(e);
        }
        count += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 1e-4 && worst_affine <= 1e-8 && secs < 60.0 && count >= 12,
        format!("{count} points, max err {worst:.2e} (affine {worst_affine:.2e}), {secs:.1} s"),
    )
}

fn c2_cross_form() -> Outcome {
    let h = 1.0 / 64.0;
    let mut worst: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        for (name, x) in [("gaussian", 0.0), ("gaussian", 0.5), ("gaussian", 1.5), ("sine", 0.0), ("sine", 1.0), ("affine", 0.5)] {
            let (g, cfg, idx) = common::corpus_field(name, h, x);
            let a = hs_at(kp(s), &g, idx, cfg).map_err(|e| e.to_string())?;
            let b = hs_at_kernel_form(kp(s), &g, idx, cfg).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-5, format!("max |difference| {worst:.2e}"))
}

fn c3_scaling() -> Outcome {
    let h = 1.0 / 64.0;
    let mu = 2.0;
    let mut worst: f64 = 0.0;
    let cfg = QuadratureConfig::default();
    let g = common::gaussian(8.0, h);
    let gm = common::sampled_matched(16.0, h, |x| mu * (-(x / mu).powi(2)).exp());
    for s in [0.25, 0.5, 0.75] {
        for x in [0.0, 0.5, 1.0] {
            let a = hs_at(kp(s), &g, ((x + 8.0) / h).round() as usize, cfg).map_err(|e| e.to_string())?;
            let b = hs_at(kp(s), &gm, ((mu * x + 16.0) / h).round() as usize, cfg).map_err(|e| e.to_string())?;
            worst = worst.max((b - mu.powf(-s) * a).abs() / a.abs());
        }
    }
    check(worst <= 1e-3, format!("max relative deviation {worst:.2e}"))
}

/// Random Lipschitz data: a walk with slopes in [-1, 1].
fn random_lipschitz(rng: &mut ChaCha8Rng, m: usize, h: f64) -> Vec<f64> {
    let mut v = vec![rng.gen_range(-0.5..0.5)];
    for _ in 1..m {
        let last = *v.last().unwrap();
        v.push(last + h * rng.gen_range(-1.0..1.0));
    }
    v
}

fn c4_comparison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1.0 / 16.0;
    let grid = GridSpec::new(1, 2.0, h).unwrap();
    let m = grid.cells() + 1;
    let far = FarFieldModel::affine(vec![0.0], 0.0);
    let ctl = StepControl::default();
    let mut violations = 0usize;
    let mut compared = 0usize;
    for _ in 0..50 {
        let s = rng.gen_range(0.1..0.9);
        let table = Arc::new(GsTable::new(kp(s)));
        let lo = random_lipschitz(&mut rng, m, h);
        let gap = random_lipschitz(&mut rng, m, h);
        let shift = gap.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi: Vec<f64> = lo.iter().zip(&gap).map(|(a, g)| a + g - shift).collect();
        let mk = |v: Vec<f64>| {
            let f = GridFunction::from_values(grid, far.clone(), v, Continuation::Matched { decay: s }).unwrap();
            FlowState::with_table(f, FlowMode::Unrescaled, SchemeMode::Monotone, table.clone(), QuadratureConfig::default().drop_cell())
                .unwrap()
        };
        let (mut u, mut w) = (mk(lo), mk(hi));
        for _ in 0..200 {
            let dt = u.stable_dt(&ctl).map_err(|e| e.to_string())?.min(w.stable_dt(&ctl).map_err(|e| e.to_string())?);
            u = u.step(dt, &ctl).map_err(|e| e.to_string())?;
            w = w.step(dt, &ctl).map_err(|e| e.to_string())?;
            for (a, b) in u.field().values().iter().zip(w.field().values()) {
                compared += 1;
                if a > b {
                    violations += 1;
                }
            }
        }
    }
    check(violations == 0, format!("50 pairs x 200 steps, {compared} comparisons, {violations} violations"))
}

fn c5_lipschitz(runs: &mut Runs) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;
    let mut parts = vec![];
    for name in ScenarioName::ALL {
        let v = runs.get(name)?;
        let e = measured(&v, "lipschitz_excess")?;
        let bound = v.bounds["lipschitz_excess"];
        all &= e <= bound;
        worst = worst.max(e - bound);
        parts.push(format!("{name} {e:.1e}"));
    }
    check(all, format!("excess over lip(0): {}; worst margin {worst:.2e}", parts.join(", ")))
}

fn c6_plane(runs: &mut Runs) -> Outcome {
    let v = runs.get(ScenarioName::PlaneStability)?;
    let d = measured(&v, "distance_final")?.max(measured(&v, "distance_initial")?);
    check(
        d <= 1e-8 && v.params.horizon >= 2.0,
        format!("drift {d:.2e} over T={}", v.params.horizon),
    )
}

fn c7_periodic(runs: &mut Runs) -> Outcome {
    let v = runs.get(ScenarioName::PeriodicDecay)?;
    let ratio = measured(&v, "oscillation_max_ratio")?;
    let r2 = measured(&v, "fit_r2")?;
    let last = measured(&v, "final_sup_abs")?;
    check(
        ratio < 1.0 && r2 >= 0.99 && last <= 1e-2 && v.params.horizon == 5.0 && v.params.h == 1.0 / 128.0,
        format!("max oscillation ratio {ratio:.4}, r2 {r2:.6}, final sup|u| {last:.2e}"),
    )
}

fn c8_barrier(runs: &mut Runs) -> Outcome {
    let v = runs.get(ScenarioName::BumpDecay)?;
    let s = v.params.s;
    let oracle = fracflow_oracle::cbar_oracle(v.params.n + 1, s).map_err(|e| e.to_string())?;
    let lib = unit_ball_curvature(v.params.n + 1, s).map_err(|e| e.to_string())?;
    let used = measured(&v, "cbar")?;
    let violations = measured(&v, "barrier_violations")?;
    let checked = measured(&v, "barrier_points_checked")?;
    check(
        violations == 0.0 && checked > 0.0 && (used - oracle).abs() <= 1e-8 * oracle && (lib - used).abs() == 0.0,
        format!("{checked} points checked, {violations} violations, cbar {used:.10} (oracle {oracle:.10})"),
    )
}

fn c9_expander() -> Outcome {
    let s = 0.5;
    let table = Arc::new(GsTable::new(kp(s)));
    let cone = FarFieldModel::symmetric_cone(1, 0.5);
    let mut devs = vec![];
    let mut residuals = vec![];
    for h in [0.25, 0.125] {
        let mut opts = ExpanderOptions::new(GridSpec::new(1, 16.0, h).unwrap());
        opts.tol = 1e-5;
        let p = solve_expander_with_table(table.clone(), &cone, &opts).map_err(|e| e.to_string())?;
        residuals.push(p.residual_sup);
        let st = FlowState::with_table(p.profile.clone(), FlowMode::Unrescaled, SchemeMode::Accurate, table.clone(), opts.quad)
            .and_then(|st| st.at_time(1.0))
            .map_err(|e| e.to_string())?;
        let (_, traj) = st
            .evolve(2.0, &StepControl::with_cfl(0.9), &Monitors::uniform(1.0, 2.0, 4, true))
            .map_err(|e| e.to_string())?;
        let dev = homothety_check(&traj, &p.profile, 1.0).map_err(|e| e.to_string())?;
        let at2 = dev.iter().find(|d| (d.time - 2.0).abs() < 1e-12).ok_or("no snapshot at t=2")?;
        devs.push(at2.deviation);
    }
    let factor = devs[0] / devs[1];
    check(
        residuals.iter().all(|r| *r <= 5e-3) && factor >= 1.5,
        format!(
            "L=16, residual {:.2e} / {:.2e}, deviation at t=2 {:.3e} -> {:.3e} (factor {factor:.2})",
            residuals[0], residuals[1], devs[0], devs[1]
        ),
    )
}

fn c10_rescaled(runs: &mut Runs) -> Outcome {
    let cone = runs.get(ScenarioName::ConeConvergence)?;
    let straight = runs.get(ScenarioName::StraightPerturbation)?;
    let inc_a = measured(&cone, "distance_increase_after_tau1")?;
    let fin_a = measured(&cone, "distance_final")?;
    let inc_b = measured(&straight, "delta_1_distance_increase_after_tau1")?;
    let fin_b = measured(&straight, "delta_1_distance_final")?;
    let horizon_ok = cone.params.horizon == 6.0 && straight.params.horizon == 6.0;
    check(
        inc_a <= 0.0 && inc_b <= 0.0 && fin_a < 1e-2 && fin_b < 1e-2 && horizon_ok,
        format!(
            "compact bump: final {fin_a:.2e}, max increase {inc_a:.1e}; delta=1: final {fin_b:.2e}, max increase {inc_b:.1e}"
        ),
    )
}

fn c11_sup_w(runs: &mut Runs) -> Outcome {
    let v = runs.get(ScenarioName::BumpDecay)?;
    let inc = measured(&v, "sup_w_increase")?;
    check(inc <= 1e-6, format!("max increase of sup|w| {inc:.2e}"))
}

fn c12_holder(runs: &mut Runs) -> Outcome {
    let v = runs.get(ScenarioName::HolderModulus)?;
    let m = measured(&v, "holder_modulus")?;
    let vc = measured(&v, "holder_constant")?;
    check(m <= 1.1 * vc, format!("modulus {m:.4} vs v_C(0,1) {vc:.4}"))
}

fn c13_shrinker(runs: &mut Runs) -> Outcome {
    let v = runs.get(ScenarioName::ShrinkerRigidity)?;
    let r = measured(&v, "min_residual_over_scale")?;
    let a = measured(&v, "affine_min_sup_residual")?;
    check(r >= 0.1 && a <= 1e-10, format!("min residual / scale {r:.3}, affine {a:.1e}"))
}

fn files(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c14_determinism() -> Outcome {
    let mut parts = vec![];
    for name in [ScenarioName::BumpDecay, ScenarioName::PlaneStability] {
        let mut cfg = ScenarioConfig::new(name);
        if name == ScenarioName::PlaneStability {
            cfg.horizon = 0.5;
        }
        let mut outputs = vec![];
        for threads in [1, 4] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
            pool.install(|| run_scenario_to(&cfg, dir.path())).map_err(|e| e.to_string())?;
            outputs.push(files(dir.path()));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{name}: outputs differ between 1 and 4 threads"));
        }
        parts.push(format!("{name} ({} files)", outputs[0].len()));
    }
    Ok(format!("identical bytes for {}", parts.join(", ")))
}

fn main() {
    let mut runs = Runs(BTreeMap::new());
    let mut failed = vec![];
    let mut report = |k: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {k:>2} PASS {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                println!("criterion {k:>2} FAIL {name}: {d} [{secs:.1} s]");
                failed.push(k);
            }
        }
    };
    report(1, "operator correctness", &mut c1_operator);
    report(2, "cross-form agreement", &mut c2_cross_form);
    report(3, "scaling law", &mut c3_scaling);
    report(4, "discrete comparison", &mut c4_comparison);
    report(5, "Lipschitz preservation", &mut || c5_lipschitz(&mut runs));
    report(6, "plane stationarity", &mut || c6_plane(&mut runs));
    report(7, "periodic decay", &mut || c7_periodic(&mut runs));
    report(8, "ball barrier", &mut || c8_barrier(&mut runs));
    report(9, "expander", &mut c9_expander);
    report(10, "rescaled convergence", &mut || c10_rescaled(&mut runs));
    report(11, "sup-velocity monotonicity", &mut || c11_sup_w(&mut runs));
    report(12, "Holder modulus", &mut || c12_holder(&mut runs));
    report(13, "shrinker rigidity", &mut || c13_shrinker(&mut runs));
    report(14, "determinism", &mut c14_determinism);
    if failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
