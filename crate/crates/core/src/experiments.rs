//! Named scenarios. Each one builds its data, evolves it, measures a few
//! quantities and compares them with the bound the corresponding theorem
//! gives; the outcome is a [`Verdict`].

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::curvature::{CurvatureOperator, QuadratureConfig};
use crate::error::{invalid, Error, Result};
use crate::flow::{FlowMode, FlowState, Monitors, SchemeMode, StepControl, Trajectory};
use crate::gridfield::{Continuation, FarFieldModel, GridFunction, GridSpec};
use crate::kernel::{unit_ball_curvature, GsTable, KernelParams};
use crate::selfsimilar::{
    curvature_decay, shrinker_residual, shrinker_scan, solve_expander_with_table, sup_on_core, ExpanderOptions,
    ExpanderProfile,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    PlaneStability,
    PeriodicDecay,
    BumpDecay,
    ConeConvergence,
    StraightPerturbation,
    ConvexConeUnrescaled,
    ShrinkerRigidity,
    HolderModulus,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 8] = [
        ScenarioName::PlaneStability,
        ScenarioName::PeriodicDecay,
        ScenarioName::BumpDecay,
        ScenarioName::ConeConvergence,
        ScenarioName::StraightPerturbation,
        ScenarioName::ConvexConeUnrescaled,
        ScenarioName::ShrinkerRigidity,
        ScenarioName::HolderModulus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::PlaneStability => "plane_stability",
            ScenarioName::PeriodicDecay => "periodic_decay",
            ScenarioName::BumpDecay => "bump_decay",
            ScenarioName::ConeConvergence => "cone_convergence",
            ScenarioName::StraightPerturbation => "straight_perturbation",
            ScenarioName::ConvexConeUnrescaled => "convex_cone_unrescaled",
            ScenarioName::ShrinkerRigidity => "shrinker_rigidity",
            ScenarioName::HolderModulus => "holder_modulus",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Treatment of the innermost lattice cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMode {
    /// Plain lattice sum, used by monotone runs.
    Drop,
    /// Analytic correction of the lattice defect.
    Correction,
}

/// Scenario parameters. Fields a scenario does not use are ignored;
/// [`ScenarioConfig::new`] fills scenario-specific defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub s: f64,
    pub n: usize,
    /// Lattice spacing.
    pub h: f64,
    /// Window half-width L.
    pub half_width: f64,
    /// Horizon: t for unrescaled runs, τ for rescaled ones.
    pub horizon: f64,
    pub cfl: f64,
    pub outer_radius: Option<f64>,
    /// Number of sampled times after the initial one.
    pub snapshots: usize,
    pub quadrature: QuadMode,
    pub scheme: SchemeMode,
    /// Size of the perturbation or of the periodic/bump data.
    pub amplitude: f64,
    /// Cone slope C (cone scenarios) or plane slope.
    pub slope: f64,
    /// Plane offset.
    pub offset: f64,
    pub period: f64,
    /// K of the straight-at-infinity perturbation K(1+|x|)^{1-δ}.
    pub perturbation_k: f64,
    /// δ values swept by straight_perturbation.
    pub deltas: Vec<f64>,
    /// ε of the bump barrier.
    pub epsilon: f64,
    /// Scenario tolerance (drift, final distance, ...).
    pub tolerance: f64,
    /// Relative slack for holder_modulus and ratios.
    pub slack: f64,
    pub expander_half_width: Option<f64>,
    pub expander_h: Option<f64>,
    pub expander_tol: f64,
    /// Shrinker scan c ∈ [0, c_max] in steps of c_step.
    pub c_max: f64,
    pub c_step: f64,
}

impl ScenarioConfig {
    pub fn new(name: ScenarioName) -> Self {
        let mut c = ScenarioConfig {
            name,
            s: 0.5,
            n: 1,
            h: 1.0 / 32.0,
            half_width: 4.0,
            horizon: 2.0,
            cfl: 0.5,
            outer_radius: None,
            snapshots: 20,
            quadrature: QuadMode::Drop,
            scheme: SchemeMode::Monotone,
            amplitude: 0.0,
            slope: 0.5,
            offset: 0.0,
            period: 1.0,
            perturbation_k: 0.1,
            deltas: vec![1.0, 0.5],
            epsilon: 0.05,
            tolerance: 1e-8,
            slack: 0.1,
            expander_half_width: None,
            expander_h: None,
            expander_tol: 1e-5,
            c_max: 2.0,
            c_step: 0.05,
        };
        match name {
            ScenarioName::PlaneStability => {
                c.slope = 0.3;
                c.offset = 0.2;
            }
            ScenarioName::PeriodicDecay => {
                c.h = 1.0 / 128.0;
                c.half_width = 0.5;
                c.horizon = 5.0;
                c.cfl = 0.9;
                c.snapshots = 50;
                c.amplitude = 0.5;
                c.tolerance = 1e-2;
            }
            ScenarioName::BumpDecay => {
                c.horizon = 0.08;
                c.amplitude = 1.0;
                c.tolerance = 1e-6;
            }
            ScenarioName::ConeConvergence => {
                c.horizon = 6.0;
                c.cfl = 0.9;
                c.snapshots = 30;
                c.amplitude = 0.5;
                c.tolerance = 1e-2;
                c.quadrature = QuadMode::Correction;
                c.scheme = SchemeMode::Accurate;
            }
            ScenarioName::StraightPerturbation => {
                c.horizon = 6.0;
                c.cfl = 0.9;
                c.snapshots = 30;
                c.tolerance = 2e-2;
                c.quadrature = QuadMode::Correction;
                c.scheme = SchemeMode::Accurate;
            }
            ScenarioName::ConvexConeUnrescaled => {
                c.amplitude = 0.5;
                c.tolerance = 0.5;
                c.quadrature = QuadMode::Correction;
                c.scheme = SchemeMode::Accurate;
            }
            ScenarioName::ShrinkerRigidity => {
                c.quadrature = QuadMode::Correction;
                c.scheme = SchemeMode::Accurate;
                c.tolerance = 1e-10;
            }
            ScenarioName::HolderModulus => {
                c.h = 1.0 / 64.0;
                c.half_width = 0.5;
                c.horizon = 0.5;
                c.amplitude = 0.5 / (2.0 * PI);
                c.expander_half_width = Some(4.0);
                c.expander_h = Some(1.0 / 32.0);
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        KernelParams::new(self.n, self.s)?;
        self.grid()?;
        StepControl::with_cfl(self.cfl).validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        if self.snapshots < 1 {
            return Err(invalid("need at least one sample"));
        }
        let finite = [
            self.amplitude,
            self.slope,
            self.offset,
            self.period,
            self.perturbation_k,
            self.epsilon,
            self.tolerance,
            self.slack,
            self.expander_tol,
            self.c_max,
            self.c_step,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("scenario parameters must be finite"));
        }
        if self.amplitude < 0.0 || !(self.tolerance > 0.0) || self.slack < 0.0 || !(self.expander_tol > 0.0) {
            return Err(invalid("amplitude, tolerance, slack and expander tolerance must be nonnegative (tolerances positive)"));
        }
        match self.name {
            ScenarioName::PeriodicDecay | ScenarioName::HolderModulus => {
                if !(self.period > 0.0) {
                    return Err(invalid("period must be positive"));
                }
                if self.name == ScenarioName::PeriodicDecay && self.snapshots < 10 {
                    return Err(invalid("periodic_decay needs at least 10 samples for the fit"));
                }
                if self.name == ScenarioName::HolderModulus && self.snapshots < 2 {
                    return Err(invalid("holder_modulus needs at least 3 snapshots"));
                }
                let m = 2.0 * self.half_width / self.period;
                if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
                    return Err(invalid("window length must be a multiple of the period"));
                }
            }
            ScenarioName::BumpDecay => {
                if !(self.epsilon > 0.0) {
                    return Err(invalid("epsilon must be positive"));
                }
            }
            ScenarioName::StraightPerturbation => {
                if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
                    return Err(invalid("deltas must lie in (0, 1]"));
                }
                if !(self.perturbation_k >= 0.0) {
                    return Err(invalid("K must be nonnegative"));
                }
            }
            ScenarioName::ShrinkerRigidity => {
                if !(self.c_step > 0.0 && self.c_max >= 0.0) {
                    return Err(invalid("shrinker scan needs c_step > 0 and c_max >= 0"));
                }
            }
            _ => {}
        }
        if let (Some(l), Some(h)) = (self.expander_half_width, self.expander_h) {
            GridSpec::new(self.n, l, h)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<KernelParams> {
        KernelParams::new(self.n, self.s)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.half_width, self.h)
    }

    pub fn quad(&self) -> QuadratureConfig {
        let mut q = QuadratureConfig::default();
        if self.quadrature == QuadMode::Drop {
            q = q.drop_cell();
        }
        q.outer_radius = self.outer_radius;
        q
    }

    pub fn step_control(&self) -> StepControl {
        StepControl::with_cfl(self.cfl)
    }

    fn expander_grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.n,
            self.expander_half_width.unwrap_or(self.half_width),
            self.expander_h.unwrap_or(self.h),
        )
    }
}

/// Outcome of a scenario. `pass` holds iff every bounded measurement is
/// within its bound (upper bounds in `bounds`, lower ones in
/// `lower_bounds`); measurements without a bound are informational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub scenario: ScenarioName,
    pub params: ScenarioConfig,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    pub lower_bounds: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl Verdict {
    fn new(cfg: &ScenarioConfig) -> Self {
        Verdict {
            scenario: cfg.name,
            params: cfg.clone(),
            pass: true,
            measured: BTreeMap::new(),
            bounds: BTreeMap::new(),
            lower_bounds: BTreeMap::new(),
            artifacts: vec![],
        }
    }

    fn info(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }

    fn at_most(&mut self, key: &str, v: f64, bound: f64) {
        self.measured.insert(key.to_string(), v);
        self.bounds.insert(key.to_string(), bound);
    }

    fn at_least(&mut self, key: &str, v: f64, bound: f64) {
        self.measured.insert(key.to_string(), v);
        self.lower_bounds.insert(key.to_string(), bound);
    }

    fn settle(&mut self) {
        let up = self.bounds.iter().all(|(k, b)| self.measured.get(k).is_some_and(|v| *v <= *b));
        let lo = self.lower_bounds.iter().all(|(k, b)| self.measured.get(k).is_some_and(|v| *v >= *b));
        self.pass = up && lo;
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = vec![];
        for (k, b) in &self.bounds {
            if !self.measured.get(k).is_some_and(|v| v <= b) {
                out.push(k.clone());
            }
        }
        for (k, b) in &self.lower_bounds {
            if !self.measured.get(k).is_some_and(|v| v >= b) {
                out.push(k.clone());
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// sup |u - v| over the nodes. Both must live on the same grid.
pub fn graph_distance(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", u.grid(), v.grid())));
    }
    Ok(u.values().iter().zip(v.values()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Monitored quantity of a trajectory.
pub fn quantity(traj: &Trajectory, name: &str) -> Result<Vec<f64>> {
    let f: fn(&crate::flow::Diagnostics) -> f64 = match name {
        "sup" => |d| d.sup,
        "inf" => |d| d.inf,
        "oscillation" => |d| d.oscillation,
        "lipschitz" => |d| d.lipschitz,
        "sup_w" => |d| d.sup_w,
        "sup_abs" => |d| d.sup.abs().max(d.inf.abs()),
        other => return Err(invalid(format!("unknown monitored quantity `{other}`"))),
    };
    Ok(traj.samples.iter().map(f).collect())
}

/// Least-squares fit of log q against t: (slope, r²).
pub fn decay_fit(traj: &Trajectory, name: &str) -> Result<(f64, f64)> {
    let q = quantity(traj, name)?;
    fit_log_linear(&traj.times(), &q)
}

/// Least-squares fit of log q = a + rate·t.
pub fn fit_log_linear(t: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if t.len() != q.len() || t.len() < 10 {
        return Err(invalid(format!("decay fit needs at least 10 samples, got {}", q.len())));
    }
    if let Some(v) = q.iter().find(|v| !(**v > 0.0)) {
        return Err(invalid(format!("decay fit needs positive samples, got {v}")));
    }
    let m = t.len() as f64;
    let y: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    let tm = t.iter().sum::<f64>() / m;
    let ym = y.iter().sum::<f64>() / m;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for (a, b) in t.iter().zip(&y) {
        stt += (a - tm) * (a - tm);
        sty += (a - tm) * (b - ym);
        syy += (b - ym) * (b - ym);
    }
    if stt == 0.0 {
        return Err(invalid("decay fit needs distinct sample times"));
    }
    let rate = sty / stt;
    // constant data: perfect fit with zero slope
    let r2 = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Ok((rate, r2))
}

/// max over snapshot pairs of sup|u(t) - u(r)| / |t - r|^exponent.
pub fn holder_modulus(traj: &Trajectory, exponent: f64) -> Result<f64> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(invalid(format!("holder modulus needs at least 3 snapshots, got {}", snaps.len())));
    }
    let mut best: f64 = 0.0;
    for a in 0..snaps.len() {
        for b in a + 1..snaps.len() {
            let dt = (snaps[b].0 - snaps[a].0).abs();
            if dt == 0.0 {
                continue;
            }
            let d = graph_distance(&snaps[a].1, &snaps[b].1)?;
            best = best.max(d / dt.powf(exponent));
        }
    }
    Ok(best)
}

/// Grid function from a closure; the exterior continues the far field
/// plus the boundary mismatch (no strict match needed).
fn build(grid: GridSpec, far: FarFieldModel, decay: f64, f: impl Fn(&[f64]) -> f64) -> Result<GridFunction> {
    let n = grid.n;
    let cont = if far.is_periodic() {
        Continuation::Strict
    } else {
        Continuation::Matched { decay }
    };
    let probe = GridFunction::from_values(grid, far.clone(), vec![0.0; grid_len(&grid, far.is_periodic())], cont)?;
    let values = (0..probe.len()).map(|i| f(&probe.coords(i)[..n])).collect();
    GridFunction::from_values(grid, far, values, cont)
}

fn grid_len(grid: &GridSpec, periodic: bool) -> usize {
    let p = if periodic { grid.cells() } else { grid.cells() + 1 };
    p.pow(grid.n as u32)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// (1 - |x|²)²₊
fn compact_bump(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - r2) * (1.0 - r2)
    }
}

fn max_increase(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn lipschitz_excess(trajs: &[&Trajectory]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for t in trajs {
        if let Some(first) = t.samples.first() {
            for d in &t.samples {
                worst = worst.max(d.lipschitz - first.lipschitz);
            }
        }
    }
    worst
}

type ExpanderCache = Mutex<HashMap<String, Arc<ExpanderProfile>>>;

fn expander_cache() -> &'static ExpanderCache {
    static CACHE: OnceLock<ExpanderCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Expander of C|x| on the scenario's expander grid, memoized per process.
pub fn scenario_expander(cfg: &ScenarioConfig, slope: f64) -> Result<Arc<ExpanderProfile>> {
    expander_for(cfg, slope, cfg.scheme, cfg.quad())
}

fn expander_for(cfg: &ScenarioConfig, slope: f64, scheme: SchemeMode, quad: QuadratureConfig) -> Result<Arc<ExpanderProfile>> {
    let grid = cfg.expander_grid()?;
    // slopes equal up to rounding share one profile
    let key = serde_json::to_string(&(cfg.s, grid, (slope * 1e12).round(), cfg.expander_tol, quad, scheme))?;
    if let Some(p) = expander_cache().lock().expect("expander cache").get(&key) {
        return Ok(p.clone());
    }
    let mut opts = ExpanderOptions::new(grid);
    opts.tol = cfg.expander_tol;
    opts.quad = quad;
    opts.scheme = scheme;
    let table = Arc::new(GsTable::new(cfg.params()?));
    let p = Arc::new(solve_expander_with_table(
        table,
        &FarFieldModel::symmetric_cone(cfg.n, slope),
        &opts,
    )?);
    expander_cache().lock().expect("expander cache").insert(key, p.clone());
    Ok(p)
}

/// sup over |x|∞ ≤ L/2 of |u - r|, r evaluated at the nodes of u.
fn core_distance(u: &GridFunction, r: impl Fn(&[f64]) -> f64) -> f64 {
    let n = u.n();
    let d: Vec<f64> = (0..u.len())
        .map(|i| u.values()[i] - r(&u.coords(i)[..n]))
        .collect();
    sup_on_core(u, &d, 0.5)
}

/// A run's output: verdict plus the trajectories behind it.
pub struct ScenarioRun {
    pub verdict: Verdict,
    /// (subdirectory, trajectory); the empty name is the main run.
    pub trajectories: Vec<(String, Trajectory)>,
}

/// Run a scenario; nothing is written.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Verdict> {
    Ok(execute(cfg)?.verdict)
}

/// Run a scenario and write report.json, monitors.csv and snapshots/ into
/// `out` (sweeps get one subdirectory per member).
pub fn run_scenario_to(cfg: &ScenarioConfig, out: &Path) -> Result<Verdict> {
    let run = execute(cfg)?;
    let mut verdict = run.verdict;
    std::fs::create_dir_all(out)?;
    for (sub, traj) in &run.trajectories {
        let dir = if sub.is_empty() { out.to_path_buf() } else { out.join(sub) };
        traj.write(&dir)?;
        let prefix = if sub.is_empty() { String::new() } else { format!("{sub}/") };
        verdict.artifacts.push(format!("{prefix}monitors.csv"));
        if !traj.snapshots.is_empty() {
            verdict.artifacts.push(format!("{prefix}snapshots/"));
        }
    }
    verdict.artifacts.push("report.json".into());
    std::fs::write(out.join("report.json"), verdict.to_json()?)?;
    Ok(verdict)
}

/// Run a scenario, keeping the trajectories.
pub fn execute(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let wrap = |e: Error| Error::Scenario {
        scenario: cfg.name.to_string(),
        source: Box::new(e),
    };
    cfg.validate().map_err(wrap)?;
    let mut run = match cfg.name {
        ScenarioName::PlaneStability => plane_stability(cfg),
        ScenarioName::PeriodicDecay => periodic_decay(cfg),
        ScenarioName::BumpDecay => bump_decay(cfg),
        ScenarioName::ConeConvergence => cone_convergence(cfg),
        ScenarioName::StraightPerturbation => straight_perturbation(cfg),
        ScenarioName::ConvexConeUnrescaled => convex_cone_unrescaled(cfg),
        ScenarioName::ShrinkerRigidity => shrinker_rigidity(cfg),
        ScenarioName::HolderModulus => holder_scenario(cfg),
    }
    .map_err(wrap)?;
    run.verdict.settle();
    Ok(run)
}

fn evolve(cfg: &ScenarioConfig, u0: GridFunction, mode: FlowMode, t0: f64) -> Result<(FlowState, Trajectory)> {
    let table = Arc::new(GsTable::new(cfg.params()?));
    let state = FlowState::with_table(u0, mode, cfg.scheme, table, cfg.quad())?.at_time(t0)?;
    let monitors = Monitors::uniform(t0, t0 + cfg.horizon, cfg.snapshots, true);
    state.evolve(t0 + cfg.horizon, &cfg.step_control(), &monitors)
}

fn plane_stability(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let n = cfg.n;
    let slope = vec![cfg.slope; 1].into_iter().chain(std::iter::repeat(0.0)).take(n).collect::<Vec<_>>();
    let plane = FarFieldModel::affine(slope, cfg.offset);
    let pl = plane.clone();
    let a = cfg.amplitude;
    let u0 = build(cfg.grid()?, plane.clone(), cfg.s, |x| {
        pl.base(x).unwrap_or(0.0) + a * (-x.iter().map(|v| v * v).sum::<f64>()).exp()
    })?;
    let reference = build(cfg.grid()?, plane.clone(), cfg.s, |x| plane.base(x).unwrap_or(0.0))?;
    let (_, traj) = evolve(cfg, u0, FlowMode::Unrescaled, 0.0)?;
    let mut dist = vec![];
    let mut above = vec![];
    let mut below = vec![];
    for (_, u) in &traj.snapshots {
        dist.push(graph_distance(u, &reference)?);
        let d: Vec<f64> = u.values().iter().zip(reference.values()).map(|(a, b)| a - b).collect();
        above.push(d.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        below.push(d.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let mut v = Verdict::new(cfg);
    let tol = cfg.tolerance;
    v.at_most("distance_final", *dist.last().unwrap_or(&0.0), a + tol);
    v.at_most("distance_increase", max_increase(&dist).max(0.0), tol);
    // single-signed perturbation: sup(u - plane) ↓ and inf(u - plane) ↑
    v.at_most("envelope_sup_increase", max_increase(&above).max(0.0), tol);
    let neg: Vec<f64> = below.iter().map(|b| -b).collect();
    v.at_most("envelope_inf_decrease", max_increase(&neg).max(0.0), tol);
    v.at_most("lipschitz_excess", lipschitz_excess(&[&traj]), 10.0 * cfg.h);
    v.info("distance_initial", dist[0]);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![(String::new(), traj)],
    })
}

fn periodic_data(cfg: &ScenarioConfig) -> Result<GridFunction> {
    let far = FarFieldModel::periodic(vec![cfg.period; cfg.n]);
    let (a, p) = (cfg.amplitude, cfg.period);
    // u(x + p/2 e₁) = -u(x)
    build(cfg.grid()?, far, cfg.s, |x| {
        let mut v = a * (2.0 * PI * x[0] / p).sin();
        if x.len() == 2 {
            v *= (2.0 * PI * x[1] / p).cos();
        }
        v
    })
}

fn periodic_decay(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let u0 = periodic_data(cfg)?;
    let (_, traj) = evolve(cfg, u0, FlowMode::Unrescaled, 0.0)?;
    let osc = quantity(&traj, "oscillation")?;
    let ratio = osc
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
        .fold(f64::NEG_INFINITY, f64::max);
    let (rate, r2) = decay_fit(&traj, "oscillation")?;
    let last = traj.last().expect("trajectory has samples");
    let mut v = Verdict::new(cfg);
    // strictly decreasing: every ratio below 1
    v.at_most("oscillation_max_ratio", ratio, 1.0 - f64::EPSILON);
    v.at_most("decay_rate", rate, 0.0);
    v.at_least("fit_r2", r2, 0.99);
    v.at_most("final_sup_abs", last.sup.abs().max(last.inf.abs()), cfg.tolerance);
    v.at_most("lipschitz_excess", lipschitz_excess(&[&traj]), 10.0 * cfg.h);
    v.info("final_oscillation", last.oscillation);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![(String::new(), traj)],
    })
}

/// Radius beyond which a e^{-|x|²} ≤ ε.
pub fn bump_radius(amplitude: f64, epsilon: f64) -> f64 {
    if amplitude <= epsilon {
        0.0
    } else {
        (amplitude / epsilon).ln().sqrt()
    }
}

fn bump_decay(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let a = cfg.amplitude;
    let far = FarFieldModel::affine(vec![0.0; cfg.n], 0.0);
    let u0 = build(cfg.grid()?, far, cfg.s, |x| a * (-x.iter().map(|v| v * v).sum::<f64>()).exp())?;
    let (_, traj) = evolve(cfg, u0, FlowMode::Unrescaled, 0.0)?;
    let s = cfg.s;
    let cbar = unit_ball_curvature(cfg.n + 1, s)?;
    let eps = cfg.epsilon;
    let r0 = bump_radius(a, eps);
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for (t, u) in &traj.snapshots {
        if *t <= 0.0 {
            continue;
        }
        for i in 0..u.len() {
            let r = norm(&u.coords(i)[..cfg.n]);
            if r <= r0 {
                continue;
            }
            let d = r - r0;
            if *t > d.powf(s + 1.0) / (2.0 * (s + 1.0) * cbar) {
                continue;
            }
            let bound = eps + cbar * 2f64.powf(s / (s + 1.0)) * t / d.powf(s);
            checked += 1;
            let ex = u.values()[i] - bound;
            worst = worst.max(ex);
            if ex > 0.0 {
                violations += 1;
            }
        }
    }
    let sup_w = quantity(&traj, "sup_w")?;
    let mut v = Verdict::new(cfg);
    v.at_most("barrier_violations", violations as f64, 0.0);
    v.at_least("barrier_points_checked", checked as f64, 1.0);
    v.info("barrier_max_excess", worst);
    v.info("barrier_radius", r0);
    v.info("cbar", cbar);
    v.at_most("sup_w_increase", max_increase(&sup_w), cfg.tolerance);
    v.at_most("lipschitz_excess", lipschitz_excess(&[&traj]), 10.0 * cfg.h);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![(String::new(), traj)],
    })
}

/// Distance to the expander profile at each snapshot of a rescaled run,
/// checked for monotone decrease once τ ≥ 1 and against the tolerance at
/// the end.
fn rescaled_distances(traj: &Trajectory, p: &GridFunction) -> Vec<(f64, f64)> {
    traj.snapshots
        .iter()
        .map(|(tau, u)| (*tau, core_distance(u, |x| p.evaluate(x))))
        .collect()
}

fn record_rescaled(v: &mut Verdict, prefix: &str, d: &[(f64, f64)], tol: f64) {
    let late: Vec<f64> = d.iter().filter(|(t, _)| *t >= 1.0 - 1e-12).map(|(_, x)| *x).collect();
    let inc = if late.len() >= 2 { max_increase(&late) } else { 0.0 };
    v.at_most(&format!("{prefix}distance_increase_after_tau1"), inc, 0.0);
    v.at_most(&format!("{prefix}distance_final"), d.last().map(|x| x.1).unwrap_or(f64::NAN), tol);
    v.info(&format!("{prefix}distance_initial"), d.first().map(|x| x.1).unwrap_or(f64::NAN));
}

fn cone_data(cfg: &ScenarioConfig, pert: impl Fn(&[f64]) -> f64, far: FarFieldModel, decay: f64) -> Result<GridFunction> {
    let cone = FarFieldModel::symmetric_cone(cfg.n, cfg.slope);
    build(cfg.grid()?, far, decay, |x| cone.base(x).unwrap_or(0.0) + pert(x))
}

fn cone_convergence(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let p = scenario_expander(cfg, cfg.slope)?;
    let a = cfg.amplitude;
    let u0 = cone_data(cfg, |x| a * compact_bump(x), FarFieldModel::symmetric_cone(cfg.n, cfg.slope), cfg.s)?;
    let (_, traj) = evolve(cfg, u0, FlowMode::Rescaled, 0.0)?;
    let d = rescaled_distances(&traj, &p.profile);
    let mut v = Verdict::new(cfg);
    record_rescaled(&mut v, "", &d, cfg.tolerance);
    v.at_most("lipschitz_excess", lipschitz_excess(&[&traj]), 10.0 * cfg.h);
    v.info("expander_residual_sup", p.residual_sup);
    v.info("expander_at_origin", p.profile_at_origin());
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![(String::new(), traj)],
    })
}

fn straight_perturbation(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let p = scenario_expander(cfg, cfg.slope)?;
    let k = cfg.perturbation_k;
    let mut v = Verdict::new(cfg);
    let mut trajs = vec![];
    for &delta in &cfg.deltas {
        let mut far = FarFieldModel::symmetric_cone(cfg.n, cfg.slope);
        if delta < 1.0 && k > 0.0 {
            far = far.with_perturbation_decay(k, delta);
        }
        // beyond the window the mismatch decays like the expander tail,
        // the (K, δ) envelope is only recorded
        let u0 = cone_data(cfg, |x| k * (1.0 + norm(x)).powf(1.0 - delta), far, cfg.s)?;
        let (_, traj) = evolve(cfg, u0, FlowMode::Rescaled, 0.0)?;
        let d = rescaled_distances(&traj, &p.profile);
        record_rescaled(&mut v, &format!("delta_{delta}_"), &d, cfg.tolerance);
        trajs.push((format!("delta_{delta}"), traj));
    }
    let refs: Vec<&Trajectory> = trajs.iter().map(|(_, t)| t).collect();
    v.at_most("lipschitz_excess", lipschitz_excess(&refs), 10.0 * cfg.h);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: trajs,
    })
}

fn convex_cone_unrescaled(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let p = scenario_expander(cfg, cfg.slope)?;
    let a = cfg.amplitude;
    let s = cfg.s;
    let u0 = cone_data(cfg, |x| a * compact_bump(x), FarFieldModel::symmetric_cone(cfg.n, cfg.slope), cfg.s)?;
    let (_, traj) = evolve(cfg, u0, FlowMode::Unrescaled, 0.0)?;
    let cone = FarFieldModel::symmetric_cone(cfg.n, cfg.slope);
    // ū(x,t) = λ p(x/λ), λ = ((s+1)t)^{1/(s+1)}
    let mut d = vec![];
    for (t, u) in &traj.snapshots {
        let dist = if *t <= 0.0 {
            core_distance(u, |x| cone.base(x).unwrap_or(0.0))
        } else {
            let lam = ((s + 1.0) * t).powf(1.0 / (s + 1.0));
            core_distance(u, |x| {
                let y: Vec<f64> = x.iter().map(|v| v / lam).collect();
                lam * p.profile.evaluate(&y)
            })
        };
        d.push(dist);
    }
    let decay = curvature_decay(&traj, cfg.quad())?;
    let mut v = Verdict::new(cfg);
    let d0 = d[0];
    let dl = *d.last().expect("samples");
    v.at_most("distance_ratio_final", if d0 > 0.0 { dl / d0 } else { 0.0 }, cfg.tolerance);
    v.info("distance_initial", d0);
    v.info("distance_final", dl);
    v.info("curvature_decay_band", decay.band);
    v.at_most("lipschitz_excess", lipschitz_excess(&[&traj]), 10.0 * cfg.h);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![(String::new(), traj)],
    })
}

fn shrinker_rigidity(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let p = scenario_expander(cfg, cfg.slope)?;
    let params = cfg.params()?;
    let scan = shrinker_scan(params, &p.profile, cfg.c_max, cfg.c_step, cfg.quad())?;
    let mut v = Verdict::new(cfg);
    v.at_least("min_residual_over_scale", scan.min_sup_residual / scan.curvature_scale, 0.1);
    v.info("min_sup_residual", scan.min_sup_residual);
    v.info("argmin_speed", scan.argmin_speed);
    v.info("curvature_scale", scan.curvature_scale);
    // hyperplanes are shrinkers with c = 0
    let g = cfg.expander_grid()?;
    let mut slope = vec![0.0; cfg.n];
    slope[0] = cfg.slope;
    let plane = FarFieldModel::affine(slope, 0.0);
    let pl = plane.clone();
    let flat = GridFunction::sample(g, plane, |x| pl.base(x).unwrap_or(0.0))?;
    let scan_flat = shrinker_scan(params, &flat, cfg.c_max, cfg.c_step, cfg.quad())?;
    let r0 = shrinker_residual(params, &flat, 0.0, cfg.quad())?;
    v.at_most("affine_min_sup_residual", scan_flat.min_sup_residual, cfg.tolerance);
    v.info("affine_residual_c0", sup_on_core(&flat, &r0, 0.5));
    let cone_lip = FarFieldModel::symmetric_cone(cfg.n, cfg.slope).lipschitz();
    v.at_most("lipschitz_excess", p.profile.lipschitz_constant() - cone_lip, 10.0 * g.spacing);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![],
    })
}

fn holder_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let u0 = periodic_data(cfg)?;
    let c = u0.lipschitz_constant();
    // sup |∇(A sin(kx) cos(ky))| = kA as in 1D
    let lip_exact = 2.0 * PI * cfg.amplitude / cfg.period;
    // v_C always from the accurate profile, whatever scheme the run uses
    let quad = QuadratureConfig {
        outer_radius: cfg.outer_radius,
        ..QuadratureConfig::default()
    };
    let p = expander_for(cfg, lip_exact, SchemeMode::Accurate, quad)?;
    let vc = p.holder_constant();
    let (_, traj) = evolve(cfg, u0, FlowMode::Unrescaled, 0.0)?;
    let m = holder_modulus(&traj, 1.0 / (cfg.s + 1.0))?;
    let mut v = Verdict::new(cfg);
    v.at_most("holder_modulus", m, vc * (1.0 + cfg.slack));
    v.info("holder_constant", vc);
    v.info("data_lipschitz", c);
    v.at_most("lipschitz_excess", lipschitz_excess(&[&traj]), 10.0 * cfg.h);
    Ok(ScenarioRun {
        verdict: v,
        trajectories: vec![(String::new(), traj)],
    })
}

/// Observed convergence order of one quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservedOrder {
    /// All levels agree to rounding.
    Exact,
    /// log2(|q_i - q_{i+1}| / |q_{i+1} - q_{i+2}|) for consecutive triples.
    Observed(Vec<f64>),
    /// Two levels only: differences but no order.
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityStudy {
    pub values: Vec<f64>,
    pub differences: Vec<f64>,
    pub order: ObservedOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub spacings: Vec<f64>,
    pub quantities: BTreeMap<String, QuantityStudy>,
}

/// Studies besides the scenarios: H_s at 0 of e^{-|x|²} and of a plane.
pub const CURVATURE_STUDIES: [&str; 2] = ["gaussian_curvature", "plane_curvature"];

fn curvature_probe(name: &str, cfg: &ScenarioConfig) -> Result<BTreeMap<String, f64>> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let f = match name {
        "gaussian_curvature" => build(grid, FarFieldModel::affine(vec![0.0; cfg.n], 0.0), cfg.s, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>()).exp()
        })?,
        _ => {
            let mut slope = vec![0.0; cfg.n];
            slope[0] = cfg.slope;
            let plane = FarFieldModel::affine(slope, cfg.offset);
            let pl = plane.clone();
            GridFunction::sample(grid, plane, |x| pl.base(x).unwrap_or(0.0))?
        }
    };
    let op = CurvatureOperator::new(params, grid, f.far_field(), cfg.quad())?;
    // the origin is a node: 2L/h is even whenever L is a multiple of h
    let cells = grid.cells();
    if cells % 2 != 0 {
        return Err(invalid("curvature studies need the origin on the lattice (2L/h even)"));
    }
    let mid = cells / 2;
    let idx = if cfg.n == 1 { mid } else { f.flat(mid, mid) };
    let mut out = BTreeMap::new();
    out.insert("hs_at_origin".to_string(), op.hs_at(&f, idx)?);
    Ok(out)
}

/// Run a scenario (or a curvature study) at h, h/2, ..., h/2^{k-1} and
/// report the observed order of every measured quantity.
pub fn convergence_study(study: &str, base: &ScenarioConfig, k: usize) -> Result<StudyReport> {
    if k < 2 {
        return Err(invalid("a convergence study needs k >= 2 levels"));
    }
    let mut spacings = vec![];
    let mut rows: Vec<BTreeMap<String, f64>> = vec![];
    for level in 0..k {
        let mut cfg = base.clone();
        let f = 0.5f64.powi(level as i32);
        cfg.h = base.h * f;
        cfg.expander_h = base.expander_h.map(|h| h * f);
        spacings.push(cfg.h);
        let row = if CURVATURE_STUDIES.contains(&study) {
            curvature_probe(study, &cfg)?
        } else {
            cfg.name = study.parse()?;
            run_scenario(&cfg)?.measured
        };
        rows.push(row);
    }
    let mut quantities = BTreeMap::new();
    for key in rows[0].keys() {
        let values: Vec<f64> = rows.iter().filter_map(|r| r.get(key).copied()).collect();
        if values.len() != k || values.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let differences: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let order = if differences.iter().all(|d| *d <= 1e-12 * (1.0 + scale)) {
            ObservedOrder::Exact
        } else if differences.len() < 2 {
            ObservedOrder::Undetermined
        } else {
            ObservedOrder::Observed(differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
        };
        quantities.insert(
            key.clone(),
            QuantityStudy {
                values,
                differences,
                order,
            },
        );
    }
    Ok(StudyReport {
        study: study.to_string(),
        spacings,
        quantities,
    })
}
