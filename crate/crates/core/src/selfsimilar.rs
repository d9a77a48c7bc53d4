//! Self-similar solutions.
//!
//! The expander of a cone ū₀ is the stationary point of the rescaled flow;
//! at rescaled infinity ũ equals ū(·, 1/(s+1)), which solves
//!
//!   ū - x·Dū + t(s+1) √(1+|Dū|²) H_s[ū] = 0,   t = 1/(s+1).
//!
//! Homothetic evolutions u(·,t) = λ(t) p(·/λ(t)) with
//! λ(t) = [c(s+1)(t-1)+1]^{1/(s+1)} are checked against stored profiles.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{CurvatureOperator, QuadratureConfig};
use crate::error::{invalid, Error, Result};
use crate::flow::{FlowMode, FlowState, SchemeMode, StepControl, Trajectory};
use crate::gridfield::{Continuation, FarFieldModel, GridFunction, GridSpec};
use crate::kernel::{GsTable, KernelParams};

/// Settings of the expander relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderOptions {
    pub grid: GridSpec,
    /// Stop once sup |ũ_τ| < tol.
    pub tol: f64,
    pub max_iter: usize,
    pub cfl: f64,
    pub quad: QuadratureConfig,
    pub scheme: SchemeMode,
}

impl ExpanderOptions {
    pub fn new(grid: GridSpec) -> Self {
        ExpanderOptions {
            grid,
            tol: 1e-4,
            max_iter: 1_000_000,
            cfl: 0.9,
            quad: QuadratureConfig::default(),
            scheme: SchemeMode::Accurate,
        }
    }
}

/// Converged expander profile p = ū(·, 1/(s+1)).
#[derive(Clone, Debug)]
pub struct ExpanderProfile {
    pub profile: GridFunction,
    pub params: KernelParams,
    /// Time of ū the profile represents, 1/(s+1).
    pub profile_time: f64,
    /// sup of |expander_residual| over |x|∞ ≤ L/2.
    pub residual_sup: f64,
    pub iterations: usize,
    /// Rescaled time at which relaxation stopped.
    pub tau: f64,
    /// sup |ũ_τ| at the last step.
    pub last_rate: f64,
    pub source_cone: FarFieldModel,
    pub quad: QuadratureConfig,
}

/// JSON block written next to the profile CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderSummary {
    pub source_cone: FarFieldModel,
    pub s: f64,
    pub n: usize,
    pub residual_sup: f64,
    pub iterations: usize,
    pub tau: f64,
    pub profile_time: f64,
    pub profile_at_origin: f64,
    pub holder_constant: f64,
}

impl ExpanderProfile {
    pub fn profile_at_origin(&self) -> f64 {
        self.profile.evaluate(&[0.0, 0.0][..self.profile.n()])
    }

    /// v_C(0,1) = ū(0,1) = (s+1)^{1/(s+1)} p(0).
    pub fn holder_constant(&self) -> f64 {
        let s = self.params.s();
        (s + 1.0).powf(1.0 / (s + 1.0)) * self.profile_at_origin()
    }

    pub fn summary(&self) -> ExpanderSummary {
        ExpanderSummary {
            source_cone: self.source_cone.clone(),
            s: self.params.s(),
            n: self.params.n(),
            residual_sup: self.residual_sup,
            iterations: self.iterations,
            tau: self.tau,
            profile_time: self.profile_time,
            profile_at_origin: self.profile_at_origin(),
            holder_constant: self.holder_constant(),
        }
    }

    /// `<stem>.csv`, `<stem>.json` (grid header) and `<stem>_summary.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        self.profile.write(dir, stem)?;
        std::fs::write(
            dir.join(format!("{stem}_summary.json")),
            serde_json::to_string_pretty(&self.summary())?,
        )?;
        Ok(())
    }
}

/// Relax the rescaled flow from the cone until it is stationary.
pub fn solve_expander(params: KernelParams, cone: &FarFieldModel, opts: &ExpanderOptions) -> Result<ExpanderProfile> {
    solve_expander_with_table(Arc::new(GsTable::new(params)), cone, opts)
}

pub fn solve_expander_with_table(
    table: Arc<GsTable>,
    cone: &FarFieldModel,
    opts: &ExpanderOptions,
) -> Result<ExpanderProfile> {
    let params = table.params();
    let base = match cone {
        FarFieldModel::Cone { .. } | FarFieldModel::Affine { .. } => cone.clone(),
        FarFieldModel::Periodic { .. } => {
            return Err(Error::Incompatible("expanders need a cone far field".into()));
        }
    };
    if let FarFieldModel::Affine { offset, .. } = &base {
        if *offset != 0.0 {
            return Err(invalid("affine data must pass through the origin to be 1-homogeneous"));
        }
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let u0 = GridFunction::sample(opts.grid, base.clone(), |x| base.base(x).unwrap_or(0.0))?;
    let mut state = FlowState::with_table(u0, FlowMode::Rescaled, opts.scheme, table, opts.quad)?;
    let ctl = StepControl {
        cfl: opts.cfl,
        dt_cap: 0.05,
        allow_cfl_override: false,
    };
    let mut iterations = 0;
    let mut rate = f64::INFINITY;
    while iterations < opts.max_iter {
        let (next, _dt, sup_v) = state.step_stable(&ctl)?;
        rate = sup_v;
        if sup_v < opts.tol {
            break;
        }
        state = next;
        iterations += 1;
    }
    if !(rate < opts.tol) {
        return Err(Error::NotConverged {
            iterations,
            residual: rate,
        });
    }
    let s = params.s();
    let profile_time = 1.0 / (s + 1.0);
    let profile = state.field().clone();
    let res = expander_residual(params, &profile, profile_time, opts.quad)?;
    let residual_sup = sup_on_core(&profile, &res, 0.5);
    Ok(ExpanderProfile {
        profile,
        params,
        profile_time,
        residual_sup,
        iterations,
        tau: state.time(),
        last_rate: rate,
        source_cone: base,
        quad: opts.quad,
    })
}

/// sup |v| over nodes with |x|∞ ≤ frac·L.
pub fn sup_on_core(f: &GridFunction, v: &[f64], frac: f64) -> f64 {
    let lim = frac * f.half_width() * (1.0 + 1e-12);
    (0..f.len())
        .filter(|&i| {
            let x = f.coords(i);
            x[0].abs() <= lim && x[1].abs() <= lim
        })
        .map(|i| v[i].abs())
        .fold(0.0, f64::max)
}

fn operator(params: KernelParams, p: &GridFunction, cfg: QuadratureConfig) -> Result<CurvatureOperator> {
    CurvatureOperator::new(params, p.grid(), p.far_field(), cfg)
}

fn continued(p: &GridFunction, s: f64) -> GridFunction {
    let tol = crate::gridfield::default_match_tolerance(p.half_width());
    if p.is_periodic() || p.continuation() != Continuation::Strict || p.check_far_field_match(tol).is_ok() {
        p.clone()
    } else {
        p.with_continuation(Continuation::Matched { decay: s })
    }
}

/// u - x·Du + t(s+1)√(1+|Du|²)H_s at every node, centered gradients.
/// `profile_time` is the time t of ū the profile stands for (1 for the
/// classical form, 1/(s+1) for the rescaled fixed point).
pub fn expander_residual(params: KernelParams, p: &GridFunction, profile_time: f64, cfg: QuadratureConfig) -> Result<Vec<f64>> {
    let p = continued(p, params.s());
    let hs = operator(params, &p, cfg)?.values(&p)?;
    let k = profile_time * (params.s() + 1.0);
    Ok((0..p.len())
        .into_par_iter()
        .map(|i| {
            let g = p.gradient(i);
            let x = p.coords(i);
            let u = p.values()[i];
            u - (x[0] * g[0] + x[1] * g[1]) + k * (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt() * hs[i]
        })
        .collect())
}

/// c (u - x·Du)/√(1+|Du|²) - H_s at every node.
pub fn shrinker_residual(params: KernelParams, p: &GridFunction, c: f64, cfg: QuadratureConfig) -> Result<Vec<f64>> {
    if !(c >= 0.0) {
        return Err(invalid("shrinker speed c must be nonnegative"));
    }
    let p = continued(p, params.s());
    let hs = operator(params, &p, cfg)?.values(&p)?;
    Ok(shrinker_from_curvature(&p, &hs, c))
}

fn shrinker_from_curvature(p: &GridFunction, hs: &[f64], c: f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let g = p.gradient(i);
            let x = p.coords(i);
            let u = p.values()[i];
            c * (u - (x[0] * g[0] + x[1] * g[1])) / (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt() - hs[i]
        })
        .collect()
}

/// Outcome of a shrinker c-scan on |x|∞ ≤ L/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkerScan {
    pub speeds: Vec<f64>,
    pub sup_residuals: Vec<f64>,
    pub min_sup_residual: f64,
    pub argmin_speed: f64,
    /// sup |H_s| on the same core, the profile's own curvature scale.
    pub curvature_scale: f64,
}

/// Scan c = 0, step, ..., c_max (H_s computed once).
pub fn shrinker_scan(params: KernelParams, p: &GridFunction, c_max: f64, step: f64, cfg: QuadratureConfig) -> Result<ShrinkerScan> {
    if !(step > 0.0 && c_max >= 0.0) {
        return Err(invalid("scan step must be positive"));
    }
    let p = continued(p, params.s());
    let hs = operator(params, &p, cfg)?.values(&p)?;
    let count = (c_max / step).round() as usize;
    let mut speeds = Vec::with_capacity(count + 1);
    let mut sups = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let c = k as f64 * step;
        let r = shrinker_from_curvature(&p, &hs, c);
        speeds.push(c);
        sups.push(sup_on_core(&p, &r, 0.5));
    }
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for (c, v) in speeds.iter().zip(&sups) {
        if *v < best {
            best = *v;
            arg = *c;
        }
    }
    Ok(ShrinkerScan {
        speeds,
        sup_residuals: sups,
        min_sup_residual: best,
        argmin_speed: arg,
        curvature_scale: sup_on_core(&p, &hs, 0.5),
    })
}

/// λ(t) = [c(s+1)(t-1)+1]^{1/(s+1)}.
pub fn homothety_factor(t: f64, c: f64, s: f64) -> f64 {
    (c * (s + 1.0) * (t - 1.0) + 1.0).powf(1.0 / (s + 1.0))
}

/// Deviation of one snapshot from the homothetic image of the profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotheticDeviation {
    pub time: f64,
    pub lambda: f64,
    /// sup over |x|∞ ≤ L/2 of |u(x,t) - λ p(x/λ)|.
    pub deviation: f64,
}

/// Compare every stored snapshot with λ(t) p(·/λ(t)); the trajectory is
/// expected to start from `profile` at t = 1.
pub fn homothety_check(traj: &Trajectory, profile: &GridFunction, c: f64) -> Result<Vec<HomotheticDeviation>> {
    if traj.snapshots.is_empty() {
        return Err(invalid("trajectory has no snapshots"));
    }
    let s = traj.params.s();
    let n = profile.n();
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for (t, u) in &traj.snapshots {
        let lam = homothety_factor(*t, c, s);
        let mut dev: f64 = 0.0;
        let lim = 0.5 * u.half_width() * (1.0 + 1e-12);
        for i in 0..u.len() {
            let x = u.coords(i);
            if x[0].abs() > lim || x[1].abs() > lim {
                continue;
            }
            let r = lam * profile.evaluate(&[x[0] / lam, x[1] / lam][..n]);
            dev = dev.max((u.values()[i] - r).abs());
        }
        out.push(HomotheticDeviation {
            time: *t,
            lambda: lam,
            deviation: dev,
        });
    }
    Ok(out)
}

/// sup |H_s| on the core along a trajectory, normalized by t^{-s/(s+1)}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureDecay {
    pub times: Vec<f64>,
    pub sup_curvature: Vec<f64>,
    /// sup|H_s| · t^{s/(s+1)}.
    pub normalized: Vec<f64>,
    /// max/min of `normalized`.
    pub band: f64,
}

pub fn curvature_decay(traj: &Trajectory, cfg: QuadratureConfig) -> Result<CurvatureDecay> {
    let s = traj.params.s();
    let mut times = vec![];
    let mut sups = vec![];
    let mut norm = vec![];
    for (t, u) in &traj.snapshots {
        if *t <= 0.0 {
            continue;
        }
        let u = continued(u, s);
        let hs = operator(traj.params, &u, cfg)?.values(&u)?;
        let m = sup_on_core(&u, &hs, 0.5);
        times.push(*t);
        sups.push(m);
        norm.push(m * t.powf(s / (s + 1.0)));
    }
    let hi = norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = norm.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CurvatureDecay {
        times,
        sup_curvature: sups,
        normalized: norm,
        band: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    })
}
