//! Explicit time stepping of
//!
//!   u_t = -√(1+|Du|²) H_s[u]                      (unrescaled)
//!   ũ_τ = -(ũ - y·Dũ + √(1+|Dũ|²) H_s[ũ])         (rescaled)
//!
//! Monotone scheme: the gradient in the prefactor is the Godunov upwind
//! gradient chosen by the sign of H_s, the drift is first-order upwind, and
//! the step obeys a CFL bound that keeps the update nondecreasing in every
//! nodal value. Accurate scheme: centered prefactor gradient and
//! second-order upwind drift, same step bound, no comparison guarantee.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{CurvatureOperator, QuadratureConfig};
use crate::error::{invalid, Error, Result};
use crate::gridfield::{fmt17, Continuation, FarFieldModel, GridFunction};
use crate::kernel::{GsTable, KernelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Unrescaled,
    Rescaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeMode {
    /// Upwind, nondecreasing in every nodal value under the CFL bound.
    Monotone,
    /// Centered prefactor, second-order upwind drift.
    Accurate,
}

/// Step-size control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub cfl: f64,
    pub dt_cap: f64,
    /// Let [`FlowState::step`] accept dt above the stable bound.
    pub allow_cfl_override: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: 0.5,
            dt_cap: 1.0,
            allow_cfl_override: false,
        }
    }
}

impl StepControl {
    pub fn with_cfl(cfl: f64) -> Self {
        StepControl {
            cfl,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid(format!("cfl {} outside (0, 1]", self.cfl)));
        }
        if !(self.dt_cap > 0.0) {
            return Err(invalid("dt cap must be positive"));
        }
        Ok(())
    }
}

/// τ = ln(t(s+1)+1)/(s+1).
pub fn time_rescale(t: f64, s: f64) -> f64 {
    (t * (s + 1.0)).ln_1p() / (s + 1.0)
}

/// Inverse of [`time_rescale`].
pub fn time_unrescale(tau: f64, s: f64) -> f64 {
    ((s + 1.0) * tau).exp_m1() / (s + 1.0)
}

/// ũ(y) = e^{-τ} u(y e^{τ}) with τ = time_rescale(t), on the same grid.
pub fn to_rescaled(f: &GridFunction, t: f64, s: f64) -> Result<GridFunction> {
    dilate(f, time_rescale(t, s))
}

/// u(x) = e^{τ} ũ(x e^{-τ}), on the same grid.
pub fn from_rescaled(g: &GridFunction, tau: f64) -> Result<GridFunction> {
    dilate(g, -tau)
}

fn dilate(f: &GridFunction, tau: f64) -> Result<GridFunction> {
    if f.is_periodic() && tau != 0.0 {
        return Err(Error::Incompatible("periodic data cannot be rescaled".into()));
    }
    if tau == 0.0 {
        return Ok(f.clone());
    }
    let e = tau.exp();
    let n = f.n();
    let values = (0..f.len())
        .map(|idx| {
            let y = f.coords(idx);
            f.evaluate(&[y[0] * e, y[1] * e][..n]) / e
        })
        .collect();
    GridFunction::from_values(f.grid(), f.far_field().dilated(tau), values, f.continuation())
}

/// Diagnostics at one sample time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub time: f64,
    pub sup: f64,
    pub inf: f64,
    pub oscillation: f64,
    pub lipschitz: f64,
    /// sup |√(1+|Du|²) H_s| with the scheme's own prefactor.
    pub sup_w: f64,
    pub steps: usize,
}

/// Sampled time series with optional snapshots.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub mode: FlowMode,
    pub params: KernelParams,
    pub samples: Vec<Diagnostics>,
    pub snapshots: Vec<(f64, GridFunction)>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|d| d.time).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,sup,inf,oscillation,lipschitz,sup_w,steps\n");
        for d in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt17(d.time),
                fmt17(d.sup),
                fmt17(d.inf),
                fmt17(d.oscillation),
                fmt17(d.lipschitz),
                fmt17(d.sup_w),
                d.steps
            );
        }
        out
    }

    /// monitors.csv plus snapshots/snap_XXXX.{csv,json}.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("monitors.csv"), self.to_csv())?;
        if !self.snapshots.is_empty() {
            let sd = dir.join("snapshots");
            for (k, (_, g)) in self.snapshots.iter().enumerate() {
                g.write(&sd, &format!("snap_{k:04}"))?;
            }
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&Diagnostics> {
        self.samples.last()
    }
}

/// When to record diagnostics and snapshots during [`FlowState::evolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// Sample times beyond the current time, increasing; the horizon is
    /// always sampled.
    pub times: Vec<f64>,
    pub snapshots: bool,
}

impl Monitors {
    /// `count` equally spaced samples on (t0, horizon].
    pub fn uniform(t0: f64, horizon: f64, count: usize, snapshots: bool) -> Self {
        let count = count.max(1);
        let times = (1..=count)
            .map(|k| t0 + (horizon - t0) * k as f64 / count as f64)
            .collect();
        Monitors { times, snapshots }
    }
}

/// Per-node data of one explicit step.
struct Rates {
    velocity: Vec<f64>,
    dt_limit_unit_cfl: f64,
    sup_w: f64,
}

/// A solution snapshot with everything needed to advance it.
#[derive(Clone, Debug)]
pub struct FlowState {
    field: GridFunction,
    time: f64,
    mode: FlowMode,
    scheme: SchemeMode,
    params: KernelParams,
    quad: QuadratureConfig,
    initial_lipschitz: f64,
    op: Arc<CurvatureOperator>,
    steps: usize,
}

impl FlowState {
    /// A strict field is switched to a matched continuation with decay s, so
    /// the exterior follows the evolving boundary values.
    pub fn new(
        field: GridFunction,
        mode: FlowMode,
        scheme: SchemeMode,
        params: KernelParams,
        quad: QuadratureConfig,
    ) -> Result<Self> {
        let table = Arc::new(GsTable::new(params));
        Self::with_table(field, mode, scheme, table, quad)
    }

    pub fn with_table(
        field: GridFunction,
        mode: FlowMode,
        scheme: SchemeMode,
        table: Arc<GsTable>,
        quad: QuadratureConfig,
    ) -> Result<Self> {
        let params = table.params();
        if mode == FlowMode::Rescaled && field.is_periodic() {
            return Err(Error::Incompatible("periodic far field in rescaled mode".into()));
        }
        if field.continuation() == Continuation::Strict {
            field.check_far_field_match(crate::gridfield::default_match_tolerance(field.half_width()))?;
        }
        let field = match field.continuation() {
            _ if field.is_periodic() => field,
            Continuation::Matched { .. } => field,
            Continuation::Strict => field.with_continuation(Continuation::Matched { decay: params.s() }),
        };
        let op = Arc::new(CurvatureOperator::with_table(table, field.grid(), field.far_field(), quad)?);
        let initial_lipschitz = field.lipschitz_constant();
        Ok(FlowState {
            field,
            time: 0.0,
            mode,
            scheme,
            params,
            quad,
            initial_lipschitz,
            op,
            steps: 0,
        })
    }

    /// Start the clock at `t` instead of 0.
    pub fn at_time(mut self, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("time must be finite and nonnegative"));
        }
        self.time = t;
        Ok(self)
    }

    pub fn field(&self) -> &GridFunction {
        &self.field
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn mode(&self) -> FlowMode {
        self.mode
    }
    pub fn scheme(&self) -> SchemeMode {
        self.scheme
    }
    pub fn params(&self) -> KernelParams {
        self.params
    }
    pub fn quadrature(&self) -> QuadratureConfig {
        self.quad
    }
    pub fn initial_lipschitz(&self) -> f64 {
        self.initial_lipschitz
    }
    pub fn operator(&self) -> &Arc<CurvatureOperator> {
        &self.op
    }
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Replace the values (same grid and far field), keeping the clock.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        FlowState {
            field: self.field.with_values(values),
            ..self.clone()
        }
    }

    // Upper bound of the one-sided gradient norm over all nodes; equals
    // the edge Lipschitz constant in 1D.
    fn scheme_lipschitz(&self) -> f64 {
        let f = &self.field;
        (0..f.len())
            .map(|i| {
                let d = f.one_sided(i);
                let gx = d[0][0].abs().max(d[0][1].abs());
                let gy = d[1][0].abs().max(d[1][1].abs());
                gx.hypot(gy)
            })
            .fold(0.0, f64::max)
    }

    fn rates(&self) -> Result<Rates> {
        let f = &self.field;
        let h = f.spacing();
        let n = f.n();
        let hs = self.op.values(f)?;
        let rescaled = self.mode == FlowMode::Rescaled;
        let velocity: Vec<f64> = (0..f.len())
            .into_par_iter()
            .map(|i| {
                let hv = hs[i];
                let d = f.one_sided(i);
                let g2 = match self.scheme {
                    SchemeMode::Accurate => {
                        let g = f.gradient(i);
                        g[0] * g[0] + g[1] * g[1]
                    }
                    SchemeMode::Monotone => {
                        let mut acc = 0.0;
                        for dd in d.iter().take(n) {
                            let (dm, dp) = (dd[0], dd[1]);
                            let q = if hv > 0.0 {
                                dm.max(0.0).powi(2).max(dp.min(0.0).powi(2))
                            } else {
                                dm.min(0.0).powi(2).max(dp.max(0.0).powi(2))
                            };
                            acc += q;
                        }
                        acc
                    }
                };
                let mut v = -(1.0 + g2).sqrt() * hv;
                if rescaled {
                    let y = f.coords(i);
                    let mut drift = 0.0;
                    for k in 0..n {
                        drift += y[k] * self.upwind(i, k, y[k]);
                    }
                    v -= f.values()[i] - drift;
                }
                v
            })
            .collect();
        let sup_h = hs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lip = self.scheme_lipschitz();
        let s = self.params.s();
        let mut rate = self.op.w_total() * h.powf(-1.0 - s) * (1.0 + lip * lip).sqrt() + (n as f64).sqrt() * sup_h / h;
        if rescaled {
            let l = f.half_width();
            let c = if self.scheme == SchemeMode::Accurate { 2.0 } else { 1.0 };
            rate += 1.0 + c * n as f64 * l / h;
        }
        let sup_w = if rescaled {
            hs.iter()
                .enumerate()
                .map(|(i, hv)| {
                    let g = f.gradient(i);
                    ((1.0 + g[0] * g[0] + g[1] * g[1]).sqrt() * hv).abs()
                })
                .fold(0.0, f64::max)
        } else {
            velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        if let Some(i) = velocity.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: self.time, index: i });
        }
        Ok(Rates {
            velocity,
            dt_limit_unit_cfl: 1.0 / rate,
            sup_w,
        })
    }

    // Upwind derivative along axis k at node i for drift coefficient y
    // (information comes from larger |y|).
    fn upwind(&self, i: usize, k: usize, y: f64) -> f64 {
        let f = &self.field;
        let h = f.spacing();
        let (a, b) = f.split(i);
        let (a, b) = (a as isize, b as isize);
        let at = |o: isize| {
            if k == 0 {
                f.node_value(a + o, b)
            } else {
                f.node_value(a, b + o)
            }
        };
        let sg: isize = if y >= 0.0 { 1 } else { -1 };
        let u0 = f.values()[i];
        match self.scheme {
            SchemeMode::Monotone => sg as f64 * (at(sg) - u0) / h,
            SchemeMode::Accurate => sg as f64 * (-3.0 * u0 + 4.0 * at(sg) - at(2 * sg)) / (2.0 * h),
        }
    }

    /// cfl · h^{1+s} / (W_total √(1+Lip²)) for data with H_s = 0; in general
    /// cfl over the sum of the kernel rate, the prefactor rate √n sup|H|/h
    /// and (rescaled) the drift rate 1 + nL/h, capped by dt_cap.
    pub fn stable_dt(&self, ctl: &StepControl) -> Result<f64> {
        ctl.validate()?;
        Ok((ctl.cfl * self.rates()?.dt_limit_unit_cfl).min(ctl.dt_cap))
    }

    /// One forward-Euler step of size dt.
    pub fn step(&self, dt: f64, ctl: &StepControl) -> Result<FlowState> {
        ctl.validate()?;
        let r = self.rates()?;
        let limit = (ctl.cfl * r.dt_limit_unit_cfl).min(ctl.dt_cap);
        if !(dt > 0.0) || (dt > limit * (1.0 + 1e-12) && !ctl.allow_cfl_override) {
            return Err(Error::Cfl { dt, limit });
        }
        Ok(self.advance(&r, dt))
    }

    /// One step with dt = stable_dt. Returns the new state, the dt used
    /// and sup |u_t| of the state before the step.
    pub fn step_stable(&self, ctl: &StepControl) -> Result<(FlowState, f64, f64)> {
        ctl.validate()?;
        let r = self.rates()?;
        let dt = (ctl.cfl * r.dt_limit_unit_cfl).min(ctl.dt_cap);
        let sup_v = r.velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((self.advance(&r, dt), dt, sup_v))
    }

    /// u_t at every node (rescaled: ũ_τ).
    pub fn velocity(&self) -> Result<Vec<f64>> {
        Ok(self.rates()?.velocity)
    }

    fn advance(&self, r: &Rates, dt: f64) -> FlowState {
        let values: Vec<f64> = self
            .field
            .values()
            .iter()
            .zip(&r.velocity)
            .map(|(u, v)| u + dt * v)
            .collect();
        let mut field = self.field.with_values(values);
        if self.mode == FlowMode::Rescaled {
            if let FarFieldModel::Affine { slope, offset } = field.far_field() {
                let ff = FarFieldModel::affine(slope.clone(), offset * (1.0 - dt));
                field = field.with_far_field(ff).expect("same kind of far field");
            }
        }
        FlowState {
            field,
            time: self.time + dt,
            steps: self.steps + 1,
            ..self.clone()
        }
    }

    fn diagnostics(&self, sup_w: f64) -> Diagnostics {
        let (lo, hi) = self.field.oscillation();
        Diagnostics {
            time: self.time,
            sup: hi,
            inf: lo,
            oscillation: hi - lo,
            lipschitz: self.field.lipschitz_constant(),
            sup_w,
            steps: self.steps,
        }
    }

    /// Diagnostics of the current state (one curvature evaluation).
    pub fn sample(&self) -> Result<Diagnostics> {
        let r = self.rates()?;
        Ok(self.diagnostics(r.sup_w))
    }

    /// Step to `horizon` with dt = stable_dt, landing exactly on every
    /// monitor time. The initial state is the first sample.
    pub fn evolve(self, horizon: f64, ctl: &StepControl, monitors: &Monitors) -> Result<(FlowState, Trajectory)> {
        self.evolve_with(horizon, ctl, monitors, |_| false)
    }

    /// As [`FlowState::evolve`]; `stop` sees every sampled diagnostic and
    /// may end the run early.
    pub fn evolve_with(
        self,
        horizon: f64,
        ctl: &StepControl,
        monitors: &Monitors,
        mut stop: impl FnMut(&Diagnostics) -> bool,
    ) -> Result<(FlowState, Trajectory)> {
        ctl.validate()?;
        if !(horizon > self.time) {
            return Err(invalid(format!("horizon {horizon} not beyond current time {}", self.time)));
        }
        let mut targets: Vec<f64> = monitors
            .times
            .iter()
            .copied()
            .filter(|&t| t > self.time && t < horizon)
            .collect();
        if targets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("monitor times must increase"));
        }
        targets.push(horizon);
        let mut traj = Trajectory {
            mode: self.mode,
            params: self.params,
            samples: vec![],
            snapshots: vec![],
        };
        let mut state = self;
        let mut r = state.rates()?;
        traj.samples.push(state.diagnostics(r.sup_w));
        if monitors.snapshots {
            traj.snapshots.push((state.time, state.field.clone()));
        }
        for target in targets {
            loop {
                let limit = (ctl.cfl * r.dt_limit_unit_cfl).min(ctl.dt_cap);
                let remaining = target - state.time;
                let (dt, last) = if remaining <= limit * (1.0 + 1e-9) {
                    (remaining, true)
                } else if remaining < 2.0 * limit {
                    (0.5 * remaining, false)
                } else {
                    (limit, false)
                };
                state = state.advance(&r, dt);
                if last {
                    state.time = target;
                }
                r = state.rates()?;
                if last {
                    break;
                }
            }
            let d = state.diagnostics(r.sup_w);
            traj.samples.push(d);
            if monitors.snapshots {
                traj.snapshots.push((state.time, state.field.clone()));
            }
            if stop(&d) {
                break;
            }
        }
        Ok((state, traj))
    }
}
