//! Graphical fractional mean curvature
//!
//!   H_s(x) = -∫ [G_s((u(x+z)-u(x))/|z|) + G_s((u(x-z)-u(x))/|z|)] |z|^{-n-s} dz
//!
//! by a fixed stencil: lattice offsets near the origin (with a zeta-type
//! correction of the innermost weights for the |z|^{-s} singularity),
//! Gauss-Legendre panels on interpolated values further out, and an
//! analytic expansion of the far-field model beyond the outer radius.
//! Every weight is nonnegative, so H_s is nonincreasing in each u(x±z).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gridfield::{fmt17, Continuation, FarFieldModel, GridFunction, GridSpec};
use crate::kernel::{sphere_area, GsTable, KernelParams};
use crate::quad::{gauss_kronrod, gauss_legendre, Neumaier};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularCellMode {
    /// Boost the innermost lattice weights by the lattice-sum defect of |z|^{-s}.
    AnalyticCorrection,
    /// Plain lattice sum.
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    AnalyticFirstOrder,
    None,
}

/// Quadrature settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Truncation radius of the z-integral; `None` means 8L.
    pub outer_radius: Option<f64>,
    pub singular_cell_mode: SingularCellMode,
    pub tail_mode: TailMode,
    pub target_tolerance: f64,
    /// Radius of the lattice (midpoint) zone.
    pub near_radius: f64,
    /// Lower bound on the number of lattice cells in the near zone.
    pub min_near_cells: usize,
    /// Widest Gauss panel used inside the window.
    pub panel_width: f64,
    pub panel_order: usize,
    /// Gauss nodes per octant of the angular integral (n = 2).
    pub angular_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            outer_radius: None,
            singular_cell_mode: SingularCellMode::AnalyticCorrection,
            tail_mode: TailMode::AnalyticFirstOrder,
            target_tolerance: 1e-6,
            near_radius: 1.0,
            min_near_cells: 4,
            panel_width: 1.0,
            panel_order: 8,
            angular_order: 8,
        }
    }
}

impl QuadratureConfig {
    pub fn drop_cell(mut self) -> Self {
        self.singular_cell_mode = SingularCellMode::Drop;
        self
    }

    pub fn with_outer_radius(mut self, r: f64) -> Self {
        self.outer_radius = Some(r);
        self
    }

    fn validate(&self, grid: &GridSpec) -> Result<f64> {
        let r = self.outer_radius.unwrap_or(8.0 * grid.half_width);
        if !(r.is_finite() && r >= 4.0 * grid.spacing) {
            return Err(Error::Resolution(format!(
                "outer radius {r} is below 4 h = {}",
                4.0 * grid.spacing
            )));
        }
        if !(self.target_tolerance > 0.0) {
            return Err(invalid("target tolerance must be positive"));
        }
        if self.min_near_cells < 1 || self.panel_order < 2 || self.angular_order < 1 {
            return Err(invalid("near cells, panel order and angular order must be positive"));
        }
        if !(self.panel_width > 0.0 && self.near_radius >= 0.0) {
            return Err(invalid("panel width must be positive"));
        }
        Ok(r)
    }
}

/// Σ_{k=1}^K k^{-s} - (K+½)^{1-s}/(1-s): defect of the lattice sum of z^{-s}.
pub fn lattice_defect_1d(s: f64, k: usize) -> f64 {
    let mut acc = Neumaier::default();
    for j in (1..=k).rev() {
        acc.add((j as f64).powf(-s));
    }
    acc.value() - (k as f64 + 0.5).powf(1.0 - s) / (1.0 - s)
}

/// Riemann zeta for real σ ≠ 1 by Euler-Maclaurin with 12 leading terms.
pub fn riemann_zeta(sigma: f64) -> f64 {
    const N: usize = 12;
    // B_{2j}/(2j)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut acc = Neumaier::default();
    for k in 1..N {
        acc.add((k as f64).powf(-sigma));
    }
    let n = N as f64;
    acc.add(n.powf(1.0 - sigma) / (sigma - 1.0));
    acc.add(0.5 * n.powf(-sigma));
    // rising product σ(σ+1)...(σ+2j-2), j = 1..=6
    let mut rise = sigma;
    for (i, b) in B.iter().enumerate() {
        if i > 0 {
            let t = (2 * i) as f64;
            rise *= (sigma + t - 1.0) * (sigma + t);
        }
        acc.add(b * rise * n.powf(-sigma - (2 * i + 1) as f64));
    }
    acc.value()
}

/// Additive corrections β_k to the 1D lattice weights k^{-1-s}, k = 1..=K.
///
/// The pair sum at offset z behaves like c₁z + c₃z³ near 0, so the lattice
/// misses c₁ζ(s) + c₃ζ(s-2) (times 2h^{1-s}). Both moments are put back
/// with k = 1 and one farther node m, the smallest one whose weight stays at
/// least half its uncorrected size. Without such an m only ζ(s) is fixed.
pub fn lattice_correction_1d(s: f64, k: usize) -> Vec<f64> {
    let z1 = riemann_zeta(s);
    let z3 = riemann_zeta(s - 2.0);
    let mut beta = vec![0.0; k];
    if k == 0 {
        return beta;
    }
    for m in 2..=k {
        let mf = m as f64;
        let bm = (z1 - z3) / (mf * mf * mf - mf);
        if mf.powf(-1.0 - s) + bm >= 0.5 * mf.powf(-1.0 - s) {
            beta[m - 1] = bm;
            beta[0] = -z1 - mf * bm;
            return beta;
        }
    }
    beta[0] = -z1;
    beta
}

/// Two-dimensional analogue over the square |k|_∞ ≤ K for |z|^{-1-s}.
pub fn lattice_defect_2d(s: f64, k: usize) -> f64 {
    let kk = k as isize;
    let mut acc = Neumaier::default();
    for a in -kk..=kk {
        for b in -kk..=kk {
            if a != 0 || b != 0 {
                acc.add(((a * a + b * b) as f64).powf(-0.5 * (1.0 + s)));
            }
        }
    }
    let theta = 8.0 * gauss_kronrod(|t: f64| t.cos().powf(s - 1.0), 0.0, 0.25 * PI, 1e-15);
    acc.value() - (k as f64 + 0.5).powf(1.0 - s) / (1.0 - s) * theta
}

#[derive(Clone, Copy, Debug)]
struct Near1 {
    k: isize,
    w: f64,
    inv_z: f64,
}

#[derive(Clone, Copy, Debug)]
struct Far1 {
    w: f64,
    inv_z: f64,
    plus: (isize, f64),
    minus: (isize, f64),
}

#[derive(Clone, Copy, Debug)]
struct Near2 {
    dk: (isize, isize),
    w: f64,
    inv_r: f64,
}

#[derive(Clone, Copy, Debug)]
struct Far2 {
    z: [f64; 2],
    w: f64,
    inv_r: f64,
    plus: (isize, f64, isize, f64),
    minus: (isize, f64, isize, f64),
}

/// Per-call data for the tail expansion.
#[derive(Clone, Copy, Debug, Default)]
struct TailCtx {
    mean: f64,
    m_minus: f64,
    m_plus: f64,
}

/// Precomputed stencil for one grid geometry and configuration.
#[derive(Clone, Debug)]
pub struct CurvatureOperator {
    params: KernelParams,
    table: Arc<GsTable>,
    cfg: QuadratureConfig,
    grid: GridSpec,
    periodic: bool,
    points: usize,
    outer_radius: f64,
    near_cells: usize,
    near1: Vec<Near1>,
    far1: Vec<Far1>,
    near2: Vec<Near2>,
    far2: Vec<Far2>,
    tail_dirs: Vec<([f64; 2], f64)>,
    w_total: f64,
    /// Lattice padding of the 1D value buffer.
    pad: isize,
}

/// Radial panels on [start, outer]: doubling up to `width`, uniform until
/// `window_end`, then growing by 4.
fn radial_panels(start: f64, window_end: f64, outer: f64, width: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = start;
    while a < outer * (1.0 - 1e-14) {
        let w = if a < window_end { a.min(width) } else { 3.0 * a };
        let mut b = (a + w).min(outer);
        if a < window_end && b > window_end {
            b = window_end;
        }
        out.push((a, b));
        a = b;
    }
    out
}

fn frac_split(p: f64) -> (isize, f64) {
    let r = p.round();
    let p = if (p - r).abs() < 1e-12 { r } else { p };
    let f = p.floor();
    (f as isize, p - f)
}

impl CurvatureOperator {
    pub fn new(params: KernelParams, grid: GridSpec, far_field: &FarFieldModel, cfg: QuadratureConfig) -> Result<Self> {
        Self::with_table(Arc::new(GsTable::new(params)), grid, far_field, cfg)
    }

    /// Reuse an existing G_s table.
    pub fn with_table(table: Arc<GsTable>, grid: GridSpec, far_field: &FarFieldModel, cfg: QuadratureConfig) -> Result<Self> {
        let params = table.params();
        let grid = GridSpec::new(grid.n, grid.half_width, grid.spacing)?;
        if params.n() != grid.n {
            return Err(invalid(format!("kernel dimension {} differs from grid dimension {}", params.n(), grid.n)));
        }
        let outer = cfg.validate(&grid)?;
        let periodic = far_field.is_periodic();
        let h = grid.spacing;
        let s = params.s();
        let cells = grid.cells();
        let points = if periodic { cells } else { cells + 1 };
        // periodic: lattice zone at most half the window
        let near_r = if periodic { cfg.near_radius.min(grid.half_width) } else { cfg.near_radius };
        let near_cells = ((near_r / h).round() as usize).max(cfg.min_near_cells);
        let r0 = (near_cells as f64 + 0.5) * h;
        let mut width = cfg.panel_width;
        if let FarFieldModel::Periodic { period } = far_field {
            let pmin = period.iter().cloned().fold(f64::INFINITY, f64::min);
            width = width.min(0.5 * pmin);
        }
        let (gx, gw) = gauss_legendre(cfg.panel_order);
        let correct = cfg.singular_cell_mode == SingularCellMode::AnalyticCorrection;

        let mut op = CurvatureOperator {
            params,
            table,
            cfg,
            grid,
            periodic,
            points,
            outer_radius: outer,
            near_cells,
            near1: vec![],
            far1: vec![],
            near2: vec![],
            far2: vec![],
            tail_dirs: vec![],
            w_total: 0.0,
            pad: 0,
        };

        if grid.n == 1 {
            let beta = if correct { lattice_correction_1d(s, near_cells) } else { vec![0.0; near_cells] };
            for k in 1..=near_cells {
                let z = k as f64 * h;
                let w = 2.0 * h * h.powf(-1.0 - s) * ((k as f64).powf(-1.0 - s) + beta[k - 1]);
                op.near1.push(Near1 { k: k as isize, w, inv_z: 1.0 / z });
            }
            let window_end = if periodic { outer } else { 2.0 * grid.half_width };
            if r0 < outer {
                for (a, b) in radial_panels(r0, window_end, outer, width) {
                    let c = 0.5 * (a + b);
                    let half = 0.5 * (b - a);
                    for (x, wq) in gx.iter().zip(&gw) {
                        let z = c + half * x;
                        let w = 2.0 * half * wq * z.powf(-1.0 - s);
                        op.far1.push(Far1 {
                            w,
                            inv_z: 1.0 / z,
                            plus: frac_split(z / h),
                            minus: frac_split(-z / h),
                        });
                    }
                }
            }
            op.tail_dirs = vec![([1.0, 0.0], 1.0), ([-1.0, 0.0], 1.0)];
            let mut wt = 4.0 * (r0 / h).powf(-1.0 - s) / (1.0 + s);
            for e in &op.near1 {
                wt += h.powf(1.0 + s) * 2.0 * e.w * e.inv_z;
            }
            op.w_total = wt;
            let mut pad = near_cells as isize;
            for e in &op.far1 {
                pad = pad.max(e.plus.0.abs() + 2).max(e.minus.0.abs() + 2);
            }
            op.pad = pad;
        } else {
            let kk = near_cells as isize;
            let boost = if correct { 1.0 - 0.25 * lattice_defect_2d(s, near_cells) } else { 1.0 };
            for b in 0..=kk {
                for a in -kk..=kk {
                    if b == 0 && a <= 0 {
                        continue;
                    }
                    let r = h * ((a * a + b * b) as f64).sqrt();
                    let mut w = 2.0 * h * h * r.powf(-2.0 - s);
                    if (a == 1 && b == 0) || (a == 0 && b == 1) {
                        w *= boost;
                    }
                    op.near2.push(Near2 { dk: (a, b), w, inv_r: 1.0 / r });
                }
            }
            op.near2.sort_by(|p, q| q.inv_r.partial_cmp(&p.inv_r).unwrap());
            let window_end = if periodic { outer } else { 2.0 * 2f64.sqrt() * grid.half_width };
            let (ax, aw) = gauss_legendre(cfg.angular_order);
            let mut far = Vec::new();
            for oct in 0..4 {
                let t0 = oct as f64 * 0.25 * PI;
                for (xa, wa) in ax.iter().zip(&aw) {
                    let th = t0 + 0.125 * PI * (1.0 + xa);
                    let wth = 0.125 * PI * wa;
                    let (sn, cs) = th.sin_cos();
                    let rho = r0 / cs.abs().max(sn.abs());
                    if rho >= outer {
                        continue;
                    }
                    for (a, b) in radial_panels(rho, window_end, outer, width) {
                        let c = 0.5 * (a + b);
                        let half = 0.5 * (b - a);
                        for (x, wq) in gx.iter().zip(&gw) {
                            let r = c + half * x;
                            let z = [r * cs, r * sn];
                            let w = 2.0 * wth * half * wq * r.powf(-1.0 - s);
                            let (pi, pf) = frac_split(z[0] / h);
                            let (pj, pg) = frac_split(z[1] / h);
                            let (mi, mf) = frac_split(-z[0] / h);
                            let (mj, mg) = frac_split(-z[1] / h);
                            far.push(Far2 {
                                z,
                                w,
                                inv_r: 1.0 / r,
                                plus: (pi, pf, pj, pg),
                                minus: (mi, mf, mj, mg),
                            });
                        }
                    }
                }
            }
            far.sort_by(|p, q| q.inv_r.partial_cmp(&p.inv_r).unwrap());
            op.far2 = far;
            let m = 64;
            op.tail_dirs = (0..m)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    ([th.cos(), th.sin()], 2.0 * PI / m as f64)
                })
                .collect();
            let ang = 8.0 * gauss_kronrod(|t: f64| t.cos().powf(1.0 + s), 0.0, 0.25 * PI, 1e-15);
            let mut wt = 2.0 * (r0 / h).powf(-1.0 - s) / (1.0 + s) * ang;
            for e in &op.near2 {
                wt += h.powf(1.0 + s) * 2.0 * e.w * e.inv_r;
            }
            op.w_total = wt;
        }
        Ok(op)
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }
    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }
    pub fn table(&self) -> &Arc<GsTable> {
        &self.table
    }
    pub fn grid(&self) -> GridSpec {
        self.grid
    }
    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }
    pub fn near_cells(&self) -> usize {
        self.near_cells
    }
    /// Number of stencil entries (pairs) per point.
    pub fn stencil_len(&self) -> usize {
        self.near1.len() + self.far1.len() + self.near2.len() + self.far2.len()
    }

    /// h^{1+s} times the largest possible ∂H/∂u(x): the sum of all kernel
    /// weights (sup G' = 1), with the panel part taken in closed form.
    pub fn w_total(&self) -> f64 {
        self.w_total
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != self.grid || f.is_periodic() != self.periodic {
            return Err(Error::GridMismatch(format!(
                "operator built for {:?} (periodic {}), field is {:?} (periodic {})",
                self.grid,
                self.periodic,
                f.grid(),
                f.is_periodic()
            )));
        }
        Ok(())
    }

    fn check_match(&self, f: &GridFunction) -> Result<()> {
        if f.continuation() == Continuation::Strict {
            f.check_far_field_match(crate::gridfield::default_match_tolerance(f.half_width()))?;
        }
        Ok(())
    }

    fn tail_ctx(&self, f: &GridFunction) -> TailCtx {
        let mut ctx = TailCtx::default();
        if self.periodic {
            let mut acc = Neumaier::default();
            for &v in f.values() {
                acc.add(v);
            }
            ctx.mean = acc.value() / f.len() as f64;
        } else if self.grid.n == 1 {
            let (a, b) = f.edge_mismatch_1d();
            ctx.m_minus = a;
            ctx.m_plus = b;
        }
        ctx
    }

    /// H_s at one lattice point.
    pub fn hs_at(&self, f: &GridFunction, idx: usize) -> Result<f64> {
        self.check(f)?;
        self.check_match(f)?;
        if idx >= f.len() {
            return Err(invalid(format!("index {idx} outside the window")));
        }
        let ctx = self.tail_ctx(f);
        let ext = self.padded_1d(f);
        Ok(self.point(f, &ext, idx, &ctx, false))
    }

    /// H_s through the second-difference kernel A(x,z,u).
    pub fn hs_at_kernel_form(&self, f: &GridFunction, idx: usize) -> Result<f64> {
        self.check(f)?;
        self.check_match(f)?;
        if idx >= f.len() {
            return Err(invalid(format!("index {idx} outside the window")));
        }
        let ctx = self.tail_ctx(f);
        let ext = self.padded_1d(f);
        Ok(self.point(f, &ext, idx, &ctx, true))
    }

    /// H_s at every lattice point (parallel, deterministic).
    pub fn values(&self, f: &GridFunction) -> Result<Vec<f64>> {
        self.check(f)?;
        self.check_match(f)?;
        let ctx = self.tail_ctx(f);
        let ext = self.padded_1d(f);
        Ok((0..f.len()).into_par_iter().map(|i| self.point(f, &ext, i, &ctx, false)).collect())
    }

    /// H_s and w = √(1+|Du|²) H_s at every lattice point.
    pub fn field(&self, f: &GridFunction) -> Result<CurvatureField> {
        let values = self.values(f)?;
        let w = values
            .iter()
            .enumerate()
            .map(|(i, hv)| {
                let g = f.gradient(i);
                (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt() * hv
            })
            .collect();
        Ok(CurvatureField {
            grid: f.grid(),
            coords: (0..f.len()).map(|i| f.coords(i)).collect(),
            values,
            w,
            config: self.cfg,
        })
    }

    /// Analytic contribution of |z| > R_out.
    pub fn tail_contribution(&self, f: &GridFunction, idx: usize) -> Result<f64> {
        self.check(f)?;
        let ctx = self.tail_ctx(f);
        Ok(self.tail(f, idx, f.values()[idx], &ctx))
    }

    /// Bound on the neglected oscillatory tail for periodic data:
    /// 2 osc(u) |S^{n-1}| R^{-(1+s)}/(1+s).
    pub fn tail_error_bound(&self, f: &GridFunction) -> f64 {
        let (lo, hi) = f.oscillation();
        let s = self.params.s();
        2.0 * (hi - lo) * sphere_area(self.grid.n - 1) * self.outer_radius.powf(-1.0 - s) / (1.0 + s)
    }

    #[inline]
    fn g(&self, t: f64) -> f64 {
        self.table.value(t)
    }

    // ∫_0^1 G'((1-w)a + w b) dw, 8-point Gauss-Legendre
    fn a_kernel(&self, a: f64, b: f64) -> f64 {
        const X: [f64; 4] = [
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_3,
        ];
        const W: [f64; 4] = [
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_47,
            0.101_228_536_290_376_26,
        ];
        let mut acc = 0.0;
        for k in 0..4 {
            for sg in [-1.0, 1.0] {
                let w = 0.5 * (1.0 + sg * X[k]);
                acc += 0.5 * W[k] * self.table.prime((1.0 - w) * a + w * b);
            }
        }
        acc
    }

    #[inline]
    fn pair(&self, dp: f64, dm: f64, kernel_form: bool) -> f64 {
        if kernel_form {
            self.a_kernel(-dm, dp) * (dp + dm)
        } else {
            self.g(dp) + self.g(dm)
        }
    }

    /// Values on the lattice extended by `pad` nodes on both sides:
    /// wrapped for periodic data, the continuation otherwise.
    fn padded_1d(&self, f: &GridFunction) -> Vec<f64> {
        if self.grid.n != 1 {
            return vec![];
        }
        let v = f.values();
        let n = self.points as isize;
        let p = self.pad;
        (-p..n + p)
            .map(|a| {
                if a >= 0 && a < n {
                    v[a as usize]
                } else if self.periodic {
                    v[a.rem_euclid(n) as usize]
                } else {
                    f.exterior_1d(f.coord(a))
                }
            })
            .collect()
    }

    #[inline]
    fn sample_2d(&self, f: &GridFunction, i: isize, j: isize, off: (isize, f64, isize, f64), y: [f64; 2]) -> f64 {
        let (a, fx, b, fy) = (i + off.0, off.1, j + off.2, off.3);
        let n = self.points as isize;
        let inside = self.periodic || (a >= 0 && a + 1 < n && b >= 0 && b + 1 < n);
        if !inside {
            return f.evaluate(&y);
        }
        let v = |p: isize, q: isize| f.node_value(p, q);
        (1.0 - fy) * ((1.0 - fx) * v(a, b) + fx * v(a + 1, b)) + fy * ((1.0 - fx) * v(a, b + 1) + fx * v(a + 1, b + 1))
    }

    fn point(&self, f: &GridFunction, ext: &[f64], idx: usize, ctx: &TailCtx, kernel_form: bool) -> f64 {
        let v = f.values();
        let u = v[idx];
        let mut acc = Neumaier::default();
        if self.grid.n == 1 {
            let c = idx + self.pad as usize;
            for e in &self.near1 {
                let k = e.k as usize;
                let up = ext[c + k];
                let um = ext[c - k];
                acc.add(e.w * self.pair((up - u) * e.inv_z, (um - u) * e.inv_z, kernel_form));
            }
            for e in &self.far1 {
                let a = (c as isize + e.plus.0) as usize;
                let up = (1.0 - e.plus.1) * ext[a] + e.plus.1 * ext[a + 1];
                let b = (c as isize + e.minus.0) as usize;
                let um = (1.0 - e.minus.1) * ext[b] + e.minus.1 * ext[b + 1];
                acc.add(e.w * self.pair((up - u) * e.inv_z, (um - u) * e.inv_z, kernel_form));
            }
        } else {
            let (i, j) = f.split(idx);
            let (i, j) = (i as isize, j as isize);
            for e in &self.near2 {
                let up = f.node_value(i + e.dk.0, j + e.dk.1);
                let um = f.node_value(i - e.dk.0, j - e.dk.1);
                acc.add(e.w * self.pair((up - u) * e.inv_r, (um - u) * e.inv_r, kernel_form));
            }
            let x = f.coords(idx);
            for e in &self.far2 {
                let up = self.sample_2d(f, i, j, e.plus, [x[0] + e.z[0], x[1] + e.z[1]]);
                let um = self.sample_2d(f, i, j, e.minus, [x[0] - e.z[0], x[1] - e.z[1]]);
                acc.add(e.w * self.pair((up - u) * e.inv_r, (um - u) * e.inv_r, kernel_form));
            }
        }
        -acc.value() + self.tail(f, idx, u, ctx)
    }

    fn tail(&self, f: &GridFunction, idx: usize, u: f64, ctx: &TailCtx) -> f64 {
        if self.cfg.tail_mode == TailMode::None {
            return 0.0;
        }
        let s = self.params.s();
        let r = self.outer_radius;
        let rs = r.powf(-s);
        let r1s = rs / r;
        let x = f.coords(idx);
        let n = self.grid.n;
        let gamma = match f.continuation() {
            Continuation::Matched { decay } => Some(decay),
            Continuation::Strict => None,
        };
        let ff = f.far_field();
        let mut acc = Neumaier::default();
        for &(om, wt) in &self.tail_dirs {
            let (p, q) = match ff {
                FarFieldModel::Periodic { .. } => (0.0, ctx.mean),
                FarFieldModel::Affine { slope, offset } => {
                    let p = slope.iter().zip(&om[..n]).map(|(a, w)| a * w).sum::<f64>();
                    let ax = slope.iter().zip(&x[..n]).map(|(a, x)| a * x).sum::<f64>();
                    (p, ax + offset)
                }
                FarFieldModel::Cone { .. } => {
                    let g = cone_gradient(ff, om, n);
                    (ff.directional_slope(&om[..n]), g[0] * x[0] + g[1] * x[1])
                }
            };
            let gp = self.table.prime(p);
            let mut t = self.g(p) * rs / s + gp * (q - u) * r1s / (1.0 + s);
            if let (Some(gam), false) = (gamma, self.periodic) {
                let (m, ell) = if n == 1 {
                    if om[0] > 0.0 {
                        (ctx.m_plus, self.grid.half_width)
                    } else {
                        (ctx.m_minus, self.grid.half_width)
                    }
                } else {
                    let y = [x[0] + r * om[0], x[1] + r * om[1]];
                    let l = self.grid.half_width;
                    let yb = [y[0].clamp(-l, l), y[1].clamp(-l, l)];
                    (f.edge_mismatch_2d(y), yb[0].hypot(yb[1]))
                };
                t += gp * m * ell.powf(gam) * r1s * r.powf(-gam) / (1.0 + s + gam);
            }
            acc.add(wt * t);
        }
        -2.0 * acc.value()
    }
}

/// ∇ū₀ at the unit direction ω (0-homogeneous).
fn cone_gradient(ff: &FarFieldModel, om: [f64; 2], n: usize) -> [f64; 2] {
    if n == 1 {
        let p = ff.directional_slope(&om[..1]);
        return [om[0].signum() * p, 0.0];
    }
    let th = om[1].atan2(om[0]);
    let d = 1e-6;
    let g = ff.directional_slope(&om);
    let gp = ff.directional_slope(&[(th + d).cos(), (th + d).sin()]);
    let gm = ff.directional_slope(&[(th - d).cos(), (th - d).sin()]);
    let dg = (gp - gm) / (2.0 * d);
    [g * om[0] - dg * om[1], g * om[1] + dg * om[0]]
}

/// H_s values and w = √(1+|Du|²) H_s over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    pub grid: GridSpec,
    pub coords: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub w: Vec<f64>,
    pub config: QuadratureConfig,
}

impl CurvatureField {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.grid.n == 1 { "x,hs,w\n" } else { "x,y,hs,w\n" });
        for ((c, h), w) in self.coords.iter().zip(&self.values).zip(&self.w) {
            if self.grid.n == 1 {
                let _ = writeln!(out, "{},{},{}", fmt17(c[0]), fmt17(*h), fmt17(*w));
            } else {
                let _ = writeln!(out, "{},{},{},{}", fmt17(c[0]), fmt17(c[1]), fmt17(*h), fmt17(*w));
            }
        }
        out
    }
}

/// One-shot H_s at a lattice point (builds the stencil; prefer
/// [`CurvatureOperator`] in loops).
pub fn hs_at(params: KernelParams, f: &GridFunction, idx: usize, cfg: QuadratureConfig) -> Result<f64> {
    CurvatureOperator::new(params, f.grid(), f.far_field(), cfg)?.hs_at(f, idx)
}

pub fn hs_at_kernel_form(params: KernelParams, f: &GridFunction, idx: usize, cfg: QuadratureConfig) -> Result<f64> {
    CurvatureOperator::new(params, f.grid(), f.far_field(), cfg)?.hs_at_kernel_form(f, idx)
}

pub fn hs_field(params: KernelParams, f: &GridFunction, cfg: QuadratureConfig) -> Result<CurvatureField> {
    CurvatureOperator::new(params, f.grid(), f.far_field(), cfg)?.field(f)
}

pub fn tail_contribution(params: KernelParams, f: &GridFunction, idx: usize, cfg: QuadratureConfig) -> Result<f64> {
    CurvatureOperator::new(params, f.grid(), f.far_field(), cfg)?.tail_contribution(f, idx)
}
