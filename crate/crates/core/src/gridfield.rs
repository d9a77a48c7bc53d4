//! Uniform-grid samples of Lipschitz graphs over a window [-L, L]^n together
//! with a model of the graph outside the window.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Behaviour of u outside the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FarFieldModel {
    /// u(x + period_k e_k) = u(x).
    Periodic { period: Vec<f64> },
    /// u = a·x + b.
    Affine { slope: Vec<f64>, offset: f64 },
    /// u = |x| profile(x/|x|). In 1D `profile = [ū₀(-1), ū₀(1)]`; in 2D the
    /// samples sit at angles 2πk/M and are interpolated linearly in angle.
    /// The optional (K, δ) envelope is carried for reporting only.
    Cone {
        profile: Vec<f64>,
        perturbation_decay: Option<(f64, f64)>,
    },
}

impl FarFieldModel {
    pub fn periodic(period: Vec<f64>) -> Self {
        FarFieldModel::Periodic { period }
    }

    pub fn affine(slope: Vec<f64>, offset: f64) -> Self {
        FarFieldModel::Affine { slope, offset }
    }

    /// 1D cone with slopes `left` on x<0 (value left·|x|) and `right` on x>0.
    pub fn cone_1d(left: f64, right: f64) -> Self {
        FarFieldModel::Cone {
            profile: vec![left, right],
            perturbation_decay: None,
        }
    }

    /// C|x| in dimension n.
    pub fn symmetric_cone(n: usize, c: f64) -> Self {
        if n == 1 {
            Self::cone_1d(c, c)
        } else {
            Self::cone_2d(64, |_| c)
        }
    }

    /// 2D cone from a profile on the circle, sampled at `m` angles.
    pub fn cone_2d(m: usize, g: impl Fn(f64) -> f64) -> Self {
        let profile = (0..m).map(|k| g(2.0 * PI * k as f64 / m as f64)).collect();
        FarFieldModel::Cone {
            profile,
            perturbation_decay: None,
        }
    }

    pub fn with_perturbation_decay(self, k: f64, delta: f64) -> Self {
        match self {
            FarFieldModel::Cone { profile, .. } => FarFieldModel::Cone {
                profile,
                perturbation_decay: Some((k, delta)),
            },
            other => other,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, FarFieldModel::Periodic { .. })
    }

    fn validate(&self, n: usize, half_width: f64) -> Result<()> {
        match self {
            FarFieldModel::Periodic { period } => {
                if period.len() != n {
                    return Err(invalid("periodic far field needs one period per axis"));
                }
                for &p in period {
                    if !(p > 0.0 && p.is_finite()) {
                        return Err(invalid(format!("period {p} must be positive")));
                    }
                    let m = 2.0 * half_width / p;
                    if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
                        return Err(invalid(format!(
                            "window length {} is not an integer multiple of the period {p}",
                            2.0 * half_width
                        )));
                    }
                }
            }
            FarFieldModel::Affine { slope, offset } => {
                if slope.len() != n || !offset.is_finite() || slope.iter().any(|a| !a.is_finite()) {
                    return Err(invalid("affine far field needs n finite slopes and a finite offset"));
                }
            }
            FarFieldModel::Cone {
                profile,
                perturbation_decay,
            } => {
                let want_min = if n == 1 { 2 } else { 8 };
                if (n == 1 && profile.len() != 2) || profile.len() < want_min {
                    return Err(invalid("cone profile has the wrong number of samples"));
                }
                if profile.iter().any(|g| !g.is_finite()) {
                    return Err(invalid("cone profile must be finite"));
                }
                if let Some((k, d)) = perturbation_decay {
                    if !(*k > 0.0) || !(*d > 0.0 && *d < 1.0) {
                        return Err(invalid("perturbation envelope needs K > 0 and δ in (0,1)"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Profile of the cone along the unit direction ω (value ū₀(ω)).
    fn cone_profile(profile: &[f64], x: &[f64]) -> f64 {
        if profile.len() == 2 && x.len() == 1 {
            return if x[0] >= 0.0 { profile[1] } else { profile[0] };
        }
        let m = profile.len();
        let th = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        let p = th / (2.0 * PI) * m as f64;
        let k = (p.floor() as usize).min(m - 1);
        let f = p - k as f64;
        (1.0 - f) * profile[k] + f * profile[(k + 1) % m]
    }

    /// Far-field value at x (affine or cone); None for periodic data.
    pub fn base(&self, x: &[f64]) -> Option<f64> {
        match self {
            FarFieldModel::Periodic { .. } => None,
            FarFieldModel::Affine { slope, offset } => {
                Some(slope.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + offset)
            }
            FarFieldModel::Cone { profile, .. } => {
                let r = norm(x);
                if r == 0.0 {
                    Some(0.0)
                } else {
                    Some(r * Self::cone_profile(profile, x))
                }
            }
        }
    }

    /// Asymptotic slope along the unit direction ω: the value of the
    /// 1-homogeneous part at ω.
    pub fn directional_slope(&self, omega: &[f64]) -> f64 {
        match self {
            FarFieldModel::Periodic { .. } => 0.0,
            FarFieldModel::Affine { slope, .. } => slope.iter().zip(omega).map(|(a, w)| a * w).sum(),
            FarFieldModel::Cone { profile, .. } => Self::cone_profile(profile, omega),
        }
    }

    /// Lipschitz constant of the far-field model itself.
    pub fn lipschitz(&self) -> f64 {
        match self {
            FarFieldModel::Periodic { .. } => 0.0,
            FarFieldModel::Affine { slope, .. } => norm(slope),
            FarFieldModel::Cone { profile, .. } => {
                if profile.len() == 2 {
                    profile[0].abs().max(profile[1].abs())
                } else {
                    let m = profile.len();
                    let dth = 2.0 * PI / m as f64;
                    (0..m)
                        .map(|k| {
                            let g = profile[k];
                            let dg = (profile[(k + 1) % m] - g) / dth;
                            g.hypot(dg)
                        })
                        .fold(0.0, f64::max)
                }
            }
        }
    }

    /// Far field after the parabolic dilation u ↦ e^{-τ}u(e^{τ}·).
    pub fn dilated(&self, tau: f64) -> Self {
        match self {
            FarFieldModel::Affine { slope, offset } => FarFieldModel::Affine {
                slope: slope.clone(),
                offset: offset * (-tau).exp(),
            },
            other => other.clone(),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// How the grid function is continued beyond the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Continuation {
    /// Exterior equals the far-field model; boundary values must match it.
    Strict,
    /// Exterior equals far field plus the boundary mismatch m decaying like
    /// (L/|x|)^decay. Continuous across the window edge, and monotone in the
    /// stored values. decay ∈ (-1, 0) lets the mismatch grow sublinearly.
    Matched { decay: f64 },
}

/// Default boundary matching tolerance 1e-8 (1+L).
pub fn default_match_tolerance(half_width: f64) -> f64 {
    1e-8 * (1.0 + half_width)
}

/// Uniform lattice sample of a graph over [-L, L]^n (n = 1, 2).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    n: usize,
    half_width: f64,
    spacing: f64,
    points: usize,
    values: Vec<f64>,
    far_field: FarFieldModel,
    continuation: Continuation,
}

/// Window geometry shared by grid functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(invalid(format!("dimension {n} not supported (n ∈ {{1,2}})")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) || !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("window half-width and spacing must be positive"));
        }
        let cells = 2.0 * half_width / spacing;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 2.0 {
            return Err(invalid(format!(
                "2L/h = {cells} must be an integer >= 2 (L = {half_width}, h = {spacing})"
            )));
        }
        Ok(GridSpec {
            n,
            half_width,
            spacing,
        })
    }

    pub fn cells(&self) -> usize {
        (2.0 * self.half_width / self.spacing).round() as usize
    }
}

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl GridFunction {
    /// Sample `f` at the lattice; the continuation is `Strict` and the
    /// boundary is checked against the far field.
    pub fn sample(
        grid: GridSpec,
        far_field: FarFieldModel,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut g = Self::blank(grid, far_field, Continuation::Strict)?;
        for idx in 0..g.values.len() {
            let x = g.coords(idx);
            g.values[idx] = f(&x[..g.n]);
        }
        g.check_values()?;
        g.check_far_field_match(default_match_tolerance(g.half_width))?;
        Ok(g)
    }

    /// Build from stored values (row-major, first axis fastest).
    pub fn from_values(
        grid: GridSpec,
        far_field: FarFieldModel,
        values: Vec<f64>,
        continuation: Continuation,
    ) -> Result<Self> {
        let mut g = Self::blank(grid, far_field, continuation)?;
        if values.len() != g.values.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                g.values.len(),
                values.len()
            )));
        }
        g.values = values;
        g.check_values()?;
        if continuation == Continuation::Strict {
            g.check_far_field_match(default_match_tolerance(g.half_width))?;
        }
        Ok(g)
    }

    fn blank(grid: GridSpec, far_field: FarFieldModel, continuation: Continuation) -> Result<Self> {
        let grid = GridSpec::new(grid.n, grid.half_width, grid.spacing)?;
        far_field.validate(grid.n, grid.half_width)?;
        if let Continuation::Matched { decay } = continuation {
            if !(decay > -1.0 && decay.is_finite()) {
                return Err(invalid("continuation decay must exceed -1"));
            }
        }
        let cells = grid.cells();
        let points = if far_field.is_periodic() { cells } else { cells + 1 };
        Ok(GridFunction {
            n: grid.n,
            half_width: grid.half_width,
            spacing: grid.spacing,
            points,
            values: vec![0.0; points.pow(grid.n as u32)],
            far_field,
            continuation,
        })
    }

    fn check_values(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: 0.0, index: i });
        }
        Ok(())
    }

    /// Same geometry and far field, new values (no boundary check).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        GridFunction {
            values,
            ..self.clone()
        }
    }

    pub fn with_continuation(&self, continuation: Continuation) -> Self {
        GridFunction {
            continuation,
            ..self.clone()
        }
    }

    pub fn with_far_field(&self, far_field: FarFieldModel) -> Result<Self> {
        far_field.validate(self.n, self.half_width)?;
        if far_field.is_periodic() != self.far_field.is_periodic() {
            return Err(Error::Incompatible("cannot switch between periodic and non-periodic far fields".into()));
        }
        Ok(GridFunction {
            far_field,
            ..self.clone()
        })
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            half_width: self.half_width,
            spacing: self.spacing,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// Lattice points per axis.
    pub fn points(&self) -> usize {
        self.points
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn far_field(&self) -> &FarFieldModel {
        &self.far_field
    }
    pub fn continuation(&self) -> Continuation {
        self.continuation
    }
    pub fn is_periodic(&self) -> bool {
        self.far_field.is_periodic()
    }

    /// Coordinate of lattice index i along an axis.
    #[inline]
    pub fn coord(&self, i: isize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    /// Lattice index per axis of a flat index.
    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx % self.points, idx / self.points)
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize) -> usize {
        i + self.points * j
    }

    /// Point of a flat index (second entry 0 in 1D).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split(idx);
        if self.n == 1 {
            [self.coord(i as isize), 0.0]
        } else {
            [self.coord(i as isize), self.coord(j as isize)]
        }
    }

    /// Largest |value - far field| over boundary nodes (0 for periodic).
    pub fn boundary_mismatch(&self) -> (f64, Vec<f64>) {
        let mut worst = (0.0, vec![]);
        if self.is_periodic() {
            return worst;
        }
        let last = self.points - 1;
        for idx in 0..self.values.len() {
            let (i, j) = self.split(idx);
            let on_edge = i == 0 || i == last || (self.n == 2 && (j == 0 || j == last));
            if !on_edge {
                continue;
            }
            let x = self.coords(idx);
            let b = self.far_field.base(&x[..self.n]).unwrap_or(0.0);
            let d = (self.values[idx] - b).abs();
            if d > worst.0 {
                worst = (d, x[..self.n].to_vec());
            }
        }
        worst
    }

    /// Error if a boundary value deviates from the far field by more than `tol`.
    pub fn check_far_field_match(&self, tol: f64) -> Result<()> {
        let (d, at) = self.boundary_mismatch();
        if d > tol {
            return Err(Error::FarFieldMismatch {
                mismatch: d,
                tolerance: tol,
                at,
            });
        }
        Ok(())
    }

    /// Value at integer lattice coordinates, which may lie outside the window.
    #[inline]
    pub fn node_value(&self, i: isize, j: isize) -> f64 {
        let p = self.points as isize;
        if self.is_periodic() {
            let ii = i.rem_euclid(p) as usize;
            let jj = if self.n == 1 { 0 } else { j.rem_euclid(p) as usize };
            return self.values[ii + self.points * jj];
        }
        let inside_i = i >= 0 && i < p;
        let inside_j = self.n == 1 || (j >= 0 && j < p);
        if inside_i && inside_j {
            let jj = if self.n == 1 { 0 } else { j as usize };
            return self.values[i as usize + self.points * jj];
        }
        if self.n == 1 {
            self.exterior_1d(self.coord(i))
        } else {
            self.exterior_2d([self.coord(i), self.coord(j)])
        }
    }

    /// Exterior value in 1D (|x| >= L assumed).
    #[inline]
    pub fn exterior_1d(&self, x: f64) -> f64 {
        let b = self.far_field.base(&[x]).unwrap_or(0.0);
        match self.continuation {
            Continuation::Strict => b,
            Continuation::Matched { decay } => {
                let l = self.half_width;
                let m = if x > 0.0 {
                    self.values[self.points - 1] - self.far_field.base(&[l]).unwrap_or(0.0)
                } else {
                    self.values[0] - self.far_field.base(&[-l]).unwrap_or(0.0)
                };
                b + m * (l / x.abs()).powf(decay)
            }
        }
    }

    /// Boundary mismatches (m at -L, m at +L) of a 1D Matched continuation.
    pub fn edge_mismatch_1d(&self) -> (f64, f64) {
        if self.is_periodic() || self.continuation == Continuation::Strict {
            return (0.0, 0.0);
        }
        let l = self.half_width;
        (
            self.values[0] - self.far_field.base(&[-l]).unwrap_or(0.0),
            self.values[self.points - 1] - self.far_field.base(&[l]).unwrap_or(0.0),
        )
    }

    fn exterior_2d(&self, y: [f64; 2]) -> f64 {
        let b = self.far_field.base(&y).unwrap_or(0.0);
        match self.continuation {
            Continuation::Strict => b,
            Continuation::Matched { decay } => {
                let l = self.half_width;
                let yb = [y[0].clamp(-l, l), y[1].clamp(-l, l)];
                let m = self.interp_2d(yb) - self.far_field.base(&yb).unwrap_or(0.0);
                b + m * (norm(&yb) / norm(&y)).powf(decay)
            }
        }
    }

    /// Mismatch m(y_b) of the 2D continuation at the boundary point nearest y.
    pub fn edge_mismatch_2d(&self, y: [f64; 2]) -> f64 {
        if self.is_periodic() || self.continuation == Continuation::Strict {
            return 0.0;
        }
        let l = self.half_width;
        let yb = [y[0].clamp(-l, l), y[1].clamp(-l, l)];
        self.interp_2d(yb) - self.far_field.base(&yb).unwrap_or(0.0)
    }

    #[inline]
    fn locate(&self, x: f64) -> (isize, f64) {
        let mut pos = (x + self.half_width) / self.spacing;
        let r = pos.round();
        if (pos - r).abs() < 1e-10 {
            pos = r;
        }
        let i = pos.floor();
        (i as isize, pos - i)
    }

    fn interp_2d(&self, y: [f64; 2]) -> f64 {
        let (i, fx) = self.locate(y[0]);
        let (j, fy) = self.locate(y[1]);
        let last = self.points as isize - 1;
        let (i, fx) = if i >= last { (last - 1, 1.0) } else { (i, fx) };
        let (j, fy) = if j >= last { (last - 1, 1.0) } else { (j, fy) };
        let v = |a: isize, b: isize| self.values[a as usize + self.points * b as usize];
        (1.0 - fy) * ((1.0 - fx) * v(i, j) + fx * v(i + 1, j)) + fy * ((1.0 - fx) * v(i, j + 1) + fx * v(i + 1, j + 1))
    }

    /// u(x) anywhere: multilinear inside, far-field continuation outside.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let l = self.half_width;
        if self.n == 1 {
            let mut xx = x[0];
            if self.is_periodic() {
                xx = (xx + l).rem_euclid(2.0 * l) - l;
            } else if xx.abs() > l {
                return self.exterior_1d(xx);
            }
            let (i, f) = self.locate(xx);
            if f == 0.0 {
                return self.node_value(i, 0);
            }
            (1.0 - f) * self.node_value(i, 0) + f * self.node_value(i + 1, 0)
        } else {
            let mut y = [x[0], x[1]];
            if self.is_periodic() {
                for c in &mut y {
                    *c = (*c + l).rem_euclid(2.0 * l) - l;
                }
            } else if y[0].abs() > l || y[1].abs() > l {
                return self.exterior_2d(y);
            }
            let (i, fx) = self.locate(y[0]);
            let (j, fy) = self.locate(y[1]);
            let v = |a: isize, b: isize| self.node_value(a, b);
            let lo = if fx == 0.0 { v(i, j) } else { (1.0 - fx) * v(i, j) + fx * v(i + 1, j) };
            if fy == 0.0 {
                return lo;
            }
            let hi = if fx == 0.0 { v(i, j + 1) } else { (1.0 - fx) * v(i, j + 1) + fx * v(i + 1, j + 1) };
            (1.0 - fy) * lo + fy * hi
        }
    }

    /// Centered-difference gradient at a lattice node; neighbours beyond
    /// the window come from the far-field continuation.
    #[inline]
    pub fn gradient(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split(idx);
        let (i, j) = (i as isize, j as isize);
        let h2 = 2.0 * self.spacing;
        let gx = (self.node_value(i + 1, j) - self.node_value(i - 1, j)) / h2;
        if self.n == 1 {
            [gx, 0.0]
        } else {
            [gx, (self.node_value(i, j + 1) - self.node_value(i, j - 1)) / h2]
        }
    }

    /// One-sided differences (D⁻, D⁺) per axis at a node.
    #[inline]
    pub fn one_sided(&self, idx: usize) -> [[f64; 2]; 2] {
        let (i, j) = self.split(idx);
        let (i, j) = (i as isize, j as isize);
        let h = self.spacing;
        let u = self.values[idx];
        let dx = [
            (u - self.node_value(i - 1, j)) / h,
            (self.node_value(i + 1, j) - u) / h,
        ];
        if self.n == 1 {
            [dx, [0.0, 0.0]]
        } else {
            [
                dx,
                [
                    (u - self.node_value(i, j - 1)) / h,
                    (self.node_value(i, j + 1) - u) / h,
                ],
            ]
        }
    }

    /// Discrete Lipschitz constant. 1D: max |Δu|/h over lattice edges, one
    /// layer into the exterior included. 2D: max over cells (one exterior
    /// layer included) of the norm of the cell-averaged difference gradient.
    pub fn lipschitz_constant(&self) -> f64 {
        let p = self.points as isize;
        let h = self.spacing;
        let (lo, hi) = if self.is_periodic() { (0, p - 1) } else { (-1, p) };
        let mut best: f64 = 0.0;
        if self.n == 1 {
            for i in lo..hi {
                let d = (self.node_value(i + 1, 0) - self.node_value(i, 0)).abs() / h;
                best = best.max(d);
            }
            if self.is_periodic() {
                best = best.max((self.values[0] - self.values[self.points - 1]).abs() / h);
            }
        } else {
            let hi = if self.is_periodic() { p } else { hi };
            for j in lo..hi {
                for i in lo..hi {
                    let a = self.node_value(i, j);
                    let b = self.node_value(i + 1, j);
                    let c = self.node_value(i, j + 1);
                    let d = self.node_value(i + 1, j + 1);
                    let gx = 0.5 * ((b - a) + (d - c)) / h;
                    let gy = 0.5 * ((c - a) + (d - b)) / h;
                    best = best.max(gx.hypot(gy));
                }
            }
        }
        best
    }

    /// (min, max) over stored values.
    pub fn oscillation(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// CSV with columns x[,y],value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.n == 1 { "x,value\n" } else { "x,y,value\n" });
        for (idx, v) in self.values.iter().enumerate() {
            let c = self.coords(idx);
            if self.n == 1 {
                let _ = writeln!(out, "{},{}", fmt17(c[0]), fmt17(*v));
            } else {
                let _ = writeln!(out, "{},{},{}", fmt17(c[0]), fmt17(c[1]), fmt17(*v));
            }
        }
        out
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            n: self.n,
            half_width: self.half_width,
            spacing: self.spacing,
            points_per_axis: self.points,
            far_field: self.far_field.clone(),
            continuation: self.continuation,
        }
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.header())?,
        )?;
        Ok(())
    }

    /// Read back a grid function written by [`GridFunction::write`].
    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let header: GridHeader =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let csv = std::fs::read_to_string(dir.join(format!("{stem}.csv")))?;
        let mut values = Vec::new();
        for line in csv.lines().skip(1) {
            let last = line.rsplit(',').next().unwrap_or("");
            values.push(
                last.trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("bad csv value `{last}`: {e}")))?,
            );
        }
        let grid = GridSpec::new(header.n, header.half_width, header.spacing)?;
        GridFunction::from_values(grid, header.far_field, values, header.continuation)
    }
}

/// JSON header accompanying a grid CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub points_per_axis: usize,
    pub far_field: FarFieldModel,
    pub continuation: Continuation,
}
