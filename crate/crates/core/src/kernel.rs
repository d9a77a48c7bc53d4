//! The profile function G_s(t) = ∫_0^t (1+w²)^{-e} dw with e = (n+1+s)/2,
//! its derivative, and scalar constants such as the curvature of the unit ball.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::{gauss_kronrod, Neumaier};

/// Graph dimension `n` and fractional order `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    n: usize,
    s: f64,
}

impl KernelParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n < 1 {
            return Err(invalid(format!("dimension n = {n} must be >= 1")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid(format!("fractional order s = {s} must lie in (0,1)")));
        }
        Ok(KernelParams { n, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// (n+1+s)/2, always derived.
    pub fn exponent(&self) -> f64 {
        0.5 * (self.n as f64 + 1.0 + self.s)
    }
}

fn check_finite(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("non-finite argument {t}")))
    }
}

/// G_s'(t) = (1+t²)^{-e}.
pub fn gs_prime(params: KernelParams, t: f64) -> Result<f64> {
    check_finite(t)?;
    Ok(prime(params.exponent(), t))
}

#[inline]
fn prime(e: f64, t: f64) -> f64 {
    (1.0 + t * t).powf(-e)
}

// table covers [0, T_MAX]; beyond that the asymptotic tail is exact to rounding
const T_MAX: f64 = 64.0;
const OCTAVES: usize = 6;
const PER_OCTAVE: usize = 256;

/// ∫_t^∞ (1+w²)^{-e} dw for t >= T_MAX by the binomial series in 1/w².
fn tail_series(e: f64, t: f64) -> f64 {
    let inv2 = 1.0 / (t * t);
    let mut c = 1.0;
    let mut pw = t.powf(1.0 - 2.0 * e);
    let mut acc = 0.0;
    for k in 0..8 {
        let kf = k as f64;
        acc += c * pw / (2.0 * e + 2.0 * kf - 1.0);
        c *= (-e - kf) / (kf + 1.0);
        pw *= inv2;
    }
    acc
}

/// G_s(t) by direct adaptive quadrature (validation path).
pub fn gs_value(params: KernelParams, t: f64) -> Result<f64> {
    check_finite(t)?;
    let e = params.exponent();
    let a = t.abs();
    let v = if a <= T_MAX {
        direct(e, a)
    } else {
        direct(e, T_MAX) + tail_series(e, T_MAX) - tail_series(e, a)
    };
    Ok(v.copysign(t))
}

fn direct(e: f64, a: f64) -> f64 {
    let mut acc = Neumaier::default();
    let mut lo = 0.0;
    while lo < a {
        let hi = (lo + 1.0).min(a);
        acc.add(gauss_kronrod(|w| prime(e, w), lo, hi, 1e-15));
        lo = hi;
    }
    acc.value()
}

/// lim_{t→∞} G_s(t).
pub fn gs_infinity(params: KernelParams) -> f64 {
    let e = params.exponent();
    direct(e, T_MAX) + tail_series(e, T_MAX)
}

/// Tabulated G_s with cubic Hermite interpolation on octave-graded nodes.
///
/// Nodes are uniform on [0,1] and on every octave [2^k, 2^{k+1}] up to 64,
/// each with the same count, so spacing grows geometrically with t.
#[derive(Clone, Debug)]
pub struct GsTable {
    params: KernelParams,
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// Power-basis coefficients of the Hermite cubic on each interval, in
    /// the local variable u ∈ [0,1).
    cubic: Vec<[f64; 4]>,
    limit: f64,
}

impl GsTable {
    pub fn new(params: KernelParams) -> Self {
        let e = params.exponent();
        let m = PER_OCTAVE;
        let count = m * (OCTAVES + 1) + 1;
        let mut nodes = Vec::with_capacity(count);
        for j in 0..=m {
            nodes.push(j as f64 / m as f64);
        }
        for oct in 0..OCTAVES {
            let base = (1u64 << oct) as f64;
            for j in 1..=m {
                nodes.push(base * (1.0 + j as f64 / m as f64));
            }
        }
        debug_assert_eq!(nodes.len(), count);
        let mut values = Vec::with_capacity(count);
        let mut acc = Neumaier::default();
        values.push(0.0);
        for w in nodes.windows(2) {
            acc.add(gauss_kronrod(|x| prime(e, x), w[0], w[1], 1e-17));
            values.push(acc.value());
        }
        let mut slopes: Vec<f64> = nodes.iter().map(|&t| prime(e, t)).collect();
        // Fritsch-Carlson limiter; inactive for a fine table but keeps the
        // interpolant monotone by construction
        for k in 0..count - 1 {
            let dt = nodes[k + 1] - nodes[k];
            let sec = (values[k + 1] - values[k]) / dt;
            let a = slopes[k] / sec;
            let b = slopes[k + 1] / sec;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * a * sec;
                slopes[k + 1] = tau * b * sec;
            }
        }
        let limit = values[count - 1] + tail_series(e, T_MAX);
        let cubic = (0..count - 1)
            .map(|k| {
                let dt = nodes[k + 1] - nodes[k];
                let (y0, y1) = (values[k], values[k + 1]);
                let (d0, d1) = (slopes[k] * dt, slopes[k + 1] * dt);
                [y0, d0, 3.0 * (y1 - y0) - 2.0 * d0 - d1, 2.0 * (y0 - y1) + d0 + d1]
            })
            .collect();
        GsTable {
            params,
            nodes,
            values,
            cubic,
            limit,
        }
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn limit_at_infinity(&self) -> f64 {
        self.limit
    }

    /// G_s(t); odd, increasing, bounded by the limit.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let a = t.abs();
        let v = if a < T_MAX {
            self.interp(a)
        } else {
            self.limit - tail_series(self.params.exponent(), a)
        };
        v.copysign(t)
    }

    /// G_s'(t), closed form.
    #[inline]
    pub fn prime(&self, t: f64) -> f64 {
        prime(self.params.exponent(), t)
    }

    #[inline]
    fn interp(&self, a: f64) -> f64 {
        let m = PER_OCTAVE as f64;
        let (k, u) = if a < 1.0 {
            let p = a * m;
            let k = p as usize;
            (k, p - k as f64)
        } else {
            // a in [2^ex, 2^(ex+1))
            let ex = ((a.to_bits() >> 52) & 0x7ff) as usize - 1023;
            let inv = f64::from_bits(((1023 - ex) as u64) << 52);
            let p = (a * inv - 1.0) * m;
            let j = p as usize;
            (PER_OCTAVE * (ex + 1) + j, p - j as f64)
        };
        let c = &self.cubic[k];
        ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
    }
}

/// |S^k|, the surface measure of the unit k-sphere.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

fn check_ball_args(ambient_dim: usize, s: f64) -> Result<()> {
    if ambient_dim < 2 {
        return Err(invalid(format!("ambient dimension {ambient_dim} must be >= 2")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("fractional order s = {s} must lie in (0,1)")));
    }
    Ok(())
}

// ∫_0^{π/2} sin^{-s}φ cos^{d-2}φ dφ with φ = v^{1/(1-s)} removing the endpoint singularity
fn polar_factor(ambient_dim: usize, s: f64) -> f64 {
    let q = 1.0 / (1.0 - s);
    let vmax = (0.5 * PI).powf(1.0 - s);
    let dm2 = ambient_dim as i32 - 2;
    gauss_kronrod(
        |v| {
            if v == 0.0 {
                return q;
            }
            let phi = v.powf(q);
            (phi / phi.sin()).powf(s) * phi.cos().powi(dm2) * q
        },
        0.0,
        vmax,
        1e-14,
    )
}

/// Fractional curvature c̄ of the unit ball in R^{ambient_dim} at a boundary point.
///
/// Along each line through the boundary point the complement minus the ball
/// contributes 2 L^{-s}/s, L the chord length 2|cos θ|, θ measured from the normal.
pub fn unit_ball_curvature(ambient_dim: usize, s: f64) -> Result<f64> {
    ball_curvature(ambient_dim, s, 1.0)
}

/// Fractional curvature of a ball of the given radius.
pub fn ball_curvature(ambient_dim: usize, s: f64, radius: f64) -> Result<f64> {
    check_ball_args(ambient_dim, s)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius {radius} must be positive")));
    }
    let angular = 2.0 * sphere_area(ambient_dim - 2) * polar_factor(ambient_dim, s);
    Ok((2.0 * radius).powf(-s) * angular / s)
}

/// Fractional curvature of the planar disk centred at the origin, evaluated
/// at the boundary point `p` (radius |p|), by direct angular quadrature of the
/// chord lengths seen from `p`.
pub fn disk_curvature_at(s: f64, p: [f64; 2]) -> Result<f64> {
    check_ball_args(2, s)?;
    let r = p[0].hypot(p[1]);
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("boundary point must be nonzero and finite"));
    }
    // chord along direction ω is 2|p·ω|; it vanishes along the tangent t̂ and
    // the integrand is singular there. Directions are ω = t̂ cos φ ± d̂ sin φ,
    // φ ∈ (0, π/2], covering a half circle; p·t̂ cancels exactly.
    // unnormalised frame: t = p rotated by +90°, d = -p, so p·t is exactly 0
    let pt = p[0] * -p[1] + p[1] * p[0];
    let pd = -(p[0] * p[0] + p[1] * p[1]);
    let q = 1.0 / (1.0 - s);
    let vmax = (0.5 * PI).powf(1.0 - s);
    let half = |sign: f64| {
        gauss_kronrod(
            |v| {
                if v == 0.0 {
                    // chord ~ 2 r φ near the tangent
                    return (2.0 * r).powf(-s) * q;
                }
                let phi = v.powf(q);
                let (sn, cs) = phi.sin_cos();
                let l = 2.0 * ((pt * cs + sign * pd * sn) / r).abs();
                (l / phi).powf(-s) * q
            },
            0.0,
            vmax,
            1e-14,
        )
    };
    let integral = half(1.0) + half(-1.0);
    Ok(2.0 * integral / s)
}
