//! Slow reference values for the fracflow test suite.
//!
//! Nothing here shares code with the fast path: integrals are done by
//! adaptive Simpson, G_s is not used at all for the curvature (the
//! double integral between the graph and its tangent line is integrated
//! directly), and c̄ comes from the Beta-function closed form.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tolerance not reached: estimates {a:.15e} and {b:.15e} differ by {diff:.3e}")]
    NotConverged { a: f64, b: f64, diff: f64 },
}

pub type Result<T> = std::result::Result<T, OracleError>;

pub mod pins;

/// Adaptive Simpson with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth >= 40 || diff.abs() <= 15.0 * tol.max(1e-15 * (left + right).abs()) {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(OracleError::InvalidArgument(format!("s = {s} outside (0,1)")))
    }
}

/// G_s(t) = ∫_0^t (1+w²)^{-(n+1+s)/2} dw, Simpson on unit pieces to 1e-13.
pub fn gs_oracle(n: usize, s: f64, t: f64) -> Result<f64> {
    check_s(s)?;
    if !t.is_finite() || n < 1 {
        return Err(OracleError::InvalidArgument(format!("n = {n}, t = {t}")));
    }
    let e = 0.5 * (n as f64 + 1.0 + s);
    let f = |w: f64| (1.0 + w * w).powf(-e);
    let a = t.abs();
    let mut sum = 0.0;
    let mut lo = 0.0;
    while lo < a {
        let hi = (lo + 1.0).min(a);
        sum += simpson(&f, lo, hi, 1e-15);
        lo = hi;
    }
    Ok(if t < 0.0 { -sum } else { sum })
}

/// G_s(∞) via w = tan θ: ∫_0^{π/2} cos^{n-1+s} θ dθ.
pub fn gs_infinity_oracle(n: usize, s: f64) -> Result<f64> {
    check_s(s)?;
    let p = n as f64 - 1.0 + s;
    let f = |th: f64| th.cos().max(0.0).powf(p);
    let a = simpson(&f, 0.0, 0.25 * PI, 1e-15);
    // near π/2 substitute θ = π/2 - v^{1/(1+p)} to tame the cusp
    let q = 1.0 / (1.0 + p);
    let g = |v: f64| {
        if v == 0.0 {
            return q;
        }
        let phi = v.powf(q);
        (phi.sin() / phi).powf(p) * q
    };
    let b = simpson(&g, 0.0, (0.25 * PI).powf(1.0 + p), 1e-15);
    Ok(a + b)
}

/// c̄ = (2^{-s}/s) |S^{d-2}| B((1-s)/2, (d-1)/2) from Gamma functions.
pub fn cbar_oracle(ambient_dim: usize, s: f64) -> Result<f64> {
    check_s(s)?;
    if ambient_dim < 2 {
        return Err(OracleError::InvalidArgument(format!("dimension {ambient_dim}")));
    }
    let d = ambient_dim as f64;
    let a = 0.5 * (1.0 - s);
    let b = 0.5 * (d - 1.0);
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    // |S^{d-2}| = 2 π^{(d-1)/2} / Γ((d-1)/2)
    let ln_area = (2.0f64).ln() + b * PI.ln() - ln_gamma(b);
    Ok((-s * 2f64.ln() + ln_area + ln_beta).exp() / s)
}

/// c̄ in the plane straight from the definition, by rays. Disk of radius 1
/// centred at (0,-1), boundary point 0. The upward ray at angle θ ∈ (0,π)
/// lies outside, the opposite one is inside for r < 2 sin θ; pairing them
/// leaves 2 ∫_{2 sin θ}^∞ r^{-1-s} dr = 2 (2 sin θ)^{-s}/s.
pub fn cbar_rays_2d(s: f64) -> Result<f64> {
    check_s(s)?;
    // θ = v^p flattens the endpoint singularity, symmetric about π/2
    let p = 1.0 / (1.0 - s);
    let f = |v: f64| {
        if v == 0.0 {
            return p * 2f64.powf(1.0 - s) / s;
        }
        let th = v.powf(p);
        2.0 * (2.0 * th.sin()).powf(-s) / s * p * v.powf(p - 1.0)
    };
    Ok(2.0 * simpson(&f, 0.0, (0.5 * PI).powf(1.0 / p), 1e-13))
}

/// Far behaviour of an oracle test surface beyond the outer radius.
#[derive(Clone, Copy, Debug)]
pub enum FarBehaviour {
    /// Keep integrating the given function to infinity.
    Exact,
    /// Replace u by its mean (periodic data).
    Mean(f64),
}

/// Test surface u: R → R with its derivative.
pub struct Surface<'a> {
    pub value: &'a dyn Fn(f64) -> f64,
    pub slope: &'a dyn Fn(f64) -> f64,
    pub far: FarBehaviour,
}

/// Settings of the curvature oracle.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Absolute Simpson tolerance of the inner integral (scaled by r^{-1-s}).
    pub inner_tolerance: f64,
    /// Absolute Simpson tolerance per unit outer piece.
    pub outer_tolerance: f64,
    /// Beyond this radius use the `FarBehaviour` in closed-range form.
    pub outer_radius: f64,
    /// Excision radii ε₀ > ε₁ > ε₂ > 0 for the principal value.
    pub pairing_radii: Vec<f64>,
    /// Accepted spread of the two last extrapolants.
    pub extrapolation_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            inner_tolerance: 1e-13,
            outer_tolerance: 1e-11,
            outer_radius: 200.0,
            pairing_radii: vec![0.02, 0.01, 0.005, 0.0025],
            extrapolation_tolerance: 1e-6,
        }
    }
}

/// H_s at x for the subgraph of u (n = 1), from the double integral
///
///   H = 2 ∫_R ∫_{u(x')}^{T(x')} (|x'-x|² + (z-u(x))²)^{-(2+s)/2} dz dx'
///
/// with T the tangent line at x; the region |x'-x| < ε is excised and the
/// result extrapolated to ε → 0 (exponents 1-s and 3-s).
pub fn hs_oracle(surface: &Surface, x: f64, s: f64, cfg: &OracleConfig) -> Result<f64> {
    check_s(s)?;
    let radii = &cfg.pairing_radii;
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(OracleError::InvalidArgument("need >= 3 decreasing positive pairing radii".into()));
    }
    if !(cfg.outer_radius > 1.0) {
        return Err(OracleError::InvalidArgument("outer radius must exceed 1".into()));
    }
    let e = 0.5 * (2.0 + s);
    let u0 = (surface.value)(x);
    let du = (surface.slope)(x);

    // inner integral at signed offset d = x' - x, with the surface value v there
    let inner = |d: f64, v: f64| -> f64 {
        let t = u0 + du * d;
        if t == v {
            return 0.0;
        }
        let r2 = d * d;
        let g = |z: f64| {
            let w = z - u0;
            (r2 + w * w).powf(-e)
        };
        let scale = d.abs().powf(-1.0 - s);
        // split at z = u0 where the integrand peaks
        let (lo, hi, sign) = if v < t { (v, t, 1.0) } else { (t, v, -1.0) };
        let val = if lo < u0 && u0 < hi {
            simpson(&g, lo, u0, cfg.inner_tolerance * scale) + simpson(&g, u0, hi, cfg.inner_tolerance * scale)
        } else {
            simpson(&g, lo, hi, cfg.inner_tolerance * scale)
        };
        sign * val
    };

    // ∫_ε^R [inner(+r) + inner(-r)] dr
    let near = |eps: f64| -> f64 {
        let f = |r: f64| inner(r, (surface.value)(x + r)) + inner(-r, (surface.value)(x - r));
        let mut total = 0.0;
        let mut a = eps;
        while a < cfg.outer_radius {
            let b = if a < 1.0 { (2.0 * a).min(1.0) } else { (a + 1.0).min(cfg.outer_radius) };
            total += simpson(&f, a, b, cfg.outer_tolerance);
            a = b;
        }
        total
    };

    // [R, ∞) via r = R v^{-1/s}, dr = (R/s) v^{-1/s-1} dv, v ∈ (0, 1]
    let far = {
        let rr = cfg.outer_radius;
        let val = |xp: f64| match surface.far {
            FarBehaviour::Exact => (surface.value)(xp),
            FarBehaviour::Mean(m) => m,
        };
        let f = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let r = rr * v.powf(-1.0 / s);
            let jac = rr / s * v.powf(-1.0 / s - 1.0);
            (inner(r, val(x + r)) + inner(-r, val(x - r))) * jac
        };
        let mut acc = 0.0;
        let pieces = 64;
        for k in 0..pieces {
            let a = k as f64 / pieces as f64;
            let b = (k + 1) as f64 / pieces as f64;
            acc += simpson(&f, a, b, cfg.outer_tolerance);
        }
        acc
    };

    let vals: Vec<f64> = radii.iter().map(|&eps| 2.0 * (near(eps) + far)).collect();
    let p1 = 1.0 - s;
    let p2 = 3.0 - s;
    // first level removes ε^{1-s}, second ε^{3-s}; radii need not halve exactly
    let lvl1: Vec<f64> = (0..vals.len() - 1)
        .map(|k| {
            let q = (radii[k] / radii[k + 1]).powf(p1);
            (q * vals[k + 1] - vals[k]) / (q - 1.0)
        })
        .collect();
    let lvl2: Vec<f64> = (0..lvl1.len() - 1)
        .map(|k| {
            let q = (radii[k] / radii[k + 1]).powf(p2);
            (q * lvl1[k + 1] - lvl1[k]) / (q - 1.0)
        })
        .collect();
    let best = *lvl2.last().unwrap();
    let prev = if lvl2.len() >= 2 { lvl2[lvl2.len() - 2] } else { lvl1[lvl1.len() - 1] };
    let diff = (best - prev).abs();
    if diff > cfg.extrapolation_tolerance.max(1e-9 * best.abs()) {
        return Err(OracleError::NotConverged { a: prev, b: best, diff });
    }
    Ok(best)
}
