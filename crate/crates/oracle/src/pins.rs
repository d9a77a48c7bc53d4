//! The frozen reference values consumed by the fracflow test suite.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{cbar_oracle, gs_infinity_oracle, gs_oracle, hs_oracle, FarBehaviour, OracleConfig, Result, Surface};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsPin {
    pub n: usize,
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsInfinityPin {
    pub n: usize,
    pub s: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbarPin {
    pub ambient_dim: usize,
    pub s: f64,
    pub value: f64,
}

/// H_s of a corpus function (n = 1) at x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsPin {
    pub function: String,
    pub formula: String,
    pub s: f64,
    pub x: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pins {
    pub gs: Vec<GsPin>,
    pub gs_infinity: Vec<GsInfinityPin>,
    pub cbar: Vec<CbarPin>,
    pub hs: Vec<HsPin>,
}

/// A named one-dimensional test function with derivative.
pub struct CorpusFunction {
    pub name: &'static str,
    pub formula: &'static str,
    pub value: fn(f64) -> f64,
    pub slope: fn(f64) -> f64,
    pub far: FarBehaviour,
    /// Evaluation points.
    pub points: &'static [f64],
}

fn affine(x: f64) -> f64 {
    0.3 * x + 0.2
}
fn affine_d(_x: f64) -> f64 {
    0.3
}
fn cone(x: f64) -> f64 {
    0.5 * x.abs()
}
fn cone_d(x: f64) -> f64 {
    0.5 * x.signum()
}
fn sine(x: f64) -> f64 {
    0.5 * (0.5 * PI * x).sin()
}
fn sine_d(x: f64) -> f64 {
    0.25 * PI * (0.5 * PI * x).cos()
}
fn gauss(x: f64) -> f64 {
    (-x * x).exp()
}
fn gauss_d(x: f64) -> f64 {
    -2.0 * x * (-x * x).exp()
}

/// affine, cone away from the tip, sine (period 4), Gaussian.
pub fn corpus() -> Vec<CorpusFunction> {
    vec![
        CorpusFunction {
            name: "affine",
            formula: "0.3 x + 0.2",
            value: affine,
            slope: affine_d,
            far: FarBehaviour::Exact,
            points: &[0.5],
        },
        CorpusFunction {
            name: "cone",
            formula: "0.5 |x|",
            value: cone,
            slope: cone_d,
            far: FarBehaviour::Exact,
            points: &[1.0],
        },
        CorpusFunction {
            name: "sine",
            formula: "0.5 sin(pi x / 2)",
            value: sine,
            slope: sine_d,
            far: FarBehaviour::Mean(0.0),
            points: &[1.0, 0.25],
        },
        CorpusFunction {
            name: "gaussian",
            formula: "exp(-x^2)",
            value: gauss,
            slope: gauss_d,
            far: FarBehaviour::Exact,
            points: &[0.0, 0.5],
        },
    ]
}

pub const CORPUS_S: [f64; 3] = [0.25, 0.5, 0.75];

/// Compute every pin (takes a few seconds).
pub fn compute_pins() -> Result<Pins> {
    let mut gs = vec![];
    for (n, s, t) in [(1, 0.5, 1.0), (1, 0.5, 0.3), (1, 0.5, 7.5), (1, 0.25, 2.0), (2, 0.5, 1.0), (2, 0.75, 40.0)] {
        gs.push(GsPin { n, s, t, value: gs_oracle(n, s, t)? });
    }
    let mut gs_infinity = vec![];
    for (n, s) in [(1, 0.1), (1, 0.5), (1, 0.9), (2, 0.5)] {
        gs_infinity.push(GsInfinityPin { n, s, value: gs_infinity_oracle(n, s)? });
    }
    let mut cbar = vec![];
    for d in [2, 3] {
        for s in CORPUS_S {
            cbar.push(CbarPin { ambient_dim: d, s, value: cbar_oracle(d, s)? });
        }
    }
    let mut hs = vec![];
    let cfg = OracleConfig::default();
    for f in corpus() {
        for s in CORPUS_S {
            for &x in f.points {
                let surf = Surface { value: &f.value, slope: &f.slope, far: f.far };
                hs.push(HsPin {
                    function: f.name.into(),
                    formula: f.formula.into(),
                    s,
                    x,
                    value: hs_oracle(&surf, x, s, &cfg)?,
                });
            }
        }
    }
    Ok(Pins { gs, gs_infinity, cbar, hs })
}
