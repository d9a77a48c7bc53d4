//! Shared fixtures: the frozen oracle pins and the corpus on the lattice.
#![allow(dead_code)]

use std::f64::consts::PI;

use fracflow::curvature::QuadratureConfig;
use fracflow::gridfield::{Continuation, FarFieldModel, GridFunction, GridSpec};
use fracflow_oracle::pins::Pins;

pub fn pins() -> Pins {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/oracle_pins.json");
    serde_json::from_str(&std::fs::read_to_string(path).expect("pins file")).expect("pins json")
}

/// Corpus function `name` on a lattice of spacing h, with the quadrature
/// settings matching the oracle's treatment of the far field, and the node
/// index of `x`.
pub fn corpus_field(name: &str, h: f64, x: f64) -> (GridFunction, QuadratureConfig, usize) {
    let cfg = QuadratureConfig::default();
    let (g, cfg, l) = match name {
        "affine" => {
            let far = FarFieldModel::affine(vec![0.3], 0.2);
            (GridFunction::sample(spec(8.0, h), far, |x| 0.3 * x[0] + 0.2).unwrap(), cfg, 8.0)
        }
        "cone" => {
            let far = FarFieldModel::symmetric_cone(1, 0.5);
            (GridFunction::sample(spec(8.0, h), far, |x| 0.5 * x[0].abs()).unwrap(), cfg, 8.0)
        }
        "sine" => {
            // one period of 0.5 sin(πx/2); the oracle replaces |x'-x| > 200 by the mean
            let far = FarFieldModel::periodic(vec![4.0]);
            let g = GridFunction::sample(spec(2.0, h), far, |x| 0.5 * (0.5 * PI * x[0]).sin()).unwrap();
            (g, cfg.with_outer_radius(256.0), 2.0)
        }
        "gaussian" => {
            let far = FarFieldModel::affine(vec![0.0], 0.0);
            (GridFunction::sample(spec(8.0, h), far, |x| (-x[0] * x[0]).exp()).unwrap(), cfg, 8.0)
        }
        other => panic!("unknown corpus function {other}"),
    };
    let idx = ((x + l) / h).round() as usize;
    assert!((g.coords(idx)[0] - x).abs() < 1e-12);
    (g, cfg, idx)
}

pub fn spec(l: f64, h: f64) -> GridSpec {
    GridSpec::new(1, l, h).unwrap()
}

/// exp(-x²) on [-l, l]; small windows leave a mismatch, closed with the matched tail.
pub fn gaussian(l: f64, h: f64) -> GridFunction {
    sampled_matched(l, h, |x| (-x * x).exp())
}

pub fn sampled_matched(l: f64, h: f64, f: impl Fn(f64) -> f64) -> GridFunction {
    let g = spec(l, h);
    let m = (2.0 * l / h).round() as usize;
    let values = (0..=m).map(|k| f(-l + k as f64 * h)).collect();
    GridFunction::from_values(g, FarFieldModel::affine(vec![0.0], 0.0), values, Continuation::Matched { decay: 0.5 }).unwrap()
}
