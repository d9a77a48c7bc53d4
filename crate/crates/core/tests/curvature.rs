mod common;

use std::f64::consts::PI;

use fracflow::curvature::{hs_at, hs_at_kernel_form, hs_field, tail_contribution, CurvatureOperator, QuadratureConfig};
use fracflow::gridfield::{FarFieldModel, GridFunction, GridSpec};
use fracflow::kernel::KernelParams;
use fracflow::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kp(s: f64) -> KernelParams {
    KernelParams::new(1, s).unwrap()
}

#[test]
fn corpus_agrees_with_oracle_pins() {
    let h = 1.0 / 64.0;
    for p in common::pins().hs {
        let (g, cfg, idx) = common::corpus_field(&p.function, h, p.x);
        let v = hs_at(kp(p.s), &g, idx, cfg).unwrap();
        let tol = if p.function == "affine" { 1e-8 } else { 1e-4 };
        assert!((v - p.value).abs() <= tol, "{} s={} x={}: {v} vs {}", p.function, p.s, p.x, p.value);
    }
}

#[test]
fn kernel_form_agrees_on_smooth_data() {
    let h = 1.0 / 64.0;
    for s in [0.25, 0.5, 0.75] {
        for (name, x) in [("gaussian", 0.0), ("gaussian", 0.5), ("sine", 1.0), ("sine", 0.25), ("affine", 0.5)] {
            let (g, cfg, idx) = common::corpus_field(name, h, x);
            let a = hs_at(kp(s), &g, idx, cfg).unwrap();
            let b = hs_at_kernel_form(kp(s), &g, idx, cfg).unwrap();
            assert!((a - b).abs() <= 1e-5, "{name} s={s}: {a} vs {b}");
        }
    }
}

#[test]
fn signs_of_corpus() {
    let h = 1.0 / 32.0;
    let (g, cfg, i) = common::corpus_field("gaussian", h, 0.0);
    assert!(hs_at(kp(0.5), &g, i, cfg).unwrap() > 0.0);
    let (g, cfg, i) = common::corpus_field("cone", h, 1.0);
    assert!(hs_at(kp(0.5), &g, i, cfg).unwrap() < 0.0);
    let (g, cfg, i) = common::corpus_field("sine", h, -1.0);
    assert!(hs_at(kp(0.5), &g, i, cfg).unwrap() < 0.0);
}

#[test]
fn vertical_shift_is_invisible() {
    let g = common::gaussian(4.0, 1.0 / 16.0);
    let shifted = GridFunction::from_values(
        g.grid(),
        FarFieldModel::affine(vec![0.0], 3.0),
        g.values().iter().map(|v| v + 3.0).collect(),
        fracflow::gridfield::Continuation::Matched { decay: 0.5 },
    )
    .unwrap();
    let cfg = QuadratureConfig::default();
    let a = hs_field(kp(0.5), &g, cfg).unwrap().values;
    let b = hs_field(kp(0.5), &shifted, cfg).unwrap().values;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-11);
    }
}

#[test]
fn lattice_translation_commutes_on_periodic_data() {
    let h = 1.0 / 32.0;
    let g = GridSpec::new(1, 1.0, h).unwrap();
    let far = FarFieldModel::periodic(vec![2.0]);
    let f = |x: f64| 0.3 * (PI * x).sin() + 0.1 * (2.0 * PI * x).cos();
    let a = GridFunction::sample(g, far.clone(), |x| f(x[0])).unwrap();
    let b = GridFunction::sample(g, far, |x| f(x[0] + 5.0 * h)).unwrap();
    let cfg = QuadratureConfig::default();
    let ha = hs_field(kp(0.4), &a, cfg).unwrap().values;
    let hb = hs_field(kp(0.4), &b, cfg).unwrap().values;
    let m = ha.len();
    for i in 0..m {
        assert!((hb[i] - ha[(i + 5) % m]).abs() < 1e-11, "node {i}");
    }
}

#[test]
fn reflection_flips_sign() {
    let g = common::gaussian(4.0, 1.0 / 16.0);
    let neg = common::sampled_matched(4.0, 1.0 / 16.0, |x| -(-x * x).exp());
    let cfg = QuadratureConfig::default();
    let a = hs_field(kp(0.5), &g, cfg).unwrap().values;
    let b = hs_field(kp(0.5), &neg, cfg).unwrap().values;
    for (x, y) in a.iter().zip(&b) {
        assert!((x + y).abs() < 1e-11);
    }
}

#[test]
fn dilation_scales_by_mu_to_minus_s() {
    // u_μ(x) = μ u(x/μ) has H_s(μx) = μ^{-s} H_s(x)
    let h = 1.0 / 64.0;
    let mu = 2.0;
    for s in [0.25, 0.5, 0.75] {
        let g = common::gaussian(8.0, h);
        let gm = GridFunction::sample(common::spec(16.0, h), FarFieldModel::affine(vec![0.0], 0.0), |x| {
            mu * (-(x[0] / mu).powi(2)).exp()
        })
        .unwrap();
        let cfg = QuadratureConfig::default();
        for x in [0.0, 0.5] {
            let a = hs_at(kp(s), &g, ((x + 8.0) / h) as usize, cfg).unwrap();
            let b = hs_at(kp(s), &gm, ((mu * x + 16.0) / h) as usize, cfg).unwrap();
            assert!((b - mu.powf(-s) * a).abs() <= 1e-3 * a.abs(), "s={s} x={x}: {b} vs {}", mu.powf(-s) * a);
        }
    }
}

#[test]
fn drop_mode_converges_at_order_one_minus_s() {
    let s = 0.5;
    let exact = common::pins().hs.into_iter().find(|p| p.function == "gaussian" && p.s == s && p.x == 0.0).unwrap().value;
    let mut errs = vec![];
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let g = common::gaussian(8.0, h);
        errs.push((hs_at(kp(s), &g, g.len() / 2, QuadratureConfig::default().drop_cell()).unwrap() - exact).abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.0 - s - 0.1, "errors {errs:?}");
    }
    // the correction is far more accurate than dropping
    let g = common::gaussian(8.0, 1.0 / 64.0);
    let c = (hs_at(kp(s), &g, g.len() / 2, QuadratureConfig::default()).unwrap() - exact).abs();
    assert!(c < 0.01 * errs[2], "{c} vs {}", errs[2]);
}

#[test]
fn drop_mode_is_monotone_in_values() {
    // H_s at i is nondecreasing in u_i and nonincreasing in every other value
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = GridSpec::new(1, 2.0, 1.0 / 16.0).unwrap();
    let far = FarFieldModel::affine(vec![0.0], 0.0);
    let base: Vec<f64> = (0..g.cells() + 1)
        .map(|k| {
            let x = -2.0 + k as f64 / 16.0;
            (1.0 - x * x / 4.0) * rng.gen_range(-0.3..0.3)
        })
        .collect();
    let f = GridFunction::from_values(g, far.clone(), base.clone(), fracflow::gridfield::Continuation::Matched { decay: 0.5 })
        .unwrap();
    let op = CurvatureOperator::new(kp(0.5), g, &far, QuadratureConfig::default().drop_cell()).unwrap();
    let h0 = op.values(&f).unwrap();
    for j in [3usize, 20, 32, 50] {
        let mut v = base.clone();
        v[j] += 0.05;
        let h1 = op.values(&f.with_values(v)).unwrap();
        for i in 0..h0.len() {
            if i == j {
                assert!(h1[i] >= h0[i] - 1e-12);
            } else {
                assert!(h1[i] <= h0[i] + 1e-12, "i {i} j {j}");
            }
        }
    }
}

#[test]
fn tail_shrinks_with_outer_radius() {
    let g = common::gaussian(4.0, 1.0 / 8.0);
    let i = g.len() / 2;
    let a = tail_contribution(kp(0.5), &g, i, QuadratureConfig::default().with_outer_radius(16.0)).unwrap();
    let b = tail_contribution(kp(0.5), &g, i, QuadratureConfig::default().with_outer_radius(64.0)).unwrap();
    assert!(b.abs() < a.abs());
    let x = hs_at(kp(0.5), &g, i, QuadratureConfig::default().with_outer_radius(16.0)).unwrap();
    let y = hs_at(kp(0.5), &g, i, QuadratureConfig::default().with_outer_radius(64.0)).unwrap();
    assert!((x - y).abs() < 1e-4, "{x} {y}");
}

#[test]
fn errors_are_reported() {
    let g = common::gaussian(4.0, 1.0 / 8.0);
    let other = GridSpec::new(1, 4.0, 1.0 / 16.0).unwrap();
    let op = CurvatureOperator::new(kp(0.5), other, g.far_field(), QuadratureConfig::default()).unwrap();
    assert!(matches!(op.hs_at(&g, 0), Err(Error::GridMismatch(_))));
    let small = QuadratureConfig::default().with_outer_radius(0.1);
    assert!(matches!(hs_at(kp(0.5), &g, 0, small), Err(Error::Resolution(_))));
    assert!(hs_at(kp(0.5), &g, g.len(), QuadratureConfig::default()).is_err());
    // strict data off the far field
    let bad = GridFunction::sample(GridSpec::new(1, 4.0, 0.5).unwrap(), FarFieldModel::affine(vec![0.0], 0.0), |_| 1.0);
    assert!(matches!(bad, Err(Error::FarFieldMismatch { .. })));
}

#[test]
fn two_dimensional_smoke() {
    let params = KernelParams::new(2, 0.5).unwrap();
    let g = GridSpec::new(2, 2.0, 0.125).unwrap();
    let far = FarFieldModel::affine(vec![0.0, 0.0], 0.0);
    let f = GridFunction::from_values(
        g,
        far.clone(),
        {
            let probe = GridFunction::sample(g, FarFieldModel::affine(vec![0.2, -0.1], 0.0), |x| 0.2 * x[0] - 0.1 * x[1]).unwrap();
            (0..probe.len())
                .map(|i| {
                    let c = probe.coords(i);
                    (-(c[0] * c[0] + c[1] * c[1])).exp()
                })
                .collect()
        },
        fracflow::gridfield::Continuation::Matched { decay: 0.5 },
    )
    .unwrap();
    let op = CurvatureOperator::new(params, g, &far, QuadratureConfig::default()).unwrap();
    let hv = op.values(&f).unwrap();
    let mid = f.flat(16, 16);
    assert!(hv[mid] > 0.0 && hv[mid].is_finite());
    // lattice symmetry x ↔ y
    assert!((hv[f.flat(20, 16)] - hv[f.flat(16, 20)]).abs() < 1e-9);
    assert!((hv[f.flat(12, 16)] - hv[f.flat(20, 16)]).abs() < 1e-9);
    // planes are flat
    let pf = FarFieldModel::affine(vec![0.2, -0.1], 0.3);
    let plane = GridFunction::sample(g, pf.clone(), |x| 0.2 * x[0] - 0.1 * x[1] + 0.3).unwrap();
    let op = CurvatureOperator::new(params, g, &pf, QuadratureConfig::default()).unwrap();
    for v in op.values(&plane).unwrap() {
        assert!(v.abs() < 1e-8);
    }
}
