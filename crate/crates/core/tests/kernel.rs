mod common;

use fracflow::kernel::{ball_curvature, gs_infinity, gs_prime, gs_value, unit_ball_curvature, GsTable, KernelParams};
use proptest::prelude::*;

fn kp(n: usize, s: f64) -> KernelParams {
    KernelParams::new(n, s).unwrap()
}

#[test]
fn gs_matches_pins() {
    for p in common::pins().gs {
        let params = kp(p.n, p.s);
        let direct = gs_value(params, p.t).unwrap();
        assert!((direct - p.value).abs() < 1e-11, "{p:?}: {direct}");
        let table = GsTable::new(params).value(p.t);
        assert!((table - p.value).abs() < 1e-10, "{p:?}: table {table}");
    }
}

#[test]
fn gs_infinity_matches_pins() {
    for p in common::pins().gs_infinity {
        let v = gs_infinity(kp(p.n, p.s));
        assert!((v - p.value).abs() < 1e-10, "{p:?}: {v}");
        assert!((GsTable::new(kp(p.n, p.s)).limit_at_infinity() - p.value).abs() < 1e-10);
    }
}

#[test]
fn cbar_matches_pins() {
    for p in common::pins().cbar {
        let v = unit_ball_curvature(p.ambient_dim, p.s).unwrap();
        assert!((v - p.value).abs() < 1e-8 * p.value, "{p:?}: {v}");
    }
}

#[test]
fn ball_curvature_scales() {
    let c = unit_ball_curvature(2, 0.5).unwrap();
    let r = ball_curvature(2, 0.5, 4.0).unwrap();
    assert!((r - c * 4f64.powf(-0.5)).abs() < 1e-12 * c);
}

#[test]
fn invalid_parameters() {
    assert!(KernelParams::new(1, 0.0).is_err());
    assert!(KernelParams::new(1, 1.0).is_err());
    assert!(KernelParams::new(0, 0.5).is_err());
    assert!(gs_value(kp(1, 0.5), f64::NAN).is_err());
    assert_eq!(gs_value(kp(1, 0.5), 0.0).unwrap(), 0.0);
    assert_eq!(gs_prime(kp(1, 0.5), 0.0).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_is_odd_increasing_and_bounded(s in 0.05f64..0.95, t in -200.0f64..200.0, dt in 1e-3f64..5.0) {
        let table = GsTable::new(kp(1, s));
        let a = table.value(t);
        prop_assert!((a + table.value(-t)).abs() < 1e-14);
        prop_assert!(table.value(t + dt) > a);
        prop_assert!(a.abs() < table.limit_at_infinity());
    }

    #[test]
    fn table_tracks_quadrature(s in 0.05f64..0.95, t in 0.0f64..80.0) {
        let params = kp(2, s);
        let d = gs_value(params, t).unwrap();
        prop_assert!((GsTable::new(params).value(t) - d).abs() < 1e-10);
    }
}
