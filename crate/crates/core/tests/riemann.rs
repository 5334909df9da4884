use std::collections::BTreeMap;

use fanlab_core::layers::{membership, MembershipOptions};
use fanlab_core::models::{builtin, HyperbolicModel};
use fanlab_core::riemann::{
    assemble, boundary_map, compare_limits, evaluate_fan, solve_boundary_riemann, CompareConfig, FanSolution, Provider,
    RiemannConfig,
};
use fanlab_core::wavefan::{genuine_nonlinearity, lax_oracle, WaveKind};
use fanlab_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use serde_json::json;

fn model(name: &str, params: serde_json::Value) -> HyperbolicModel {
    let p: BTreeMap<String, serde_json::Value> = serde_json::from_value(params).unwrap();
    builtin(name, &p).unwrap()
}

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn lax_config() -> RiemannConfig {
    RiemannConfig {
        provider: Provider::LaxOracle,
        ..RiemannConfig::default()
    }
}

fn check_fan_invariants(m: &HyperbolicModel, fan: &FanSolution, config: &RiemannConfig) {
    let again = assemble(m, &fan.u0, &fan.strengths, config).unwrap();
    assert!((&again.trace - &fan.trace).amax() <= 1e-9);
    for p in &fan.pieces {
        assert!(p.speed.0 > 0.0 && p.speed.0 <= p.speed.1);
    }
    for w in fan.pieces.windows(2) {
        assert!(w[0].speed.1 <= w[1].speed.0, "overlapping speed intervals");
        assert!(w[0].family <= w[1].family);
    }
    assert_eq!(evaluate_fan(fan, 0.0).unwrap(), fan.trace);
    let opts = MembershipOptions {
        horizon: Some(fan.horizon),
        ..MembershipOptions::default()
    };
    let mem = membership(m, &fan.trace, &fan.ub, 1e-10, &config.layer, &opts).unwrap();
    assert!(mem.residual <= 1e-9);
}

#[test]
fn equal_data_give_empty_fan() {
    let m = model("p_system", json!({}));
    let u0 = dv(&[1.05, -0.02]);
    let fan = solve_boundary_riemann(&m, &u0, &u0, &RiemannConfig::default()).unwrap();
    assert!(fan.s.iter().all(|x| *x == 0.0));
    assert!(fan.strengths.iter().all(|x| *x == 0.0));
    assert_eq!(fan.trace, u0);
    assert!(fan.pieces.is_empty());
    for speed in [0.0, 0.5, 10.0] {
        assert_eq!(evaluate_fan(&fan, speed).unwrap(), u0);
    }
}

#[test]
fn linear_model_matches_eigen_expansion() {
    let matrix = [[-1.0, 0.5], [0.3, 2.0]];
    let m = model("linear", json!({ "matrix": matrix }));
    let a: DMatrix<f64> = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.3, 2.0]);
    // independent eigen-expansion oracle
    let tr = a.trace();
    let det = a.determinant();
    let disc = (tr * tr - 4.0 * det).sqrt();
    let lam = [(tr - disc) / 2.0, (tr + disc) / 2.0];
    let r: Vec<DVector<f64>> = lam.iter().map(|l| dv(&[a[(0, 1)], l - a[(0, 0)]])).collect();
    let u0 = dv(&[0.05, -0.03]);
    let ub = dv(&[-0.04, 0.06]);
    let basis = DMatrix::from_columns(&r);
    let c = basis.clone().lu().solve(&(&ub - &u0)).unwrap();
    let trace = &u0 + &r[1] * c[1];

    let fan = solve_boundary_riemann(&m, &u0, &ub, &RiemannConfig::default()).unwrap();
    assert!((&fan.trace - &trace).amax() < 1e-8);
    assert_eq!(fan.pieces.len(), 1);
    let p = &fan.pieces[0];
    assert!((p.speed.0 - lam[1]).abs() < 1e-8 && (p.speed.1 - lam[1]).abs() < 1e-8);
    assert!((&p.left_state - &trace).amax() < 1e-8);
    assert!((&p.right_state - &u0).amax() < 1e-8);
    let jump = &p.left_state - &p.right_state;
    assert!((jump - &r[1] * c[1]).amax() < 1e-8);
    assert!((evaluate_fan(&fan, 0.5 * lam[1]).unwrap() - &trace).amax() < 1e-8);
    assert!((evaluate_fan(&fan, 2.0 * lam[1]).unwrap() - &u0).amax() < 1e-12);
    check_fan_invariants(&m, &fan, &RiemannConfig::default());
}

fn hugoniot_datum(m: &HyperbolicModel, u0: &DVector<f64>, size: f64) -> (f64, DVector<f64>, f64) {
    let gnl = genuine_nonlinearity(m, 2, u0).unwrap();
    let s = size * gnl.signum();
    let wave = lax_oracle(m, 2, s, u0).unwrap();
    (s, wave.left_state, wave.speed.0)
}

#[test]
fn hugoniot_datum_is_a_single_shock() {
    let m = model("p_system", json!({"gamma": 1.4}));
    let u0 = dv(&[1.0, 0.0]);
    let (s, ub, sigma) = hugoniot_datum(&m, &u0, 0.06);
    let cfg = lax_config();
    let fan = solve_boundary_riemann(&m, &u0, &ub, &cfg).unwrap();
    assert!(fan.s.amax() <= 1e-7, "S = {}", fan.s);
    assert!((fan.strengths[0] - s).abs() < 1e-7);
    assert_eq!(fan.pieces.len(), 1);
    assert_eq!(fan.pieces[0].kind, WaveKind::Shock);
    assert!((fan.pieces[0].speed.0 - sigma).abs() < 1e-7);
    check_fan_invariants(&m, &fan, &cfg);
}

#[test]
fn envelope_provider_sees_hugoniot_datum_to_third_order() {
    let m = model("p_system", json!({"gamma": 1.4}));
    let u0 = dv(&[1.0, 0.0]);
    let mut layer = Vec::new();
    for size in [0.08, 0.04, 0.02] {
        let (_, ub, _) = hugoniot_datum(&m, &u0, size);
        let fan = solve_boundary_riemann(&m, &u0, &ub, &RiemannConfig::default()).unwrap();
        assert_eq!(fan.pieces.iter().filter(|p| p.kind == WaveKind::Shock).count(), 1);
        layer.push(fan.s.amax());
    }
    assert!(layer[0] / layer[1] > 6.0 && layer[1] / layer[2] > 6.0, "{layer:?}");
}

#[test]
fn rarefaction_state_inverts_speed() {
    let m = model("p_system", json!({"gamma": 2.0}));
    let u0 = dv(&[1.0, 0.0]);
    let gnl = genuine_nonlinearity(&m, 2, &u0).unwrap();
    let wave = lax_oracle(&m, 2, -0.08 * gnl.signum(), &u0).unwrap();
    for provider in [Provider::EnvelopeEngine, Provider::LaxOracle] {
        let cfg = RiemannConfig {
            provider,
            ..RiemannConfig::default()
        };
        let fan = solve_boundary_riemann(&m, &u0, &wave.left_state, &cfg).unwrap();
        assert_eq!(fan.pieces.len(), 1);
        let p = &fan.pieces[0];
        assert_eq!(p.kind, WaveKind::Rarefaction);
        let mut prev = None::<DVector<f64>>;
        for j in 1..40 {
            let speed = p.speed.0 + (p.speed.1 - p.speed.0) * j as f64 / 40.0;
            let v = evaluate_fan(&fan, speed).unwrap();
            let lam = m.spectral(&v).unwrap().lambda(1);
            assert!((lam - speed).abs() < 1e-3, "{provider:?} speed {speed} lambda {lam}");
            if let Some(q) = &prev {
                // p-system 2-rarefactions are monotone in v
                assert!((v[0] - q[0]) * (p.right_state[0] - p.left_state[0]) >= -1e-14);
            }
            prev = Some(v);
        }
        assert_eq!(evaluate_fan(&fan, 0.9 * p.speed.0).unwrap(), fan.trace);
        assert_eq!(evaluate_fan(&fan, 1.1 * p.speed.1).unwrap(), u0);
        check_fan_invariants(&m, &fan, &cfg);
    }
}

#[test]
fn shocks_are_right_continuous() {
    let m = model("p_system", json!({"gamma": 1.4}));
    let u0 = dv(&[1.0, 0.0]);
    let (_, ub, sigma) = hugoniot_datum(&m, &u0, 0.05);
    let fan = solve_boundary_riemann(&m, &u0, &ub, &lax_config()).unwrap();
    let at = fan.pieces[0].speed.0;
    assert!((at - sigma).abs() < 1e-7);
    assert_eq!(evaluate_fan(&fan, at).unwrap(), u0);
    assert_eq!(evaluate_fan(&fan, at * (1.0 - 1e-12)).unwrap(), fan.trace);
}

#[test]
fn bad_speeds_and_distant_data_are_rejected() {
    let m = model("linear", json!({}));
    let u0 = dv(&[0.0, 0.0]);
    let fan = solve_boundary_riemann(&m, &u0, &dv(&[0.01, 0.01]), &RiemannConfig::default()).unwrap();
    assert!(matches!(evaluate_fan(&fan, -0.1), Err(Error::UnresolvedSpeed(_))));
    assert!(matches!(evaluate_fan(&fan, f64::NAN), Err(Error::UnresolvedSpeed(_))));
    let far = dv(&[0.2, 0.0]);
    assert!(matches!(
        solve_boundary_riemann(&m, &u0, &far, &RiemannConfig::default()),
        Err(Error::InvalidParams(_))
    ));
}

#[test]
fn providers_agree_on_composite_data() {
    let m = model("p_system", json!({"gamma": 2.0}));
    let u0 = dv(&[1.0, 0.0]);
    let gnl = genuine_nonlinearity(&m, 2, &u0).unwrap();
    // rarefaction plus layer: the providers share the exact integral curve
    let x = dv(&[0.004, -0.05 * gnl.signum()]);
    let lax = lax_config();
    let ub = boundary_map(&m, &u0, &x, &lax).unwrap();
    let a = solve_boundary_riemann(&m, &u0, &ub, &RiemannConfig::default()).unwrap();
    let b = solve_boundary_riemann(&m, &u0, &ub, &lax).unwrap();
    assert!((&a.trace - &b.trace).amax() < 1e-9);
    let (lo, hi) = b.pieces[0].speed;
    // envelope speeds are chord slopes on the tau grid
    let h = 0.05 / 1023.0;
    let mut worst: f64 = 0.0;
    for j in 0..=400 {
        let speed = 0.5 * lo + (2.0 * hi - 0.5 * lo) * j as f64 / 400.0;
        worst = worst.max((evaluate_fan(&a, speed).unwrap() - evaluate_fan(&b, speed).unwrap()).amax());
    }
    assert!(worst < 2.0 * h, "sup difference {worst:e}");
}

#[test]
fn noncons_model_solves_with_envelope_provider() {
    let m = model("noncons_demo", json!({}));
    let u0 = m.domain().center.clone();
    let n = m.dim();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        x[i] = 0.01 * (1.0 + i as f64) * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let cfg = RiemannConfig::default();
    let ub = boundary_map(&m, &u0, &x, &cfg).unwrap();
    let fan = solve_boundary_riemann(&m, &u0, &ub, &cfg).unwrap();
    assert!((&fan.s - x.rows(0, m.k())).amax() < 1e-6);
    check_fan_invariants(&m, &fan, &cfg);
    assert!(matches!(
        solve_boundary_riemann(&m, &u0, &ub, &lax_config()),
        Err(Error::InvalidParams(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_recovers_parameters(
        s1 in -0.01f64..0.01,
        s2 in -0.04f64..0.04,
        v0 in 0.95f64..1.05,
        u0c in -0.05f64..0.05,
    ) {
        let m = model("p_system", json!({"gamma": 2.0}));
        let u0 = dv(&[v0, u0c]);
        let x = dv(&[s1, s2]);
        let cfg = RiemannConfig::default();
        let ub = boundary_map(&m, &u0, &x, &cfg).unwrap();
        let fan = solve_boundary_riemann(&m, &u0, &ub, &cfg).unwrap();
        prop_assert!((fan.s[0] - s1).abs() < 1e-6);
        prop_assert!((fan.strengths[0] - s2).abs() < 1e-6);
        prop_assert!(fan.residual <= 1e-9);
    }
}

fn halving_ladder(start: f64, floor: f64) -> Vec<f64> {
    let mut out = vec![start];
    while *out.last().unwrap() * 0.5 >= floor * (1.0 - 1e-12) {
        out.push(out.last().unwrap() * 0.5);
    }
    if *out.last().unwrap() > floor * (1.0 + 1e-12) {
        out.push(floor);
    }
    out
}

#[test]
fn equal_data_compare_trivially() {
    let m = model("p_system", json!({}));
    let u0 = dv(&[1.0, 0.0]);
    let report = compare_limits(&m, &u0, &u0, &[0.1, 0.05, 0.025], &CompareConfig::default()).unwrap();
    assert_eq!(report.rungs.len(), 3);
    for r in &report.rungs {
        assert!(r.l1_fan_dist < 1e-8 && r.sup_inner_dist < 1e-8 && r.weighted_tail < 1e-8);
    }
    report.require_thresholds().unwrap();
}

#[test]
fn layer_and_shock_datum_converges_inside() {
    let m = model("p_system", json!({"gamma": 2.0}));
    let u0 = dv(&[1.0, 0.0]);
    let gnl = genuine_nonlinearity(&m, 2, &u0).unwrap();
    let cfg = CompareConfig {
        riemann: lax_config(),
        ..CompareConfig::default()
    };
    let x = dv(&[0.01, 0.05 * gnl.signum()]);
    let ub = boundary_map(&m, &u0, &x, &cfg.riemann).unwrap();
    let eps = halving_ladder(0.1, 1e-3);
    let report = compare_limits(&m, &u0, &ub, &eps, &cfg).unwrap();
    assert_eq!(report.fan.pieces[0].kind, WaveKind::Shock);
    let last = report.rungs.last().unwrap();
    assert_eq!(last.epsilon, 1e-3);
    assert!(last.sup_inner_dist < 1e-3);
    assert!((last.inner_seed[0] - report.fan.s[0]).abs() < 1e-3);
    assert!(report.inner_nonincreasing());
    assert!(report.l1_nonincreasing());
    report.require_thresholds().unwrap();
}

#[test]
fn failed_thresholds_are_inconclusive() {
    let m = model("linear", json!({}));
    let u0 = dv(&[0.0, 0.0]);
    let ub = dv(&[0.01, 0.02]);
    let cfg = CompareConfig {
        inner_threshold: 0.0,
        ..CompareConfig::default()
    };
    let report = compare_limits(&m, &u0, &ub, &[0.1, 0.05], &cfg).unwrap();
    assert!(!report.passed());
    assert!(matches!(report.require_thresholds(), Err(Error::ComparisonInconclusive(_))));
}
