use std::collections::BTreeMap;

use fanlab_core::models::{builtin, HyperbolicModel};
use fanlab_core::selfsim::{
    continuation_ladder, inner_rescale, solve_profile, transition_width, MeshPolicy, ProfileOptions,
    ViscousProfile,
};
use fanlab_core::wavefan::{genuine_nonlinearity, lax_oracle};
use fanlab_core::Error;
use nalgebra::DVector;
use serde_json::json;

fn model(name: &str, params: serde_json::Value) -> HyperbolicModel {
    let p: BTreeMap<String, serde_json::Value> = serde_json::from_value(params).unwrap();
    builtin(name, &p).unwrap()
}

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Closed form of `eps q'' = (a - xi) q'`, `q(0) = q0`, `q(Xi) = q1` at the given
/// increasing points: `q = q0 + (q1 - q0) I(xi) / I(Xi)` with
/// `I(xi) = int_0^xi exp((a s - s^2 / 2 - peak) / eps) ds`.
fn scalar_oracle(a: f64, eps: f64, q0: f64, q1: f64, xi_max: f64, points: &[f64]) -> Vec<f64> {
    let peak = {
        let e = |s: f64| a * s - 0.5 * s * s;
        if a > 0.0 && a < xi_max { e(a) } else { e(0.0).max(e(xi_max)) }
    };
    let f = move |s: f64| ((a * s - 0.5 * s * s - peak) / eps).exp();
    let mut cumulative = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &x in points {
        if x > prev {
            acc += adaptive_simpson(&f, prev, x, 1e-15);
        }
        cumulative.push(acc);
        prev = x;
    }
    let total = acc + if xi_max > prev { adaptive_simpson(&f, prev, xi_max, 1e-15) } else { 0.0 };
    cumulative.iter().map(|i| q0 + (q1 - q0) * i / total).collect()
}

const XI_MAX: f64 = 4.0;
const DIAG: [f64; 2] = [-1.0, 2.0];

fn diagonal_case(eps: f64, mesh: MeshPolicy) -> (ViscousProfile, f64) {
    let m = model("linear", json!({}));
    let ub = dv(&[0.1, -0.1]);
    let ur = dv(&[-0.05, 0.1]);
    let opts = ProfileOptions { mesh, ..ProfileOptions::default() };
    let p = solve_profile(&m, eps, &ub, &ur, XI_MAX, &opts).unwrap();
    let mut err = 0.0f64;
    for i in 0..2 {
        let exact = scalar_oracle(DIAG[i], eps, ub[i], ur[i], XI_MAX, &p.xi);
        for (q, e) in p.q.iter().zip(&exact) {
            err = err.max((q[i] - e).abs());
        }
    }
    (p, err)
}

#[test]
fn diagonal_model_matches_scalar_closed_forms() {
    for eps in [0.05, 0.02, 0.01] {
        let mesh = MeshPolicy::Adaptive { nodes: 4001, passes: 3, max_nodes: 64_001 };
        let (p, err) = diagonal_case(eps, mesh);
        assert!(p.residual_norm <= 1e-9);
        assert!(err <= 1e-6, "eps {eps}: error {err:e}");
    }
}

#[test]
fn mesh_refinement_is_second_order() {
    let eps = 0.02;
    let errs: Vec<f64> = [1001, 2001, 4001]
        .iter()
        .map(|&nodes| diagonal_case(eps, MeshPolicy::Graded { nodes, stretch: Some(4.0) }).1)
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn no_overshoot_on_scalar_components() {
    let (p, _) = diagonal_case(0.01, MeshPolicy::default());
    for i in 0..2 {
        let (lo, hi) = (p.u_b[i].min(p.u_right[i]), p.u_b[i].max(p.u_right[i]));
        for q in &p.q {
            assert!(q[i] >= lo - 1e-8 && q[i] <= hi + 1e-8);
        }
    }
}

#[test]
fn boundary_values_are_imposed_exactly() {
    let m = model("noncons_demo", json!({}));
    let ub = dv(&[0.08, -0.05]);
    let ur = dv(&[-0.02, 0.06]);
    let p = solve_profile(&m, 0.02, &ub, &ur, 3.0, &ProfileOptions::default()).unwrap();
    assert_eq!(p.q[0], ub);
    assert_eq!(p.q[p.len() - 1], ur);
    let boxed = m.domain().inflated(1.1);
    assert!(p.q.iter().all(|q| boxed.contains(q)));
}

#[test]
fn inner_rescale_matches_closed_form() {
    let eps = 0.01;
    let (p, _) = diagonal_case(eps, MeshPolicy::Adaptive { nodes: 4001, passes: 3, max_nodes: 64_001 });
    let inner = inner_rescale(&p, 20.0, 401).unwrap();
    assert_eq!(inner.v[0], p.u_b);
    assert!(inner.zeta.len() >= 400);
    let points: Vec<f64> = inner.zeta.iter().map(|z| eps * z).collect();
    let exact = scalar_oracle(DIAG[0], eps, p.u_b[0], p.u_right[0], XI_MAX, &points);
    for (v, e) in inner.v.iter().zip(&exact) {
        assert!((v[0] - e).abs() < 1e-6);
    }
    assert!(matches!(inner_rescale(&p, 1e3, 401), Err(Error::RangeExceeded { .. })));
}

#[test]
fn constant_ladder_is_trivial() {
    let m = model("p_system", json!({}));
    let u = dv(&[1.05, 0.02]);
    let eps = [0.1, 0.05, 0.025];
    let ladder = continuation_ladder(&m, &u, &u, 3.0, &eps, &ProfileOptions::default()).unwrap();
    let profiles = ladder.complete().unwrap();
    assert_eq!(profiles.len(), 3);
    for p in &profiles {
        assert!(p.q.iter().all(|q| q == &u));
        let inner = inner_rescale(p, 10.0, 400).unwrap();
        assert!(inner.v.iter().all(|v| v == &u));
    }
}

#[test]
fn linear_ladder_needs_few_newton_steps() {
    let m = model("linear", json!({}));
    let eps: Vec<f64> = (0..7).map(|j| 0.1 * 0.5f64.powi(j)).collect();
    let ladder = continuation_ladder(&m, &dv(&[0.1, -0.1]), &dv(&[-0.05, 0.1]), XI_MAX, &eps, &ProfileOptions::default())
        .unwrap()
        .complete()
        .unwrap();
    for p in &ladder[1..] {
        assert!(p.newton_iterations <= 5, "eps {} took {}", p.epsilon, p.newton_iterations);
    }
}

#[test]
fn ladder_failure_reports_rung() {
    let m = model("p_system", json!({}));
    let opts = ProfileOptions { max_newton: 0, ..ProfileOptions::default() };
    let ladder = continuation_ladder(&m, &dv(&[0.9, 0.1]), &dv(&[1.0, 0.0]), 3.0, &[0.1, 0.05], &opts).unwrap();
    assert!(ladder.profiles.is_empty());
    assert!(matches!(ladder.failure, Some(Error::ContinuationFailure { rung: 0, .. })));
    assert!(continuation_ladder(&m, &dv(&[1.0, 0.0]), &dv(&[1.0, 0.0]), 3.0, &[0.1, 0.01], &opts).is_err());
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn shock_width_scales_linearly_along_ladder() {
    let m = model("p_system", json!({"gamma": 2.0, "radius": 0.85}));
    let u0 = dv(&[1.0, 0.0]);
    let g = genuine_nonlinearity(&m, 2, &u0).unwrap();
    let shock = lax_oracle(&m, 2, 0.75 * g.signum(), &u0).unwrap();
    let sigma = shock.speed.0;
    let xi_max = 2.0 * m.spectral(&shock.left_state).unwrap().lambda(1);
    let eps: Vec<f64> = (0..7).map(|j| 0.1 * 0.5f64.powi(j)).collect();
    let profiles = continuation_ladder(&m, &shock.left_state, &u0, xi_max, &eps, &ProfileOptions::default())
        .unwrap()
        .complete()
        .unwrap();
    let points: Vec<(f64, f64)> = profiles
        .iter()
        .map(|p| (p.epsilon, transition_width(p, 0.2 * sigma, xi_max)))
        .collect();
    let slope = log_log_slope(&points);
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}, {points:?}");
}
