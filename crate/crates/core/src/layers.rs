//! Boundary layers: trajectories of `V' = W, W' = A(V) W` on the stable
//! manifold of the equilibrium `(U_bar, 0)`.
//!
//! The manifold is parameterized by `S` in `R^k`: the seed
//! `V = U_bar + sum_i S_i e^{lambda_i Y} R_i`, `W = sum_i S_i lambda_i e^{lambda_i Y} R_i`
//! placed at `zeta = Y` is integrated backward to `zeta = 0`. For a constant
//! matrix this gives exactly `V(zeta) = U_bar + sum_i S_i e^{lambda_i zeta} R_i`,
//! so `phi_s(S, U_bar) = V(0)` is tangent to the stable space with unit scaling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::HyperbolicModel;
use crate::ode::{integrate, OdeOptions};

/// Parameters of the stable-manifold map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    /// Horizon `Y = horizon_factor / gap_c`.
    pub horizon_factor: f64,
    /// Output nodes on `[0, Y]`.
    pub nodes: usize,
    /// Seed bound `|S| <= s_max_factor * radius`.
    pub s_max_factor: f64,
    pub rtol: f64,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            horizon_factor: 40.0,
            nodes: 801,
            s_max_factor: 0.05,
            rtol: 1e-12,
        }
    }
}

impl LayerConfig {
    pub fn horizon(&self, model: &HyperbolicModel) -> f64 {
        self.horizon_factor / model.gap_c()
    }

    pub fn s_max(&self, model: &HyperbolicModel) -> f64 {
        self.s_max_factor * model.domain().radius
    }

    fn ode_options(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol_scaled: 1e-3 * self.rtol,
            ..OdeOptions::default()
        }
    }
}

/// Sampled solution of the layer system, `zeta` increasing from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrajectory {
    pub zeta: Vec<f64>,
    pub v: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub u_bar: DVector<f64>,
    pub s: DVector<f64>,
    pub horizon: f64,
}

impl LayerTrajectory {
    /// `phi_s(S, U_bar)`.
    pub fn endpoint(&self) -> &DVector<f64> {
        &self.v[0]
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// `V(zeta)` by cubic Hermite interpolation with `W = V'` as slopes;
    /// `U_bar` beyond the horizon.
    pub fn state_at(&self, zeta: f64) -> DVector<f64> {
        let last = self.zeta.len() - 1;
        if zeta <= self.zeta[0] {
            return self.v[0].clone();
        }
        if zeta >= self.zeta[last] {
            return if zeta > self.zeta[last] {
                self.u_bar.clone()
            } else {
                self.v[last].clone()
            };
        }
        let i = match self.zeta.binary_search_by(|z| z.total_cmp(&zeta)) {
            Ok(i) => return self.v[i].clone(),
            Err(i) => i - 1,
        };
        let (z0, z1) = (self.zeta[i], self.zeta[i + 1]);
        let h = z1 - z0;
        let t = (zeta - z0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        &self.v[i] * h00 + &self.w[i] * (h10 * h) + &self.v[i + 1] * h01 + &self.w[i + 1] * (h11 * h)
    }
}

/// Stable eigenpairs `(lambda_i, R_i)` of `A(U_bar)`, `lambda_i < 0`.
pub fn stable_basis(model: &HyperbolicModel, u_bar: &DVector<f64>) -> Result<Vec<(f64, DVector<f64>)>> {
    let spec = model.spectral(u_bar)?;
    let gap = spec.min_abs_eigenvalue();
    if gap < model.gap_c() {
        return Err(Error::NonCharacteristicViolation {
            observed: gap,
            required: model.gap_c(),
        });
    }
    let pairs: Vec<_> = (0..spec.dim())
        .filter(|&i| spec.lambda(i) < 0.0)
        .map(|i| (spec.lambda(i), spec.right_vector(i)))
        .collect();
    debug_assert_eq!(pairs.len(), model.k());
    Ok(pairs)
}

fn check_seed(model: &HyperbolicModel, s: &DVector<f64>, config: &LayerConfig) -> Result<()> {
    if s.len() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            got: s.len(),
        });
    }
    let s_max = config.s_max(model);
    if s.norm() > s_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "seed norm {} exceeds s_max = {s_max}",
            s.norm()
        )));
    }
    Ok(())
}

fn seed_state(basis: &[(f64, DVector<f64>)], s: &DVector<f64>, horizon: f64, n: usize) -> DVector<f64> {
    let mut y = DVector::zeros(2 * n);
    for (i, (lambda, r)) in basis.iter().enumerate() {
        let amp = s[i] * (lambda * horizon).exp();
        for c in 0..n {
            y[c] += amp * r[c];
            y[n + c] += amp * lambda * r[c];
        }
    }
    y
}

/// Integrates the layer system in deviation form `(V - U_bar, W)` from
/// `zeta = times[0]` through `times`.
fn run_layer(
    model: &HyperbolicModel,
    u_bar: &DVector<f64>,
    y0: &DVector<f64>,
    times: &[f64],
    config: &LayerConfig,
) -> Result<Vec<DVector<f64>>> {
    let n = model.dim();
    let domain = model.domain().clone();
    integrate(
        |_, y| {
            let v = u_bar + y.rows(0, n);
            let w = y.rows(n, n).into_owned();
            let aw = model.matrix_unchecked(&v) * &w;
            let mut dy = DVector::zeros(2 * n);
            dy.rows_mut(0, n).copy_from(&w);
            dy.rows_mut(n, n).copy_from(&aw);
            dy
        },
        y0,
        times,
        &config.ode_options(),
        |zeta, y| {
            let v = u_bar + y.rows(0, n);
            if domain.contains(&v) {
                Ok(())
            } else {
                Err(Error::IntegrationEscape { zeta })
            }
        },
    )
}

/// Boundary layer with seed coordinates `s`, sampled on `config.nodes` points of `[0, horizon]`.
pub fn layer_from_seed(
    model: &HyperbolicModel,
    u_bar: &DVector<f64>,
    s: &DVector<f64>,
    horizon: f64,
    config: &LayerConfig,
) -> Result<LayerTrajectory> {
    model.domain().check(u_bar)?;
    check_seed(model, s, config)?;
    if !(horizon >= 10.0 / model.gap_c() * (1.0 - 1e-12)) {
        return Err(Error::InvalidParams(format!(
            "horizon {horizon} shorter than 10/gap_c = {}",
            10.0 / model.gap_c()
        )));
    }
    let n = model.dim();
    let nodes = config.nodes.max(2);
    let zeta: Vec<f64> = (0..nodes)
        .map(|i| horizon * i as f64 / (nodes - 1) as f64)
        .collect();
    if s.iter().all(|&x| x == 0.0) {
        return Ok(LayerTrajectory {
            zeta,
            v: vec![u_bar.clone(); nodes],
            w: vec![DVector::zeros(n); nodes],
            u_bar: u_bar.clone(),
            s: s.clone(),
            horizon,
        });
    }
    let basis = stable_basis(model, u_bar)?;
    let y0 = seed_state(&basis, s, horizon, n);
    let backward: Vec<f64> = zeta.iter().rev().copied().collect();
    let states = run_layer(model, u_bar, &y0, &backward, config)?;
    let mut v = Vec::with_capacity(nodes);
    let mut w = Vec::with_capacity(nodes);
    for y in states.iter().rev() {
        v.push(u_bar + y.rows(0, n));
        w.push(y.rows(n, n).into_owned());
    }
    Ok(LayerTrajectory {
        zeta,
        v,
        w,
        u_bar: u_bar.clone(),
        s: s.clone(),
        horizon,
    })
}

/// `phi_s(S, U_bar)` without storing the trajectory.
pub fn phi_s(
    model: &HyperbolicModel,
    u_bar: &DVector<f64>,
    s: &DVector<f64>,
    horizon: f64,
    config: &LayerConfig,
) -> Result<DVector<f64>> {
    model.domain().check(u_bar)?;
    if s.len() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            got: s.len(),
        });
    }
    if s.iter().all(|&x| x == 0.0) {
        return Ok(u_bar.clone());
    }
    let n = model.dim();
    let basis = stable_basis(model, u_bar)?;
    let y0 = seed_state(&basis, s, horizon, n);
    let states = run_layer(model, u_bar, &y0, &[horizon, 0.0], config)?;
    Ok(u_bar + states[1].rows(0, n))
}

/// Forward integration of the layer system from `(v0, w0)` at `zeta = 0`,
/// sampled at `zeta` (increasing, starting at 0).
pub fn integrate_forward(
    model: &HyperbolicModel,
    v0: &DVector<f64>,
    w0: &DVector<f64>,
    zeta: &[f64],
    config: &LayerConfig,
) -> Result<Vec<DVector<f64>>> {
    let n = model.dim();
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(&(v0 - &model.domain().center));
    y0.rows_mut(n, n).copy_from(w0);
    let center = model.domain().center.clone();
    let states = run_layer(model, &center, &y0, zeta, config)?;
    Ok(states.iter().map(|y| &center + y.rows(0, n)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub s: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipOptions {
    pub max_iter: usize,
    /// Central-difference step for the Jacobian of `phi_s`.
    pub fd_step: f64,
    pub horizon: Option<f64>,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            fd_step: 1e-5,
            horizon: None,
        }
    }
}

fn phi_jacobian(
    model: &HyperbolicModel,
    u_bar: &DVector<f64>,
    s: &DVector<f64>,
    horizon: f64,
    config: &LayerConfig,
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = model.dim();
    let k = s.len();
    let mut jac = DMatrix::zeros(n, k);
    for j in 0..k {
        let mut sp = s.clone();
        let mut sm = s.clone();
        sp[j] += step;
        sm[j] -= step;
        let col = (phi_s(model, u_bar, &sp, horizon, config)? - phi_s(model, u_bar, &sm, horizon, config)?)
            / (2.0 * step);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Decides whether `u_b` lies on the projected stable manifold of `u_bar` by
/// solving `phi_s(S, u_bar) = u_b` in the least-squares sense (Gauss-Newton).
pub fn membership(
    model: &HyperbolicModel,
    u_bar: &DVector<f64>,
    u_b: &DVector<f64>,
    tol: f64,
    config: &LayerConfig,
    opts: &MembershipOptions,
) -> Result<Membership> {
    model.domain().check(u_bar)?;
    model.check_dim(u_b)?;
    if (u_b - u_bar).amax() > model.domain().radius {
        return Err(Error::InvalidParams(
            "|U_b - U_bar| exceeds the domain radius".into(),
        ));
    }
    let horizon = opts.horizon.unwrap_or_else(|| config.horizon(model));
    let basis = stable_basis(model, u_bar)?;
    let k = basis.len();
    let stable = DMatrix::from_fn(model.dim(), k, |r, c| basis[c].1[r]);
    let target = u_b - u_bar;
    let mut s = stable
        .clone()
        .svd(true, true)
        .solve(&target, 1e-14)
        .map_err(|e| Error::RootFindFailure(e.to_string()))?;

    let eval = |s: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(phi_s(model, u_bar, s, horizon, config)? - u_b)
    };
    let mut r = eval(&s)?;
    let mut res = r.norm();
    let mut damping = Vec::new();
    let mut converged = res == 0.0;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let jac = phi_jacobian(model, u_bar, &s, horizon, config, opts.fd_step)?;
        let step = jac
            .svd(true, true)
            .solve(&(-&r), 1e-14)
            .map_err(|e| Error::RootFindFailure(e.to_string()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &s + &step * lambda;
            if let Ok(rt) = eval(&trial) {
                let rn = rt.norm();
                if rn <= res * (1.0 + 1e-12) || rn < 1e-14 {
                    s = trial;
                    r = rt;
                    res = rn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        damping.push(lambda);
        if !accepted {
            // No descent along the Gauss-Newton direction: stationary point.
            converged = true;
            break;
        }
        if step.norm() * lambda <= 1e-11 * (1.0 + s.norm()) || res < 1e-14 {
            converged = true;
        }
    }
    if !converged {
        if res <= tol {
            return Ok(Membership { s, residual: res, iterations });
        }
        return Err(Error::NewtonDivergence {
            iterations,
            residual: res,
            damping,
        });
    }
    if res <= tol {
        Ok(Membership { s, residual: res, iterations })
    } else {
        Err(Error::NotInManifold {
            s: s.iter().copied().collect(),
            residual: res,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    /// Least-squares slope of `log |W|` over the second half of the trajectory.
    /// `-inf` for an identically zero derivative.
    pub fitted_rate: f64,
    /// `sup |W(zeta)| e^{c zeta / 4}` over `zeta >= 2/c`.
    pub weighted_sup_tail: f64,
    /// Where the weighted sup over the whole trajectory is attained.
    pub weighted_argmax: f64,
}

/// Decay diagnostics of a layer trajectory against the weight `e^{c zeta/4}`.
pub fn decay_report(traj: &LayerTrajectory, c: f64) -> Result<DecayReport> {
    let from = 2.0 / c;
    let tail_nodes = traj.zeta.iter().filter(|&&z| z >= from).count();
    if tail_nodes < 20 {
        return Err(Error::InsufficientTail {
            nodes: tail_nodes,
            from,
        });
    }
    let mut weighted_sup_tail = 0.0f64;
    let mut best = (0.0f64, 0.0f64);
    for (z, w) in traj.zeta.iter().zip(&traj.w) {
        let weighted = w.norm() * (0.25 * c * z).exp();
        if *z >= from {
            weighted_sup_tail = weighted_sup_tail.max(weighted);
        }
        if weighted > best.0 {
            best = (weighted, *z);
        }
    }
    let half = 0.5 * traj.horizon;
    let pts: Vec<(f64, f64)> = traj
        .zeta
        .iter()
        .zip(&traj.w)
        .filter(|(z, w)| **z >= half && w.norm() > 0.0)
        .map(|(z, w)| (*z, w.norm().ln()))
        .collect();
    let fitted_rate = if pts.len() < 2 {
        f64::NEG_INFINITY
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(DecayReport {
        fitted_rate,
        weighted_sup_tail,
        weighted_argmax: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin;
    use std::collections::BTreeMap;

    fn linear() -> HyperbolicModel {
        builtin("linear", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn stable_basis_of_diagonal_model() {
        let m = linear();
        let b = stable_basis(&m, &DVector::zeros(2)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].0, -1.0);
        assert!((&b[0].1 - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn symmetric_model_has_orthogonal_stable_vectors() {
        let p: BTreeMap<String, serde_json::Value> = serde_json::from_value(serde_json::json!({
            "matrix": [[-2.0, 0.5, 0.0], [0.5, -1.0, 0.3], [0.0, 0.3, 1.5]]
        }))
        .unwrap();
        let m = builtin("linear", &p).unwrap();
        let b = stable_basis(&m, &DVector::zeros(3)).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b[0].1.dot(&b[1].1).abs() < 1e-12);
    }

    #[test]
    fn zero_seed_is_constant() {
        let m = linear();
        let cfg = LayerConfig::default();
        let ubar = DVector::from_vec(vec![0.05, -0.02]);
        let t = layer_from_seed(&m, &ubar, &DVector::zeros(1), cfg.horizon(&m), &cfg).unwrap();
        assert!(t.v.iter().all(|v| v == &ubar));
        assert!(t.w.iter().all(|w| w.iter().all(|&x| x == 0.0)));
        assert_eq!(t.endpoint(), &ubar);
        let d = decay_report(&t, m.gap_c()).unwrap();
        assert_eq!(d.weighted_sup_tail, 0.0);
    }

    #[test]
    fn seed_bound_enforced() {
        let m = linear();
        let cfg = LayerConfig::default();
        let s = DVector::from_vec(vec![0.1]);
        assert!(layer_from_seed(&m, &DVector::zeros(2), &s, cfg.horizon(&m), &cfg).is_err());
    }

    #[test]
    fn short_horizon_rejected() {
        let m = linear();
        let cfg = LayerConfig::default();
        let s = DVector::from_vec(vec![0.01]);
        assert!(layer_from_seed(&m, &DVector::zeros(2), &s, 1.0, &cfg).is_err());
    }

    #[test]
    fn tail_too_short() {
        let m = linear();
        let cfg = LayerConfig {
            nodes: 20,
            ..LayerConfig::default()
        };
        let s = DVector::from_vec(vec![0.01]);
        let t = layer_from_seed(&m, &DVector::zeros(2), &s, 10.0 / m.gap_c(), &cfg).unwrap();
        // only the nodes beyond 2/c count; 20 nodes over [0, 10/c] leave fewer than 20
        assert!(matches!(
            decay_report(&t, m.gap_c()),
            Err(Error::InsufficientTail { .. })
        ));
    }
}
