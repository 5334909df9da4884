//! Self-similar viscous profiles: the two-point problem
//!
//! ```text
//! eps Q'' = (A(Q) - xi I) Q',   Q(0) = U_b,   Q(Xi) = U_right
//! ```
//!
//! discretized by second-order central differences on a nonuniform mesh and
//! solved by damped Newton with a banded pivoted LU. Small `eps` is reached by
//! continuation with warm starts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::interp::VectorPchip;
use crate::models::{DomainBox, HyperbolicModel};

/// Smallest supported viscosity.
pub const EPS_FLOOR: f64 = 1e-4;

/// How the `xi` mesh is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshPolicy {
    Uniform {
        nodes: usize,
    },
    /// `xi = Xi sinh(B t) / sinh(B)` on uniform `t`. Without an explicit
    /// `stretch` B, the first cell is sized to `eps / 10`.
    Graded {
        nodes: usize,
        stretch: Option<f64>,
    },
    /// Graded first pass, then `passes - 1` rounds of curvature
    /// equidistribution on the computed profile. Node count doubles (up to
    /// `max_nodes`) while any cell carries more than a tenth of the total variation.
    Adaptive {
        nodes: usize,
        passes: usize,
        max_nodes: usize,
    },
}

impl Default for MeshPolicy {
    fn default() -> Self {
        MeshPolicy::Adaptive {
            nodes: 2001,
            passes: 3,
            max_nodes: 64_001,
        }
    }
}

impl MeshPolicy {
    pub fn nodes(&self) -> usize {
        match *self {
            MeshPolicy::Uniform { nodes }
            | MeshPolicy::Graded { nodes, .. }
            | MeshPolicy::Adaptive { nodes, .. } => nodes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub mesh: MeshPolicy,
    /// Scaled discrete residual at which Newton stops.
    pub tol: f64,
    pub max_newton: usize,
    /// Smallest accepted Newton damping factor.
    pub min_damping: f64,
    /// Profiles must stay inside the domain box inflated by this factor.
    pub box_inflation: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            mesh: MeshPolicy::default(),
            tol: 1e-9,
            max_newton: 60,
            min_damping: 1e-5,
            box_inflation: 1.1,
        }
    }
}

/// Solution of the viscous two-point problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscousProfile {
    pub epsilon: f64,
    pub xi: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub u_b: DVector<f64>,
    pub u_right: DVector<f64>,
    pub residual_norm: f64,
    /// Newton iterations summed over all mesh passes of the final solve.
    pub newton_iterations: usize,
}

impl ViscousProfile {
    pub fn xi_max(&self) -> f64 {
        *self.xi.last().expect("nonempty mesh")
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Monotone cubic interpolant of the nodal values.
    pub fn interpolant(&self) -> VectorPchip {
        VectorPchip::new(&self.xi, &self.q)
    }

    /// Discrete `Q'` at the nodes (one-sided at the ends).
    pub fn nodal_derivative(&self) -> Vec<DVector<f64>> {
        let m = self.len();
        let mut out = Vec::with_capacity(m);
        if m < 2 {
            return vec![DVector::zeros(self.u_b.len()); m];
        }
        out.push((&self.q[1] - &self.q[0]) / (self.xi[1] - self.xi[0]));
        for j in 1..m - 1 {
            let (a, b, c) = first_derivative_weights(self.xi[j] - self.xi[j - 1], self.xi[j + 1] - self.xi[j]);
            out.push(&self.q[j - 1] * a + &self.q[j] * b + &self.q[j + 1] * c);
        }
        out.push((&self.q[m - 1] - &self.q[m - 2]) / (self.xi[m - 1] - self.xi[m - 2]));
        out
    }
}

/// Weights of `Q_{j-1}, Q_j, Q_{j+1}` in the central first derivative.
fn first_derivative_weights(hm: f64, hp: f64) -> (f64, f64, f64) {
    let den = hm * hp * (hm + hp);
    (-hp * hp / den, (hp * hp - hm * hm) / den, hm * hm / den)
}

/// Weights of `Q_{j-1}, Q_j, Q_{j+1}` in the central second derivative.
fn second_derivative_weights(hm: f64, hp: f64) -> (f64, f64, f64) {
    let den = hm * hp * (hm + hp);
    (2.0 * hp / den, -2.0 * (hm + hp) / den, 2.0 * hm / den)
}

/// Uniform mesh with `nodes` points on `[0, xi_max]`.
pub fn uniform_mesh(xi_max: f64, nodes: usize) -> Vec<f64> {
    let n = nodes.max(3);
    let mut mesh: Vec<f64> = (0..n).map(|i| xi_max * i as f64 / (n - 1) as f64).collect();
    mesh[n - 1] = xi_max;
    mesh
}

/// `xi = Xi sinh(B t) / sinh(B)`.
pub fn graded_mesh(xi_max: f64, nodes: usize, stretch: f64) -> Vec<f64> {
    let n = nodes.max(3);
    if stretch < 1e-8 {
        return uniform_mesh(xi_max, n);
    }
    let denom = stretch.sinh();
    let mut mesh: Vec<f64> = (0..n)
        .map(|i| xi_max * (stretch * i as f64 / (n - 1) as f64).sinh() / denom)
        .collect();
    mesh[0] = 0.0;
    mesh[n - 1] = xi_max;
    mesh
}

/// Stretch `B` that makes the first graded cell about `h0` wide.
pub fn stretch_for_first_cell(xi_max: f64, nodes: usize, h0: f64) -> f64 {
    let target = xi_max / ((nodes.max(3) - 1) as f64 * h0);
    if target <= 1.0 {
        return 0.0;
    }
    // sinh(B) / B = target, monotone in B
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi.sinh() / hi < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.sinh() / mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Equidistributes the monitor `1 + 3 Xi sqrt|Q''| / int sqrt|Q''|`, which
/// balances the second-order truncation error, smoothed in index space.
pub fn equidistributed_mesh(xi: &[f64], q: &[DVector<f64>], nodes: usize) -> Vec<f64> {
    let cells = xi.len() - 1;
    let xi_max = xi[cells];
    let mut curvature = vec![0.0; xi.len()];
    for j in 1..cells {
        let (hm, hp) = (xi[j] - xi[j - 1], xi[j + 1] - xi[j]);
        let back = (&q[j] - &q[j - 1]) / hm;
        let fwd = (&q[j + 1] - &q[j]) / hp;
        curvature[j] = ((fwd - back) * (2.0 / (hm + hp))).norm().sqrt();
    }
    curvature[0] = curvature[1.min(cells)];
    curvature[cells] = curvature[cells.saturating_sub(1)];
    let weight: Vec<f64> = (0..cells).map(|c| 0.5 * (curvature[c] + curvature[c + 1])).collect();
    let integral: f64 = (0..cells).map(|c| weight[c] * (xi[c + 1] - xi[c])).sum();
    if !(integral > 0.0) || !integral.is_finite() {
        return uniform_mesh(xi_max, nodes);
    }
    // three quarters of the nodes follow the curvature
    let mut monitor: Vec<f64> = weight.iter().map(|w| 1.0 + 3.0 * xi_max * w / integral).collect();
    for _ in 0..4 {
        let prev = monitor.clone();
        for c in 0..cells {
            let l = prev[c.saturating_sub(1)];
            let r = prev[(c + 1).min(cells - 1)];
            monitor[c] = 0.25 * l + 0.5 * prev[c] + 0.25 * r;
        }
    }
    let mut cumulative = Vec::with_capacity(cells + 1);
    cumulative.push(0.0);
    for c in 0..cells {
        let next = cumulative[c] + monitor[c] * (xi[c + 1] - xi[c]);
        cumulative.push(next);
    }
    let total = cumulative[cells];
    let n = nodes.max(3);
    let mut mesh = Vec::with_capacity(n);
    mesh.push(0.0);
    let mut c = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while cumulative[c + 1] < target {
            c += 1;
        }
        let frac = (target - cumulative[c]) / (cumulative[c + 1] - cumulative[c]);
        mesh.push(xi[c] + frac * (xi[c + 1] - xi[c]));
    }
    mesh.push(xi_max);
    mesh
}

fn row_norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Discrete residual per interior node and its scaled sup norm.
fn residual(model: &HyperbolicModel, eps: f64, xi: &[f64], q: &[DVector<f64>]) -> (Vec<DVector<f64>>, f64) {
    let m = xi.len();
    let n = model.dim();
    let mut out = Vec::with_capacity(m - 2);
    let mut scaled = 0.0f64;
    for j in 1..m - 1 {
        let (hm, hp) = (xi[j] - xi[j - 1], xi[j + 1] - xi[j]);
        // difference form: exact zero on constants
        let back = (&q[j] - &q[j - 1]) / hm;
        let fwd = (&q[j + 1] - &q[j]) / hp;
        let d1 = (&back * hp + &fwd * hm) / (hm + hp);
        let d2 = (&fwd - &back) * (2.0 / (hm + hp));
        let shifted = model.matrix_unchecked(&q[j]) - DMatrix::identity(n, n) * xi[j];
        let r = d2 * eps - &shifted * d1;
        let scale = 2.0 * eps / (hm * hp) + 2.0 * row_norm_inf(&shifted) / (hm + hp);
        let value = r.amax() / scale;
        scaled = if value.is_nan() { f64::NAN } else { scaled.max(value) };
        out.push(r);
    }
    (out, scaled)
}

fn jacobian(model: &HyperbolicModel, eps: f64, xi: &[f64], q: &[DVector<f64>]) -> BandMatrix {
    let m = xi.len();
    let n = model.dim();
    let unknowns = (m - 2) * n;
    let band = 2 * n - 1;
    let mut jac = BandMatrix::zeros(unknowns, band, band);
    let eye = DMatrix::<f64>::identity(n, n);
    for j in 1..m - 1 {
        let (hm, hp) = (xi[j] - xi[j - 1], xi[j + 1] - xi[j]);
        let (a1, b1, c1) = first_derivative_weights(hm, hp);
        let (a2, b2, c2) = second_derivative_weights(hm, hp);
        let d1 = &q[j - 1] * a1 + &q[j] * b1 + &q[j + 1] * c1;
        let shifted = model.matrix_unchecked(&q[j]) - &eye * xi[j];
        // d(A(Q) d1)/dQ_j by central differences of the matrix field
        let mut da = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-7 * (1.0 + q[j][k].abs());
            let mut up = q[j].clone();
            let mut dn = q[j].clone();
            up[k] += h;
            dn[k] -= h;
            let col = (model.matrix_unchecked(&up) - model.matrix_unchecked(&dn)) * &d1 / (2.0 * h);
            da.set_column(k, &col);
        }
        let blocks = [
            (j - 1, &eye * (eps * a2) - &shifted * a1),
            (j, &eye * (eps * b2) - &shifted * b1 - da),
            (j + 1, &eye * (eps * c2) - &shifted * c1),
        ];
        let row0 = (j - 1) * n;
        for (node, block) in blocks.iter() {
            if *node == 0 || *node == m - 1 {
                continue;
            }
            let col0 = (node - 1) * n;
            for r in 0..n {
                for c in 0..n {
                    let v = block[(r, c)];
                    if v != 0.0 {
                        jac.add(row0 + r, col0 + c, v);
                    }
                }
            }
        }
    }
    jac
}

struct NewtonResult {
    q: Vec<DVector<f64>>,
    residual: f64,
    iterations: usize,
}

fn inside(domain: &DomainBox, q: &[DVector<f64>]) -> bool {
    q.iter().all(|u| u.iter().all(|x| x.is_finite()) && domain.contains(u))
}

fn newton(
    model: &HyperbolicModel,
    eps: f64,
    xi: &[f64],
    mut q: Vec<DVector<f64>>,
    opts: &ProfileOptions,
) -> Result<NewtonResult> {
    let domain = model.domain().inflated(opts.box_inflation);
    let n = model.dim();
    let m = xi.len();
    if !inside(&domain, &q) {
        return Err(Error::InvalidParams("initial profile leaves the inflated domain box".into()));
    }
    let (mut r, mut norm) = residual(model, eps, xi, &q);
    let mut damping = Vec::new();
    for it in 0..=opts.max_newton {
        if norm <= opts.tol {
            return Ok(NewtonResult {
                q,
                residual: norm,
                iterations: it,
            });
        }
        if it == opts.max_newton {
            break;
        }
        let jac = jacobian(model, eps, xi, &q);
        let mut rhs: Vec<f64> = r.iter().flat_map(|v| v.iter().map(|x| -x)).collect();
        if jac.solve(&mut rhs).is_none() {
            return Err(Error::NewtonDivergence {
                iterations: it,
                residual: norm,
                damping,
            });
        }
        let mut lambda = 1.0;
        loop {
            let mut trial = q.clone();
            for j in 1..m - 1 {
                for k in 0..n {
                    trial[j][k] += lambda * rhs[(j - 1) * n + k];
                }
            }
            if inside(&domain, &trial) {
                let (rt, nt) = residual(model, eps, xi, &trial);
                if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * norm {
                    q = trial;
                    r = rt;
                    norm = nt;
                    damping.push(lambda);
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < opts.min_damping {
                damping.push(lambda);
                return Err(Error::NewtonDivergence {
                    iterations: it + 1,
                    residual: norm,
                    damping,
                });
            }
        }
    }
    Err(Error::NewtonDivergence {
        iterations: opts.max_newton,
        residual: norm,
        damping,
    })
}

fn check_inputs(
    model: &HyperbolicModel,
    eps: f64,
    u_b: &DVector<f64>,
    u_right: &DVector<f64>,
    xi_max: f64,
) -> Result<()> {
    model.check_dim(u_b)?;
    model.check_dim(u_right)?;
    if !(eps >= EPS_FLOOR) || !eps.is_finite() {
        return Err(Error::InvalidParams(format!(
            "epsilon must be at least {EPS_FLOOR:e}, got {eps:e}"
        )));
    }
    if !(xi_max > 0.0) || !xi_max.is_finite() {
        return Err(Error::InvalidParams(format!("Xi must be positive, got {xi_max}")));
    }
    model.domain().check(u_b)?;
    model.domain().check(u_right)
}

fn sample(guess: &dyn Fn(f64) -> DVector<f64>, mesh: &[f64], u_b: &DVector<f64>, u_right: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = mesh.len();
    let mut q: Vec<DVector<f64>> = mesh.iter().map(|&x| guess(x)).collect();
    q[0] = u_b.clone();
    q[m - 1] = u_right.clone();
    q
}

fn build_profile(
    eps: f64,
    xi: Vec<f64>,
    res: NewtonResult,
    u_b: &DVector<f64>,
    u_right: &DVector<f64>,
    iterations: usize,
) -> ViscousProfile {
    ViscousProfile {
        epsilon: eps,
        xi,
        q: res.q,
        u_b: u_b.clone(),
        u_right: u_right.clone(),
        residual_norm: res.residual,
        newton_iterations: iterations,
    }
}

/// One solve under the mesh policy starting from `guess`; `warm` supplies a
/// previous profile whose shape seeds the first adaptive mesh.
#[allow(clippy::too_many_arguments)]
fn solve_policy(
    model: &HyperbolicModel,
    eps: f64,
    u_b: &DVector<f64>,
    u_right: &DVector<f64>,
    xi_max: f64,
    guess: &dyn Fn(f64) -> DVector<f64>,
    warm: Option<&ViscousProfile>,
    opts: &ProfileOptions,
) -> Result<ViscousProfile> {
    let graded_auto = |nodes: usize| graded_mesh(xi_max, nodes, stretch_for_first_cell(xi_max, nodes, 0.1 * eps));
    match opts.mesh {
        MeshPolicy::Uniform { nodes } => {
            let mesh = uniform_mesh(xi_max, nodes);
            let res = newton(model, eps, &mesh, sample(guess, &mesh, u_b, u_right), opts)?;
            let it = res.iterations;
            Ok(build_profile(eps, mesh, res, u_b, u_right, it))
        }
        MeshPolicy::Graded { nodes, stretch } => {
            let mesh = match stretch {
                Some(b) => graded_mesh(xi_max, nodes, b),
                None => graded_auto(nodes),
            };
            let res = newton(model, eps, &mesh, sample(guess, &mesh, u_b, u_right), opts)?;
            let it = res.iterations;
            Ok(build_profile(eps, mesh, res, u_b, u_right, it))
        }
        MeshPolicy::Adaptive {
            nodes,
            passes,
            max_nodes,
        } => {
            let mut nodes = nodes.max(3);
            loop {
                let mut mesh = match warm {
                    Some(p) if p.xi_max() == xi_max => equidistributed_mesh(&p.xi, &p.q, nodes),
                    _ => graded_auto(nodes),
                };
                let mut res = newton(model, eps, &mesh, sample(guess, &mesh, u_b, u_right), opts)?;
                let mut total = res.iterations;
                for _ in 1..passes.max(1) {
                    let next = equidistributed_mesh(&mesh, &res.q, nodes);
                    let interp = VectorPchip::new(&mesh, &res.q);
                    let start = sample(&|x| interp.eval(x), &next, u_b, u_right);
                    res = newton(model, eps, &next, start, opts)?;
                    total += res.iterations;
                    mesh = next;
                }
                let tv: f64 = res.q.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
                let worst = res.q.windows(2).map(|w| (&w[1] - &w[0]).norm()).fold(0.0, f64::max);
                if worst <= 0.1 * tv || tv == 0.0 {
                    return Ok(build_profile(eps, mesh, res, u_b, u_right, total));
                }
                if 2 * nodes - 1 > max_nodes {
                    return Err(Error::MeshExhausted { nodes });
                }
                nodes = 2 * nodes - 1;
            }
        }
    }
}

fn linear_guess(u_b: &DVector<f64>, u_right: &DVector<f64>, xi_max: f64) -> impl Fn(f64) -> DVector<f64> {
    let (a, b) = (u_b.clone(), u_right.clone());
    move |x| &a + (&b - &a) * (x / xi_max)
}

/// Solves the viscous problem from a straight-line initial guess; if Newton
/// fails, `eps` is raised geometrically until a solve succeeds and then
/// lowered back with warm starts.
pub fn solve_profile(
    model: &HyperbolicModel,
    eps: f64,
    u_b: &DVector<f64>,
    u_right: &DVector<f64>,
    xi_max: f64,
    opts: &ProfileOptions,
) -> Result<ViscousProfile> {
    check_inputs(model, eps, u_b, u_right, xi_max)?;
    let guess = linear_guess(u_b, u_right, xi_max);
    let first = match solve_policy(model, eps, u_b, u_right, xi_max, &guess, None, opts) {
        Ok(p) => return Ok(p),
        Err(e @ (Error::NewtonDivergence { .. } | Error::InvalidParams(_))) => e,
        Err(e) => return Err(e),
    };
    let mut ladder = vec![eps];
    let mut start = None;
    for _ in 0..20 {
        let e = 2.0 * ladder.last().copied().unwrap_or(eps);
        ladder.push(e);
        if let Ok(p) = solve_policy(model, e, u_b, u_right, xi_max, &guess, None, opts) {
            start = Some(p);
            break;
        }
    }
    let Some(mut profile) = start else {
        return Err(first);
    };
    ladder.pop();
    while let Some(e) = ladder.pop() {
        profile = solve_profile_warm(model, e, &profile, opts)?;
    }
    Ok(profile)
}

/// Solves at `eps` using `previous` (same boundary data and `Xi`) as initial guess.
pub fn solve_profile_warm(
    model: &HyperbolicModel,
    eps: f64,
    previous: &ViscousProfile,
    opts: &ProfileOptions,
) -> Result<ViscousProfile> {
    let xi_max = previous.xi_max();
    check_inputs(model, eps, &previous.u_b, &previous.u_right, xi_max)?;
    let interp = previous.interpolant();
    let guess = |x: f64| interp.eval(x);
    solve_policy(model, eps, &previous.u_b, &previous.u_right, xi_max, &guess, Some(previous), opts)
}

/// Profiles of a continuation run; `failure` holds the error of the first
/// rung that could not be solved.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub profiles: Vec<ViscousProfile>,
    pub failure: Option<Error>,
}

impl Ladder {
    /// All profiles, or the recorded failure.
    pub fn complete(self) -> Result<Vec<ViscousProfile>> {
        match self.failure {
            None => Ok(self.profiles),
            Some(e) => Err(e),
        }
    }
}

/// Per-rung summary for manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungSummary {
    pub epsilon: f64,
    pub residual: f64,
    pub nodes: usize,
    pub newton_iterations: usize,
}

impl From<&ViscousProfile> for RungSummary {
    fn from(p: &ViscousProfile) -> Self {
        Self {
            epsilon: p.epsilon,
            residual: p.residual_norm,
            nodes: p.len(),
            newton_iterations: p.newton_iterations,
        }
    }
}

/// Checks that `eps_list` is strictly decreasing with neighbor ratios at least 0.5.
pub fn check_ladder(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParams("empty epsilon ladder".into()));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) || w[1] / w[0] < 0.5 - 1e-12 {
            return Err(Error::InvalidParams(format!(
                "epsilon ladder must decrease with ratio in [0.5, 1): {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Geometric ladder `start, start r, start r^2, ...` down to `floor` inclusive.
pub fn geometric_ladder(start: f64, floor: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && floor > 0.0 && floor <= start && ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParams(format!(
            "invalid ladder start={start} floor={floor} ratio={ratio}"
        )));
    }
    let mut out = vec![start];
    loop {
        let next = out.last().unwrap() * ratio;
        if next < floor * (1.0 - 1e-9) {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

/// Solves each rung of `eps_list`, warm-starting from the previous one.
pub fn continuation_ladder(
    model: &HyperbolicModel,
    u_b: &DVector<f64>,
    u_right: &DVector<f64>,
    xi_max: f64,
    eps_list: &[f64],
    opts: &ProfileOptions,
) -> Result<Ladder> {
    check_ladder(eps_list)?;
    let mut profiles: Vec<ViscousProfile> = Vec::with_capacity(eps_list.len());
    for (rung, &eps) in eps_list.iter().enumerate() {
        let solved = match profiles.last() {
            None => solve_profile(model, eps, u_b, u_right, xi_max, opts),
            Some(prev) => solve_profile_warm(model, eps, prev, opts),
        };
        match solved {
            Ok(p) => profiles.push(p),
            Err(e) => {
                return Ok(Ladder {
                    profiles,
                    failure: Some(Error::ContinuationFailure {
                        rung,
                        epsilon: eps,
                        reason: e.to_string(),
                    }),
                })
            }
        }
    }
    Ok(Ladder {
        profiles,
        failure: None,
    })
}

/// Inner-layer view `V(zeta) = Q(eps zeta)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProfile {
    pub epsilon: f64,
    pub zeta: Vec<f64>,
    pub v: Vec<DVector<f64>>,
}

impl InnerProfile {
    pub fn interpolant(&self) -> VectorPchip {
        VectorPchip::new(&self.zeta, &self.v)
    }
}

/// Smallest inner grid.
pub const MIN_INNER_NODES: usize = 400;

/// Samples `Q(eps zeta)` for `zeta` in `[0, z]` on `max(nodes, 400)` uniform nodes.
pub fn inner_rescale(profile: &ViscousProfile, z: f64, nodes: usize) -> Result<InnerProfile> {
    let eps = profile.epsilon;
    if !(z > 0.0) {
        return Err(Error::InvalidParams(format!("inner range must be positive, got {z}")));
    }
    if eps * z > profile.xi_max() {
        return Err(Error::RangeExceeded {
            requested: eps * z,
            available: profile.xi_max(),
        });
    }
    let n = nodes.max(MIN_INNER_NODES);
    let interp = profile.interpolant();
    let zeta: Vec<f64> = (0..n).map(|i| z * i as f64 / (n - 1) as f64).collect();
    let mut v: Vec<DVector<f64>> = zeta.iter().map(|&s| interp.eval(eps * s)).collect();
    v[0] = profile.q[0].clone();
    Ok(InnerProfile { epsilon: eps, zeta, v })
}

/// Length of the part of `[lo, hi]` where `|Q'|` exceeds half its maximum over
/// that window, with linear interpolation at the crossings.
pub fn transition_width(profile: &ViscousProfile, lo: f64, hi: f64) -> f64 {
    let d: Vec<f64> = profile.nodal_derivative().iter().map(|v| v.norm()).collect();
    let xi = &profile.xi;
    let peak = xi
        .iter()
        .zip(&d)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .fold(0.0f64, |m, (_, v)| m.max(*v));
    if peak == 0.0 {
        return 0.0;
    }
    let half = 0.5 * peak;
    let mut width = 0.0;
    for j in 0..xi.len() - 1 {
        let (a, b) = (xi[j].max(lo), xi[j + 1].min(hi));
        if b <= a {
            continue;
        }
        let (da, db) = (d[j] - half, d[j + 1] - half);
        let h = xi[j + 1] - xi[j];
        let frac = if da >= 0.0 && db >= 0.0 {
            1.0
        } else if da < 0.0 && db < 0.0 {
            0.0
        } else if da >= 0.0 {
            da / (da - db)
        } else {
            db / (db - da)
        };
        width += frac * h * (b - a) / h;
    }
    width
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin;
    use std::collections::BTreeMap;

    #[test]
    fn derivative_weights_exact_for_quadratics() {
        let (hm, hp) = (0.3, 0.7);
        let f = |x: f64| 2.0 + 3.0 * x - 5.0 * x * x;
        let (a, b, c) = first_derivative_weights(hm, hp);
        let d1 = a * f(-hm) + b * f(0.0) + c * f(hp);
        assert!((d1 - 3.0).abs() < 1e-12);
        let (a, b, c) = second_derivative_weights(hm, hp);
        let d2 = a * f(-hm) + b * f(0.0) + c * f(hp);
        assert!((d2 + 10.0).abs() < 1e-11);
    }

    #[test]
    fn graded_mesh_first_cell() {
        let b = stretch_for_first_cell(3.0, 1001, 1e-4);
        let mesh = graded_mesh(3.0, 1001, b);
        assert!((mesh[1] - 1e-4).abs() < 1e-6);
        assert_eq!(mesh[1000], 3.0);
        assert!(mesh.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn equidistribution_concentrates_on_jumps() {
        let xi = uniform_mesh(1.0, 1001);
        let q: Vec<DVector<f64>> = xi
            .iter()
            .map(|x| DVector::from_vec(vec![((x - 0.5) / 0.01).tanh(), 0.0]))
            .collect();
        let mesh = equidistributed_mesh(&xi, &q, 201);
        let inside = mesh.iter().filter(|x| (**x - 0.5).abs() < 0.02).count();
        assert!(inside > 40, "{inside}");
        assert!(mesh.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_data_gives_constant_profile() {
        let m = builtin("noncons_demo", &BTreeMap::new()).unwrap();
        let u = DVector::from_vec(vec![0.05, -0.02]);
        let p = solve_profile(&m, 0.01, &u, &u, 3.0, &ProfileOptions::default()).unwrap();
        assert_eq!(p.residual_norm, 0.0);
        assert!(p.q.iter().all(|q| q == &u));
    }

    #[test]
    fn ladder_validation() {
        assert!(check_ladder(&[0.1, 0.05, 0.025]).is_ok());
        assert!(check_ladder(&[0.1, 0.04]).is_err());
        assert!(check_ladder(&[0.1, 0.1]).is_err());
        assert_eq!(geometric_ladder(0.1, 0.1 / 64.0, 0.5).unwrap().len(), 7);
    }

    #[test]
    fn eps_floor_enforced() {
        let m = builtin("linear", &BTreeMap::new()).unwrap();
        let u = DVector::zeros(2);
        let r = solve_profile(&m, 1e-5, &u, &u, 3.0, &ProfileOptions::default());
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }
}
