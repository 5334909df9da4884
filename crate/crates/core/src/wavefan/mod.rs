//! Wave-fan curves through the envelope fixed point
//!
//! ```text
//! V(tau)  = U+ + int_0^tau R_hat(V, omega, xi) ds
//! f(tau)  = int_0^tau lambda_hat(V, omega, xi) ds
//! g       = concave (s > 0) or convex (s < 0) envelope of f
//! omega   = f - g,   xi = g'
//! ```
//!
//! solved by Picard iteration on a uniform `tau` grid from 0 to the strength
//! `s`. The endpoint `V(s)` is the value of the wave-fan map at `(s, U+)`.
//! Along the curve `tau = 0` is the right state `U+` (fastest speed) and
//! `tau = s` the left state (slowest speed).

mod envelope;
mod oracle;

pub use envelope::{envelope, Envelope, Sense};
pub use oracle::{genuine_nonlinearity, integral_curve, lax_oracle, wave_from_lax, LaxKind, LaxWave};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::models::HyperbolicModel;

/// Closure fields `(R_hat, lambda_hat)` of the fixed point.
pub trait ClosureFields {
    /// `(R_hat(V, omega, xi), lambda_hat(V, omega, xi))`.
    fn eval(&self, v: &DVector<f64>, omega: f64, xi: f64) -> Result<(DVector<f64>, f64)>;

    fn r_hat(&self, v: &DVector<f64>, omega: f64, xi: f64) -> Result<DVector<f64>> {
        Ok(self.eval(v, omega, xi)?.0)
    }

    fn lambda_hat(&self, v: &DVector<f64>, omega: f64, xi: f64) -> Result<f64> {
        Ok(self.eval(v, omega, xi)?.1)
    }

    fn order_tag(&self) -> OrderTag;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderTag {
    LeadingOrder,
}

/// `R_hat = R_i(V)`, `lambda_hat = lambda_i(V)`.
#[derive(Debug, Clone, Copy)]
pub struct LeadingOrder<'a> {
    model: &'a HyperbolicModel,
    index: usize,
}

impl<'a> LeadingOrder<'a> {
    /// Closure for `family` in `1..=n`.
    pub fn new(model: &'a HyperbolicModel, family: usize) -> Result<Self> {
        check_family(model, family)?;
        Ok(Self {
            model,
            index: family - 1,
        })
    }
}

impl ClosureFields for LeadingOrder<'_> {
    fn eval(&self, v: &DVector<f64>, _omega: f64, _xi: f64) -> Result<(DVector<f64>, f64)> {
        let spec = self.model.spectral(v)?;
        Ok((spec.right_vector(self.index), spec.lambda(self.index)))
    }

    fn order_tag(&self) -> OrderTag {
        OrderTag::LeadingOrder
    }
}

pub(crate) fn check_family(model: &HyperbolicModel, family: usize) -> Result<()> {
    if family == 0 || family > model.dim() {
        return Err(Error::InvalidParams(format!(
            "family must be in 1..={}, got {family}",
            model.dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanConfig {
    /// Grid points on `[0, s]`.
    pub nodes: usize,
    /// Sup-norm change at which Picard iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Strength bound `|s| <= s_max_factor * radius`.
    pub s_max_factor: f64,
}

impl Default for FanConfig {
    fn default() -> Self {
        Self {
            nodes: 1024,
            tol: 1e-10,
            max_iter: 80,
            s_max_factor: 0.5,
        }
    }
}

impl FanConfig {
    pub fn s_max(&self, model: &HyperbolicModel) -> f64 {
        self.s_max_factor * model.domain().radius
    }
}

/// Converged solution of the envelope fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFanCurve {
    /// 1-based family index.
    pub family: usize,
    pub strength: f64,
    /// Grid from 0 to `strength` (decreasing when `strength < 0`).
    pub tau: Vec<f64>,
    pub v: Vec<DVector<f64>>,
    pub omega: Vec<f64>,
    pub xi: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Envelope vertices as node indices, increasing.
    pub vertices: Vec<usize>,
    /// Sup-norm change of each Picard sweep.
    pub residuals: Vec<f64>,
}

impl WaveFanCurve {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.v.last().expect("nonempty curve")
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.v[0]
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Ratios of successive Picard changes while above the rounding floor.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.residuals
            .windows(2)
            .filter(|w| w[1] > 1e-12)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Trapezoid cumulative integral starting at 0 with signed step `h`.
fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Envelope of `f` sampled on nodes `tau_j = j h`: concave for `h > 0`,
/// convex on the reversed (increasing) grid for `h < 0`. Returns `(g, g', vertices)`
/// in node order with `g' = dg/dtau`.
fn node_envelope(f: &[f64], h: f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    if h > 0.0 {
        let e = envelope(f, h, Sense::Concave);
        (e.g, e.g_prime, e.vertices)
    } else {
        let m = f.len();
        let rev: Vec<f64> = f.iter().rev().copied().collect();
        let e = envelope(&rev, -h, Sense::Convex);
        let g = e.g.into_iter().rev().collect();
        let gp = e.g_prime.into_iter().rev().collect();
        let mut vertices: Vec<usize> = e.vertices.into_iter().map(|i| m - 1 - i).collect();
        vertices.reverse();
        (g, gp, vertices)
    }
}

/// Solves the envelope fixed point for `family` (1-based) with strength `s` from `u_plus`.
pub fn fan_curve(
    model: &HyperbolicModel,
    closure: &dyn ClosureFields,
    family: usize,
    s: f64,
    u_plus: &DVector<f64>,
    config: &FanConfig,
) -> Result<WaveFanCurve> {
    check_family(model, family)?;
    model.domain().check(u_plus)?;
    let s_max = config.s_max(model);
    if !s.is_finite() || s.abs() > s_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "strength {s} exceeds s_max = {s_max}"
        )));
    }
    let (r0, lambda0) = closure.eval(u_plus, 0.0, 0.0)?;
    if s == 0.0 {
        return Ok(WaveFanCurve {
            family,
            strength: 0.0,
            tau: vec![0.0],
            v: vec![u_plus.clone()],
            omega: vec![0.0],
            xi: vec![lambda0],
            f: vec![0.0],
            g: vec![0.0],
            vertices: vec![0],
            residuals: Vec::new(),
        });
    }
    let m = config.nodes.max(2);
    let h = s / (m - 1) as f64;
    let tau: Vec<f64> = (0..m).map(|j| j as f64 * h).collect();
    let mut v: Vec<DVector<f64>> = tau.iter().map(|t| u_plus + &r0 * *t).collect();
    let mut omega = vec![0.0; m];
    let mut xi = vec![lambda0; m];
    let mut f;
    let mut g;
    let mut vertices;
    let mut residuals = Vec::new();

    for _ in 0..config.max_iter {
        let mut rs = Vec::with_capacity(m);
        let mut lambdas = Vec::with_capacity(m);
        for j in 0..m {
            let (r, l) = closure.eval(&v[j], omega[j], xi[j])?;
            rs.push(r);
            lambdas.push(l);
        }
        let f_new = cumulative_trapezoid(&lambdas, h);
        let (g_new, xi_new, verts) = node_envelope(&f_new, h);
        let omega_new: Vec<f64> = f_new.iter().zip(&g_new).map(|(a, b)| a - b).collect();

        let mut v_new = Vec::with_capacity(m);
        let mut acc = u_plus.clone();
        v_new.push(acc.clone());
        for j in 1..m {
            acc += (&rs[j - 1] + &rs[j]) * (0.5 * h);
            v_new.push(acc.clone());
        }

        let mut change = 0.0f64;
        for j in 0..m {
            change = change
                .max((&v_new[j] - &v[j]).amax())
                .max((omega_new[j] - omega[j]).abs())
                .max((xi_new[j] - xi[j]).abs());
        }
        v = v_new;
        omega = omega_new;
        xi = xi_new;
        f = f_new;
        g = g_new;
        vertices = verts;
        residuals.push(change);
        if change < config.tol {
            for state in &v {
                model.domain().check(state)?;
            }
            return Ok(WaveFanCurve {
                family,
                strength: s,
                tau,
                v,
                omega,
                xi,
                f,
                g,
                vertices,
                residuals,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: config.max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Endpoint of the wave-fan curve with the leading-order closure.
pub fn fan_endpoint(
    model: &HyperbolicModel,
    family: usize,
    s: f64,
    u_plus: &DVector<f64>,
    config: &FanConfig,
) -> Result<DVector<f64>> {
    let closure = LeadingOrder::new(model, family)?;
    Ok(fan_curve(model, &closure, family, s, u_plus, config)?
        .endpoint()
        .clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    Shock,
    Rarefaction,
}

impl WaveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WaveKind::Shock => "shock",
            WaveKind::Rarefaction => "rarefaction",
        }
    }
}

/// One elementary wave inside a wave-fan curve.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePiece {
    pub family: usize,
    pub kind: WaveKind,
    /// Node range `(a, b)`, `a < b`; node `a` is the right (faster) end.
    pub nodes: (usize, usize),
    pub tau: (f64, f64),
    /// `(lo, hi)`; equal for shocks. A rarefaction with `lo == hi` is a contact.
    pub speed: (f64, f64),
    pub left_state: DVector<f64>,
    pub right_state: DVector<f64>,
}

/// Default contact tolerance for [`classify`].
pub fn default_contact_tol(curve: &WaveFanCurve) -> f64 {
    let scale = curve.f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    1e-10 * (1.0 + scale)
}

/// Splits a converged curve into shock and rarefaction pieces, ordered from
/// `tau = 0` (fastest) to `tau = s` (slowest).
///
/// A hull segment spanning more than one grid interval with `|f - g| >
/// contact_tol` somewhere inside is a shock; maximal runs of remaining
/// intervals are rarefactions.
pub fn classify(curve: &WaveFanCurve, contact_tol: f64) -> Vec<WavePiece> {
    let mut pieces = Vec::new();
    if curve.len() < 2 {
        return pieces;
    }
    let mut run_start: Option<usize> = None;
    let push_rarefaction = |pieces: &mut Vec<WavePiece>, a: usize, b: usize| {
        let (lo, hi) = curve.xi[a..=b]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        pieces.push(WavePiece {
            family: curve.family,
            kind: WaveKind::Rarefaction,
            nodes: (a, b),
            tau: (curve.tau[a], curve.tau[b]),
            speed: (lo, hi),
            left_state: curve.v[b].clone(),
            right_state: curve.v[a].clone(),
        });
    };
    for w in curve.vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let is_shock = b - a >= 2 && curve.omega[a + 1..b].iter().any(|x| x.abs() > contact_tol);
        if is_shock {
            if let Some(start) = run_start.take() {
                push_rarefaction(&mut pieces, start, a);
            }
            let sigma = (curve.g[b] - curve.g[a]) / (curve.tau[b] - curve.tau[a]);
            pieces.push(WavePiece {
                family: curve.family,
                kind: WaveKind::Shock,
                nodes: (a, b),
                tau: (curve.tau[a], curve.tau[b]),
                speed: (sigma, sigma),
                left_state: curve.v[b].clone(),
                right_state: curve.v[a].clone(),
            });
        } else if run_start.is_none() {
            run_start = Some(a);
        }
    }
    if let Some(start) = run_start {
        push_rarefaction(&mut pieces, start, curve.len() - 1);
    }
    pieces
}
