//! Boundary Riemann problem: the boundary map
//!
//! ```text
//! U_b = phi_s(S, T^{k+1}(s_{k+1}, ... T^n(s_n, U_0) ...))
//! ```
//!
//! its local inversion, the assembled wave fan, and the comparison of the
//! fan plus boundary layer against self-similar viscous profiles.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::VectorPchip;
use crate::layers::{layer_from_seed, membership, phi_s, LayerConfig, LayerTrajectory, MembershipOptions};
use crate::models::HyperbolicModel;
use crate::selfsim::{continuation_ladder, inner_rescale, ProfileOptions, ViscousProfile};
use crate::wavefan::{
    classify, default_contact_tol, fan_curve, lax_oracle, wave_from_lax, FanConfig, LeadingOrder, WaveFanCurve,
    WaveKind, WavePiece,
};

/// Source of the elementary wave curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// Envelope fixed point with the leading-order closure.
    EnvelopeEngine,
    /// Classical rarefaction and Hugoniot curves (conservative, genuinely nonlinear).
    LaxOracle,
}

impl Provider {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provider::EnvelopeEngine => "envelope_engine",
            Provider::LaxOracle => "lax_oracle",
        }
    }
}

impl std::str::FromStr for Provider {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "envelope_engine" | "envelope" => Ok(Provider::EnvelopeEngine),
            "lax_oracle" | "lax" => Ok(Provider::LaxOracle),
            other => Err(Error::InvalidParams(format!(
                "unknown provider `{other}` (expected envelope_engine or lax_oracle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannConfig {
    pub provider: Provider,
    pub fan: FanConfig,
    pub layer: LayerConfig,
    /// Residual `|F(S, s) - U_b|` at which Newton stops.
    pub tol: f64,
    pub max_newton: usize,
    /// Finite-difference step as a fraction of the box radius.
    pub fd_step_factor: f64,
    /// Data must satisfy `|U_0 - U_b| <= safety * radius`.
    pub safety: f64,
}

impl Default for RiemannConfig {
    fn default() -> Self {
        Self {
            provider: Provider::EnvelopeEngine,
            fan: FanConfig {
                tol: 1e-13,
                ..FanConfig::default()
            },
            layer: LayerConfig::default(),
            tol: 1e-9,
            max_newton: 30,
            fd_step_factor: 1e-6,
            safety: 0.5,
        }
    }
}

impl RiemannConfig {
    pub fn horizon(&self, model: &HyperbolicModel) -> f64 {
        self.layer.horizon(model)
    }
}

/// Waves of the fan and intermediate states for given parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FanAssembly {
    /// Curves for families `k+1..=n`, in family order. Zero-strength families
    /// have single-node curves.
    pub curves: Vec<WaveFanCurve>,
    /// Pieces of each curve, in the curve's own order (fastest first).
    pub pieces: Vec<Vec<WavePiece>>,
    pub trace: DVector<f64>,
}

/// Curve and pieces of one family with the chosen provider.
fn family_wave(
    model: &HyperbolicModel,
    family: usize,
    s: f64,
    u_plus: &DVector<f64>,
    config: &RiemannConfig,
) -> Result<(WaveFanCurve, Vec<WavePiece>)> {
    match config.provider {
        Provider::EnvelopeEngine => {
            let closure = LeadingOrder::new(model, family)?;
            let curve = fan_curve(model, &closure, family, s, u_plus, &config.fan)?;
            let pieces = classify(&curve, default_contact_tol(&curve));
            Ok((curve, pieces))
        }
        Provider::LaxOracle => {
            let wave = if s == 0.0 {
                None
            } else {
                Some(lax_oracle(model, family, s, u_plus)?)
            };
            wave_from_lax(model, family, s, u_plus, wave.as_ref(), config.fan.nodes)
        }
    }
}

/// Composes `T^{k+1}(s_{k+1}, ... T^n(s_n, U_0))` and returns every curve.
pub fn assemble(
    model: &HyperbolicModel,
    u0: &DVector<f64>,
    strengths: &[f64],
    config: &RiemannConfig,
) -> Result<FanAssembly> {
    let n = model.dim();
    let k = model.k();
    if strengths.len() != n - k {
        return Err(Error::DimensionMismatch {
            expected: n - k,
            got: strengths.len(),
        });
    }
    let mut state = u0.clone();
    let mut curves = Vec::with_capacity(n - k);
    let mut pieces = Vec::with_capacity(n - k);
    for family in (k + 1..=n).rev() {
        let s = strengths[family - k - 1];
        let (curve, p) = family_wave(model, family, s, &state, config)?;
        state = curve.endpoint().clone();
        curves.push(curve);
        pieces.push(p);
    }
    curves.reverse();
    pieces.reverse();
    Ok(FanAssembly {
        curves,
        pieces,
        trace: state,
    })
}

/// The boundary map `F_{U_0}(S, s)` with `x = (S_1..S_k, s_{k+1}..s_n)`.
pub fn boundary_map(
    model: &HyperbolicModel,
    u0: &DVector<f64>,
    x: &DVector<f64>,
    config: &RiemannConfig,
) -> Result<DVector<f64>> {
    model.check_dim(x)?;
    let k = model.k();
    let strengths: Vec<f64> = x.iter().skip(k).copied().collect();
    let trace = assemble(model, u0, &strengths, config)?.trace;
    let seed = DVector::from_iterator(k, x.iter().take(k).copied());
    phi_s(model, &trace, &seed, config.horizon(model), &config.layer)
}

/// Assembled boundary Riemann solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FanSolution {
    pub u0: DVector<f64>,
    pub ub: DVector<f64>,
    /// Boundary-layer seed.
    pub s: DVector<f64>,
    /// Strengths of families `k+1..=n`.
    pub strengths: Vec<f64>,
    pub trace: DVector<f64>,
    pub curves: Vec<WaveFanCurve>,
    /// All pieces in increasing speed order.
    pub pieces: Vec<WavePiece>,
    pub residual: f64,
    /// Layer horizon used to define `S`.
    pub horizon: f64,
    pub provider: Provider,
    pub newton_iterations: usize,
}

impl FanSolution {
    /// Fastest speed in the fan, or `None` when there are no waves.
    pub fn max_speed(&self) -> Option<f64> {
        self.pieces.iter().map(|p| p.speed.1).reduce(f64::max)
    }

    /// Speeds where the fan jumps or has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pieces.iter().flat_map(|p| [p.speed.0, p.speed.1]).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Boundary layer from the trace with the solution's seed.
    pub fn layer(&self, model: &HyperbolicModel, config: &LayerConfig) -> Result<LayerTrajectory> {
        layer_from_seed(model, &self.trace, &self.s, self.horizon, config)
    }
}

fn flatten_pieces(pieces: &[Vec<WavePiece>]) -> Vec<WavePiece> {
    // families ascend in speed; within a curve pieces run fastest first
    pieces.iter().flat_map(|p| p.iter().rev().cloned()).collect()
}

/// Initial guess from `[R_1(U_0) | ... | R_n(U_0)] x = U_b - U_0`.
fn linear_guess(model: &HyperbolicModel, u0: &DVector<f64>, ub: &DVector<f64>) -> Result<DVector<f64>> {
    let spec = model.spectral(u0)?;
    Ok(&spec.left * (ub - u0))
}

/// Solves `F_{U_0}(S, s) = U_b` by damped Newton with a finite-difference Jacobian.
pub fn solve_boundary_riemann(
    model: &HyperbolicModel,
    u0: &DVector<f64>,
    ub: &DVector<f64>,
    config: &RiemannConfig,
) -> Result<FanSolution> {
    model.check_dim(u0)?;
    model.check_dim(ub)?;
    model.domain().check(u0)?;
    model.domain().check(ub)?;
    let radius = model.domain().radius;
    let dist = (ub - u0).amax();
    if dist > config.safety * radius {
        return Err(Error::InvalidParams(format!(
            "|U_b - U_0| = {dist} exceeds {} x radius",
            config.safety
        )));
    }
    let n = model.dim();
    let k = model.k();
    let mut x = linear_guess(model, u0, ub)?;
    let mut iterations = 0;
    let mut fx = if dist == 0.0 {
        x.fill(0.0);
        ub.clone()
    } else {
        match boundary_map(model, u0, &x, config) {
            Ok(v) => v,
            Err(_) => {
                x *= 0.5;
                boundary_map(model, u0, &x, config)?
            }
        }
    };
    let mut res = (&fx - ub).norm();
    let h = config.fd_step_factor * radius;
    while res > config.tol {
        if iterations >= config.max_newton {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: res,
                damping: Vec::new(),
            });
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (boundary_map(model, u0, &xp, config)? - boundary_map(model, u0, &xm, config)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let step = jac
            .lu()
            .solve(&(ub - &fx))
            .ok_or(Error::NoLocalSolution { residual: res })?;
        let mut lambda = 1.0;
        loop {
            let trial = &x + &step * lambda;
            if let Ok(ft) = boundary_map(model, u0, &trial, config) {
                let rt = (&ft - ub).norm();
                if rt < (1.0 - 1e-4 * lambda) * res {
                    x = trial;
                    fx = ft;
                    res = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(Error::NoLocalSolution { residual: res });
            }
        }
        iterations += 1;
    }
    let strengths: Vec<f64> = x.iter().skip(k).copied().collect();
    let assembly = assemble(model, u0, &strengths, config)?;
    Ok(FanSolution {
        u0: u0.clone(),
        ub: ub.clone(),
        s: DVector::from_iterator(k, x.iter().take(k).copied()),
        strengths,
        trace: assembly.trace,
        pieces: flatten_pieces(&assembly.pieces),
        curves: assembly.curves,
        residual: res,
        horizon: config.horizon(model),
        provider: config.provider,
        newton_iterations: iterations,
    })
}

/// State of the fan at `speed >= 0`; right-continuous at jumps.
pub fn evaluate_fan(fan: &FanSolution, speed: f64) -> Result<DVector<f64>> {
    if !speed.is_finite() || speed < 0.0 {
        return Err(Error::UnresolvedSpeed(speed));
    }
    for piece in &fan.pieces {
        let (lo, hi) = piece.speed;
        if speed < lo {
            return Ok(piece.left_state.clone());
        }
        if piece.kind == WaveKind::Rarefaction && hi > lo && speed < hi {
            let curve = fan
                .curves
                .iter()
                .find(|c| c.family == piece.family)
                .expect("piece belongs to a stored curve");
            return Ok(rarefaction_state(curve, piece, speed));
        }
    }
    Ok(fan.u0.clone())
}

/// `V(tau)` with `xi(tau) = speed` inside a rarefaction piece; `xi` is
/// nonincreasing along the nodes.
fn rarefaction_state(curve: &WaveFanCurve, piece: &WavePiece, speed: f64) -> DVector<f64> {
    let (a, b) = piece.nodes;
    for j in a..b {
        let (x0, x1) = (curve.xi[j], curve.xi[j + 1]);
        if x0 >= speed && speed >= x1 {
            if x0 == x1 {
                return curve.v[j].clone();
            }
            let t = (x0 - speed) / (x0 - x1);
            return &curve.v[j] + (&curve.v[j + 1] - &curve.v[j]) * t;
        }
    }
    if speed >= curve.xi[a] {
        curve.v[a].clone()
    } else {
        curve.v[b].clone()
    }
}

/// Settings of the viscous comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    pub riemann: RiemannConfig,
    pub profile: ProfileOptions,
    /// Right end of the viscous domain; default places it beyond the fan.
    pub xi_max: Option<f64>,
    /// Inner window `[0, Z]`.
    pub z_inner: f64,
    /// Threshold on the inner sup distance at the smallest `eps`.
    pub inner_threshold: f64,
    /// Absolute slack when testing monotonicity along the ladder.
    pub monotone_floor: f64,
    /// Tail window `[a Z, b Z]` for the weighted derivative.
    pub tail_window: (f64, f64),
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            riemann: RiemannConfig::default(),
            profile: ProfileOptions::default(),
            xi_max: None,
            z_inner: 20.0,
            inner_threshold: 1e-3,
            monotone_floor: 1e-10,
            tail_window: (0.1, 0.3),
        }
    }
}

/// Measurements at one rung of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungComparison {
    pub epsilon: f64,
    /// `int_{xi_low}^{Xi} |Q - U_fan| dxi` with `xi_low = 3 eps |ln eps|`.
    pub l1_fan_dist: f64,
    /// `sup_{[0, Z]} |V^eps - V^0|`.
    pub sup_inner_dist: f64,
    /// `sup |dV^eps/dzeta| e^{c zeta / 4}` over the tail window.
    pub weighted_tail: f64,
    /// Whether the weighted derivative is nonincreasing along the tail.
    pub tail_decreasing: bool,
    /// Seed fitted to the inner profile.
    pub inner_seed: Vec<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub fan: FanSolution,
    pub xi_max: f64,
    pub z_inner: f64,
    pub rungs: Vec<RungComparison>,
    /// Error of the ladder rung that failed, if any.
    pub ladder_failure: Option<Error>,
    pub inner_threshold: f64,
    pub monotone_floor: f64,
}

fn nonincreasing(values: &[f64], floor: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + floor)
}

fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl ComparisonReport {
    pub fn epsilons(&self) -> Vec<f64> {
        self.rungs.iter().map(|r| r.epsilon).collect()
    }

    pub fn l1_nonincreasing(&self) -> bool {
        let v: Vec<f64> = self.rungs.iter().map(|r| r.l1_fan_dist).collect();
        nonincreasing(&v, self.monotone_floor)
    }

    pub fn inner_nonincreasing(&self) -> bool {
        let v: Vec<f64> = self.rungs.iter().map(|r| r.sup_inner_dist).collect();
        nonincreasing(&v, self.monotone_floor)
    }

    pub fn tails_decreasing(&self) -> bool {
        self.rungs.iter().all(|r| r.tail_decreasing)
    }

    pub fn inner_threshold_met(&self) -> bool {
        self.rungs
            .last()
            .is_some_and(|r| r.sup_inner_dist <= self.inner_threshold)
    }

    /// Least-squares slope of `ln l1` against `ln eps`.
    pub fn l1_slope(&self) -> Option<f64> {
        let e = self.epsilons();
        let d: Vec<f64> = self.rungs.iter().map(|r| r.l1_fan_dist).collect();
        log_log_slope(&e, &d)
    }

    /// Every contract item holds.
    pub fn passed(&self) -> bool {
        self.ladder_failure.is_none()
            && !self.rungs.is_empty()
            && self.l1_nonincreasing()
            && self.inner_nonincreasing()
            && self.inner_threshold_met()
    }

    /// Errors with `ComparisonInconclusive` unless every contract item holds.
    pub fn require_thresholds(&self) -> Result<()> {
        if let Some(e) = &self.ladder_failure {
            return Err(Error::ComparisonInconclusive(format!("ladder stopped early: {e}")));
        }
        let mut failed = Vec::new();
        if self.rungs.is_empty() {
            failed.push("no rungs".to_string());
        }
        if !self.l1_nonincreasing() {
            failed.push("L1 fan distance not nonincreasing".to_string());
        }
        if !self.inner_nonincreasing() {
            failed.push("inner distance not nonincreasing".to_string());
        }
        if !self.inner_threshold_met() {
            failed.push(format!(
                "inner distance {:e} above {:e} at the smallest eps",
                self.rungs.last().map_or(f64::NAN, |r| r.sup_inner_dist),
                self.inner_threshold
            ));
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::ComparisonInconclusive(failed.join("; ")))
        }
    }
}

/// Default right end: beyond the fastest wave and the right-state speeds.
pub fn default_xi_max(model: &HyperbolicModel, fan: &FanSolution) -> Result<f64> {
    let lam = model.spectral(&fan.u0)?.lambdas.max();
    let fastest = fan.max_speed().unwrap_or(lam).max(lam);
    Ok(fastest.max(0.0) * 1.5 + 1.0)
}

/// Three-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// `int_lo^hi |Q - U_fan| dxi` on the union of profile nodes and fan breakpoints.
fn l1_distance(fan: &FanSolution, profile: &ViscousProfile, interp: &VectorPchip, lo: f64, hi: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = profile.xi.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    cuts.extend(fan.breakpoints().into_iter().filter(|x| *x > lo && *x < hi));
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (node, weight) in GAUSS3 {
            let x = mid + half * node;
            total += weight * half * (interp.eval(x) - evaluate_fan(fan, x)?).norm();
        }
    }
    Ok(total)
}

/// Compares viscous profiles along `eps_list` with the fan and boundary layer.
pub fn compare_limits(
    model: &HyperbolicModel,
    u0: &DVector<f64>,
    ub: &DVector<f64>,
    eps_list: &[f64],
    config: &CompareConfig,
) -> Result<ComparisonReport> {
    let fan = solve_boundary_riemann(model, u0, ub, &config.riemann)?;
    compare_with_fan(model, fan, eps_list, config)
}

/// Same as [`compare_limits`] for an already solved fan.
pub fn compare_with_fan(
    model: &HyperbolicModel,
    fan: FanSolution,
    eps_list: &[f64],
    config: &CompareConfig,
) -> Result<ComparisonReport> {
    let xi_max = match config.xi_max {
        Some(x) => x,
        None => default_xi_max(model, &fan)?,
    };
    let z = config.z_inner;
    let layer_cfg = config.riemann.layer;
    let horizon = fan.horizon;
    let opts = MembershipOptions {
        horizon: Some(horizon),
        ..MembershipOptions::default()
    };
    let reference_seed = membership(model, &fan.trace, &fan.ub, config.riemann.tol, &layer_cfg, &opts)?.s;
    let reference = layer_from_seed(model, &fan.trace, &reference_seed, horizon, &layer_cfg)?;
    let ladder = continuation_ladder(model, &fan.ub, &fan.u0, xi_max, eps_list, &config.profile)?;
    let c = model.gap_c();
    let mut rungs = Vec::with_capacity(ladder.profiles.len());
    for profile in &ladder.profiles {
        let eps = profile.epsilon;
        let interp = profile.interpolant();
        let xi_low = (3.0 * eps * eps.ln().abs()).min(xi_max);
        let l1 = l1_distance(&fan, profile, &interp, xi_low, xi_max)?;
        let inner = inner_rescale(profile, z, 401)?;
        let sup_inner = inner
            .zeta
            .iter()
            .zip(&inner.v)
            .map(|(zeta, v)| (v - reference.state_at(*zeta)).norm())
            .fold(0.0, f64::max);
        let tail: Vec<f64> = inner
            .zeta
            .iter()
            .filter(|zeta| (config.tail_window.0 * z..=config.tail_window.1 * z).contains(*zeta))
            .map(|zeta| (interp.derivative(eps * zeta) * eps).norm() * (0.25 * c * zeta).exp())
            .collect();
        let weighted_tail = tail.iter().copied().fold(0.0, f64::max);
        let tail_decreasing = nonincreasing(&tail, config.monotone_floor);
        let far = inner.v.last().expect("inner grid");
        let inner_seed = if model.domain().contains(far) {
            membership(model, far, &fan.ub, 1e-6, &layer_cfg, &opts)
                .map(|m| m.s.iter().copied().collect())
                .unwrap_or_else(|e| match e {
                    Error::NotInManifold { s, .. } => s,
                    _ => vec![f64::NAN; model.k()],
                })
        } else {
            vec![f64::NAN; model.k()]
        };
        rungs.push(RungComparison {
            epsilon: eps,
            l1_fan_dist: l1,
            sup_inner_dist: sup_inner,
            weighted_tail,
            tail_decreasing,
            inner_seed,
            nodes: profile.len(),
        });
    }
    Ok(ComparisonReport {
        fan,
        xi_max,
        z_inner: z,
        rungs,
        ladder_failure: ladder.failure,
        inner_threshold: config.inner_threshold,
        monotone_floor: config.monotone_floor,
    })
}
