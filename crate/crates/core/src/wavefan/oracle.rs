//! Classical Lax waves for conservative, genuinely nonlinear families: the
//! integral curve of `R_i` for rarefactions and the Hugoniot locus for shocks.

use nalgebra::{DMatrix, DVector};

use super::{check_family, WaveFanCurve, WaveKind, WavePiece};
use crate::error::{Error, Result};
use crate::models::HyperbolicModel;
use crate::ode::{integrate, OdeOptions};

/// Below this `|grad lambda . R|` a family counts as degenerate.
const GNL_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaxKind {
    Shock,
    Rarefaction,
}

/// Elementary Lax wave joining `left_state` to `right_state = U+`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxWave {
    pub kind: LaxKind,
    pub left_state: DVector<f64>,
    pub right_state: DVector<f64>,
    /// `(lo, hi)`; equal for shocks.
    pub speed: (f64, f64),
}

/// `grad lambda_i . R_i` at `u` by central differences along `R_i`.
pub fn genuine_nonlinearity(model: &HyperbolicModel, family: usize, u: &DVector<f64>) -> Result<f64> {
    check_family(model, family)?;
    let i = family - 1;
    let r = model.spectral(u)?.right_vector(i);
    let h = 1e-5 * model.domain().radius;
    let lp = model.spectral_unchecked(&(u + &r * h))?.lambda(i);
    let lm = model.spectral_unchecked(&(u - &r * h))?.lambda(i);
    Ok((lp - lm) / (2.0 * h))
}

/// Integral curve `V' = R_i(V)`, `V(0) = u`, evaluated at `tau = s`.
pub fn integral_curve(model: &HyperbolicModel, family: usize, s: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_family(model, family)?;
    let i = family - 1;
    let opts = OdeOptions {
        rtol: 1e-13,
        atol: 1e-15,
        ..OdeOptions::default()
    };
    let rhs = |_: f64, v: &DVector<f64>| match model.spectral_unchecked(v) {
        Ok(spec) => spec.right_vector(i),
        Err(_) => DVector::from_element(v.len(), f64::NAN),
    };
    let guard = |_: f64, v: &DVector<f64>| model.domain().check(v);
    let ys = integrate(rhs, u, &[0.0, s], &opts, guard)?;
    Ok(ys[1].clone())
}

/// Lax wave of `family` with signed strength `s` from the right state `u_plus`.
///
/// `s` has the same meaning as for wave-fan curves: arclength along the
/// integral curve for rarefactions, chord length `|V - U+| = |s|` on the
/// Hugoniot locus for shocks. Requires a conservative model and a genuinely
/// nonlinear family at `u_plus`.
pub fn lax_oracle(model: &HyperbolicModel, family: usize, s: f64, u_plus: &DVector<f64>) -> Result<LaxWave> {
    let flux = |v: &DVector<f64>| model.field().flux(v);
    if flux(u_plus).is_none() {
        return Err(Error::InvalidParams(format!(
            "model {} has no flux; the Lax oracle needs a conservation law",
            model.name()
        )));
    }
    let gnl = genuine_nonlinearity(model, family, u_plus)?;
    if gnl.abs() < GNL_THRESHOLD {
        return Err(Error::GnlViolation {
            family,
            state: u_plus.iter().copied().collect(),
        });
    }
    let i = family - 1;
    let lambda_plus = model.spectral(u_plus)?.lambda(i);
    let v_curve = integral_curve(model, family, s, u_plus)?;
    if s * gnl < 0.0 || s == 0.0 {
        let lambda_left = model.spectral(&v_curve)?.lambda(i);
        return Ok(LaxWave {
            kind: LaxKind::Rarefaction,
            left_state: v_curve,
            right_state: u_plus.clone(),
            speed: (lambda_left.min(lambda_plus), lambda_left.max(lambda_plus)),
        });
    }

    // Newton on F(V) - F(U+) - sigma (V - U+) = 0, |V - U+|^2 = s^2
    let n = model.dim();
    let f_plus = flux(u_plus).expect("conservative");
    let lambda_curve = model.spectral(&v_curve)?.lambda(i);
    let mut v = v_curve;
    let mut sigma = 0.5 * (lambda_plus + lambda_curve);
    for _ in 0..60 {
        let d = &v - u_plus;
        let fv = flux(&v).expect("conservative");
        let mut res = DVector::zeros(n + 1);
        res.rows_mut(0, n).copy_from(&(&fv - &f_plus - &d * sigma));
        res[n] = d.norm_squared() - s * s;
        let scale = s.abs().max(1e-300);
        if res.amax() <= 1e-15 * scale {
            break;
        }
        let a = model.matrix_unchecked(&v);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&(a - DMatrix::identity(n, n) * sigma));
        jac.view_mut((0, n), (n, 1)).copy_from(&(-&d));
        jac.view_mut((n, 0), (1, n)).copy_from(&(d.transpose() * 2.0));
        let step = jac
            .lu()
            .solve(&(-res))
            .ok_or_else(|| Error::RootFindFailure("singular Hugoniot Jacobian".into()))?;
        v += step.rows(0, n);
        sigma += step[n];
        if step.amax() <= 1e-16 * (1.0 + v.amax()) {
            break;
        }
    }
    let d = &v - u_plus;
    let fv = flux(&v).expect("conservative");
    let residual = (&fv - &f_plus - &d * sigma).amax();
    if !residual.is_finite() || residual > 1e-12 * (1.0 + fv.amax()) {
        return Err(Error::RootFindFailure(format!(
            "Hugoniot residual {residual:e} for strength {s}"
        )));
    }
    model.domain().check(&v)?;
    Ok(LaxWave {
        kind: LaxKind::Shock,
        left_state: v,
        right_state: u_plus.clone(),
        speed: (sigma, sigma),
    })
}


/// Wave-fan curve and pieces of a Lax wave, for use wherever envelope
/// curves are consumed. Rarefactions are sampled on `nodes` points of the
/// integral curve with `xi = lambda_i(V)`; shocks have two nodes.
pub fn wave_from_lax(
    model: &HyperbolicModel,
    family: usize,
    s: f64,
    u_plus: &DVector<f64>,
    wave: Option<&LaxWave>,
    nodes: usize,
) -> Result<(WaveFanCurve, Vec<WavePiece>)> {
    check_family(model, family)?;
    let i = family - 1;
    let Some(wave) = wave else {
        let xi = model.spectral(u_plus)?.lambda(i);
        let curve = WaveFanCurve {
            family,
            strength: 0.0,
            tau: vec![0.0],
            v: vec![u_plus.clone()],
            omega: vec![0.0],
            xi: vec![xi],
            f: vec![0.0],
            g: vec![0.0],
            vertices: vec![0],
            residuals: Vec::new(),
        };
        return Ok((curve, Vec::new()));
    };
    let (tau, v, xi) = match wave.kind {
        LaxKind::Shock => (
            vec![0.0, s],
            vec![u_plus.clone(), wave.left_state.clone()],
            vec![wave.speed.0; 2],
        ),
        LaxKind::Rarefaction => {
            let m = nodes.max(2);
            let tau: Vec<f64> = (0..m).map(|j| s * j as f64 / (m - 1) as f64).collect();
            let opts = OdeOptions {
                rtol: 1e-13,
                atol: 1e-15,
                ..OdeOptions::default()
            };
            let rhs = |_: f64, v: &DVector<f64>| match model.spectral_unchecked(v) {
                Ok(spec) => spec.right_vector(i),
                Err(_) => DVector::from_element(v.len(), f64::NAN),
            };
            let guard = |_: f64, v: &DVector<f64>| model.domain().check(v);
            let v = integrate(rhs, u_plus, &tau, &opts, guard)?;
            let xi = v
                .iter()
                .map(|x| model.spectral(x).map(|sp| sp.lambda(i)))
                .collect::<Result<Vec<_>>>()?;
            (tau, v, xi)
        }
    };
    let last = tau.len() - 1;
    let f: Vec<f64> = xi.iter().zip(&tau).map(|(x, t)| x * t).collect();
    let kind = match wave.kind {
        LaxKind::Shock => WaveKind::Shock,
        LaxKind::Rarefaction => WaveKind::Rarefaction,
    };
    let piece = WavePiece {
        family,
        kind,
        nodes: (0, last),
        tau: (0.0, s),
        speed: wave.speed,
        left_state: v[last].clone(),
        right_state: u_plus.clone(),
    };
    let curve = WaveFanCurve {
        family,
        strength: s,
        omega: vec![0.0; tau.len()],
        g: f.clone(),
        f,
        vertices: (0..=last).collect(),
        tau,
        v,
        xi,
        residuals: Vec::new(),
    };
    Ok((curve, vec![piece]))
}
