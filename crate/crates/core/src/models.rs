//! Hyperbolic systems `U_t + A(U) U_x = 0` as evaluable matrix fields.
//!
//! A [`HyperbolicModel`] couples a [`MatrixField`] with a validity box, the
//! spectral-gap constant `c` and the number `k` of negative eigenvalues.
//! Construction certifies strict hyperbolicity and the non-characteristic
//! condition on a tensor grid over the box.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, SpectralData};

/// Grid points per axis used when certifying a model.
pub const DEFAULT_GRID_PER_AXIS: usize = 9;
/// Default sup-norm half-width of the validity box.
pub const DEFAULT_RADIUS: f64 = 0.25;
/// Fraction of the observed worst gap used as `gap_c` when none is given.
pub const DEFAULT_GAP_FRACTION: f64 = 0.9;
const MAX_DIM: usize = 4;

/// A matrix field `U -> A(U)`, optionally the Jacobian of a flux.
pub trait MatrixField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn matrix(&self, u: &DVector<f64>) -> DMatrix<f64>;

    /// The flux `F` with `A = DF`, when the system is conservative.
    fn flux(&self, _u: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

/// Constant-coefficient system.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub matrix: DMatrix<f64>,
}

impl MatrixField for LinearField {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn matrix(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn flux(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.matrix * u)
    }
}

/// Pressure law of the p-system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pressure {
    /// `p(v) = v^(-gamma)`, genuinely nonlinear in both families.
    Gamma { gamma: f64 },
    /// `p(v) = -slope (v-1) - curvature (v-1)^3`; `p''` changes sign at `v = 1`.
    Cubic { slope: f64, curvature: f64 },
}

impl Pressure {
    pub fn p(&self, v: f64) -> f64 {
        match *self {
            Pressure::Gamma { gamma } => v.powf(-gamma),
            Pressure::Cubic { slope, curvature } => {
                let w = v - 1.0;
                -slope * w - curvature * w * w * w
            }
        }
    }

    pub fn dp(&self, v: f64) -> f64 {
        match *self {
            Pressure::Gamma { gamma } => -gamma * v.powf(-gamma - 1.0),
            Pressure::Cubic { slope, curvature } => {
                let w = v - 1.0;
                -slope - 3.0 * curvature * w * w
            }
        }
    }

    pub fn d2p(&self, v: f64) -> f64 {
        match *self {
            Pressure::Gamma { gamma } => gamma * (gamma + 1.0) * v.powf(-gamma - 2.0),
            Pressure::Cubic { curvature, .. } => -6.0 * curvature * (v - 1.0),
        }
    }
}

/// Isentropic gas dynamics in Lagrangian coordinates, `U = (v, u)`,
/// `F(U) = (-u, p(v))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PSystem {
    pub pressure: Pressure,
}

impl MatrixField for PSystem {
    fn dim(&self) -> usize {
        2
    }

    fn matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, self.pressure.dp(u[0]), 0.0])
    }

    fn flux(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![-u[1], self.pressure.p(u[0])]))
    }
}

/// `A(u1, u2) = [[-1 + a u2, b u1], [c u2, 1 + a u1]]`, not a Jacobian unless `a = b = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonconsDemo {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for NonconsDemo {
    fn default() -> Self {
        Self {
            a: 0.2,
            b: 0.5,
            c: -0.3,
        }
    }
}

impl MatrixField for NonconsDemo {
    fn dim(&self) -> usize {
        2
    }

    fn matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                -1.0 + self.a * u[1],
                self.b * u[0],
                self.c * u[1],
                1.0 + self.a * u[0],
            ],
        )
    }
}

/// Sup-norm box on which a model is contractually valid.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl DomainBox {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!(
                "domain radius must be positive, got {radius}"
            )));
        }
        if center.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("domain center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Sup-norm distance from the center.
    pub fn offset(&self, u: &DVector<f64>) -> f64 {
        (u - &self.center).amax()
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        u.len() == self.dim() && self.offset(u) <= self.radius * (1.0 + 1e-12)
    }

    pub fn distance_to_boundary(&self, u: &DVector<f64>) -> f64 {
        self.radius - self.offset(u)
    }

    pub fn check(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        if self.contains(u) {
            Ok(())
        } else {
            Err(self.out_of_domain(u))
        }
    }

    pub fn out_of_domain(&self, u: &DVector<f64>) -> Error {
        Error::OutOfDomain {
            state: u.iter().copied().collect(),
            center: self.center.iter().copied().collect(),
            radius: self.radius,
        }
    }

    pub fn inflated(&self, factor: f64) -> DomainBox {
        DomainBox {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }

    /// Tensor grid with `per_axis` points per coordinate, corners included.
    pub fn grid(&self, per_axis: usize) -> Vec<DVector<f64>> {
        let n = self.dim();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = flat;
            let mut u = self.center.clone();
            for d in 0..n {
                let i = idx % per_axis;
                idx /= per_axis;
                let t = i as f64 / (per_axis - 1) as f64;
                u[d] += self.radius * (2.0 * t - 1.0);
            }
            out.push(u);
        }
        out
    }
}

/// Outcome of grid certification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub k: usize,
    pub worst_gap: f64,
    /// `None` for non-conservative models.
    pub max_jacobian_mismatch: Option<f64>,
    pub grid_points: usize,
}

/// A strictly hyperbolic, non-characteristic system on a box.
#[derive(Clone)]
pub struct HyperbolicModel {
    name: String,
    field: Arc<dyn MatrixField>,
    domain: DomainBox,
    gap_c: f64,
    k: usize,
    reference: DMatrix<f64>,
}

impl fmt::Debug for HyperbolicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HyperbolicModel")
            .field("name", &self.name)
            .field("field", &self.field)
            .field("domain", &self.domain)
            .field("gap_c", &self.gap_c)
            .field("k", &self.k)
            .finish()
    }
}

impl HyperbolicModel {
    /// Certifies `field` on `domain` and builds the model.
    ///
    /// When `gap_c` is `None` it defaults to [`DEFAULT_GAP_FRACTION`] of the
    /// smallest `|lambda|` observed on the grid.
    pub fn new(
        name: impl Into<String>,
        field: Arc<dyn MatrixField>,
        domain: DomainBox,
        gap_c: Option<f64>,
        grid_per_axis: usize,
    ) -> Result<Self> {
        let n = field.dim();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidParams(format!(
                "dimension must be between 2 and {MAX_DIM}, got {n}"
            )));
        }
        if domain.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        let report = certify(field.as_ref(), &domain, grid_per_axis)?;
        if report.worst_gap <= 0.0 {
            return Err(Error::NonCharacteristicViolation {
                observed: report.worst_gap,
                required: 0.0,
            });
        }
        let gap_c = match gap_c {
            Some(c) if !(c > 0.0) => {
                return Err(Error::InvalidParams(format!("gap_c must be positive, got {c}")))
            }
            Some(c) if c > report.worst_gap => {
                return Err(Error::NonCharacteristicViolation {
                    observed: report.worst_gap,
                    required: c,
                })
            }
            Some(c) => c,
            None => DEFAULT_GAP_FRACTION * report.worst_gap,
        };
        if report.k == 0 || report.k == n {
            return Err(Error::InvalidParams(format!(
                "need 1 <= k <= n-1 negative eigenvalues, found k = {}",
                report.k
            )));
        }
        let reference = eigendecompose(&field.matrix(&domain.center), None)?.right;
        Ok(Self {
            name: name.into(),
            field,
            domain,
            gap_c,
            k: report.k,
            reference,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn gap_c(&self) -> f64 {
        self.gap_c
    }

    /// Number of strictly negative eigenvalues.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> &Arc<dyn MatrixField> {
        &self.field
    }

    pub fn is_conservative(&self) -> bool {
        self.field.flux(&self.domain.center).is_some()
    }

    pub fn check_dim(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            })
        }
    }

    /// `A(U)` for `U` inside the domain box.
    pub fn eval_matrix(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.domain.check(u)?;
        Ok(self.field.matrix(u))
    }

    /// `A(U)` without the domain check.
    pub fn matrix_unchecked(&self, u: &DVector<f64>) -> DMatrix<f64> {
        self.field.matrix(u)
    }

    /// `F(U)` when the model is conservative.
    pub fn eval_flux(&self, u: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        self.domain.check(u)?;
        Ok(self.field.flux(u))
    }

    /// Spectral data oriented against the eigenbasis at the box center.
    pub fn spectral(&self, u: &DVector<f64>) -> Result<SpectralData> {
        self.domain.check(u)?;
        self.spectral_unchecked(u)
    }

    pub fn spectral_unchecked(&self, u: &DVector<f64>) -> Result<SpectralData> {
        eigendecompose(&self.field.matrix(u), Some(&self.reference))
    }

    pub fn reference_basis(&self) -> &DMatrix<f64> {
        &self.reference
    }
}

fn certify(field: &dyn MatrixField, domain: &DomainBox, grid_per_axis: usize) -> Result<ModelReport> {
    if grid_per_axis < 2 {
        return Err(Error::InvalidParams(format!(
            "grid_per_axis must be at least 2, got {grid_per_axis}"
        )));
    }
    let points = domain.grid(grid_per_axis);
    let mut k = None;
    let mut worst_gap = f64::INFINITY;
    let mut mismatch: Option<f64> = None;
    let h = 1e-5 * domain.radius.max(1e-3);
    for u in &points {
        let a = field.matrix(u);
        let spec = eigendecompose(&a, None).map_err(|e| Error::HyperbolicityCheckFailed {
            state: u.iter().copied().collect(),
            reason: e.to_string(),
        })?;
        let neg = spec.negative_count();
        match k {
            None => k = Some(neg),
            Some(first) if first != neg => {
                return Err(Error::NonUniformSignature { first, other: neg })
            }
            _ => {}
        }
        worst_gap = worst_gap.min(spec.min_abs_eigenvalue());
        if field.flux(u).is_some() {
            let jac = flux_jacobian(field, u, h).expect("flux present");
            let m = (&jac - &a).amax();
            mismatch = Some(mismatch.map_or(m, |x| x.max(m)));
        }
    }
    Ok(ModelReport {
        k: k.unwrap_or(0),
        worst_gap,
        max_jacobian_mismatch: mismatch,
        grid_points: points.len(),
    })
}

/// Central-difference Jacobian of the flux.
pub fn flux_jacobian(field: &dyn MatrixField, u: &DVector<f64>, h: f64) -> Option<DMatrix<f64>> {
    let n = field.dim();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += h;
        um[j] -= h;
        let col = (field.flux(&up)? - field.flux(&um)?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Some(jac)
}

/// Largest violation of the mixed-partial symmetry `d A_ij / d u_m = d A_im / d u_j`
/// at `u`, measured by central differences. A Jacobian field gives `O(h^2)`.
pub fn integrability_defect(model: &HyperbolicModel, u: &DVector<f64>, h: f64) -> f64 {
    let n = model.dim();
    let derivs: Vec<DMatrix<f64>> = (0..n)
        .map(|m| {
            let mut up = u.clone();
            let mut um = u.clone();
            up[m] += h;
            um[m] -= h;
            (model.matrix_unchecked(&up) - model.matrix_unchecked(&um)) / (2.0 * h)
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for m in 0..n {
                worst = worst.max((derivs[m][(i, j)] - derivs[j][(i, m)]).abs());
            }
        }
    }
    worst
}

/// Grid certification of an existing model.
pub fn verify_model(model: &HyperbolicModel, grid_per_axis: usize) -> Result<ModelReport> {
    let report = certify(model.field.as_ref(), &model.domain, grid_per_axis)?;
    if report.k != model.k {
        return Err(Error::NonUniformSignature {
            first: model.k,
            other: report.k,
        });
    }
    if report.worst_gap < model.gap_c || report.worst_gap <= 0.0 {
        return Err(Error::NonCharacteristicViolation {
            observed: report.worst_gap,
            required: model.gap_c,
        });
    }
    Ok(report)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["linear", "p_system", "noncons_demo"];

fn param_f64(params: &BTreeMap<String, Value>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::InvalidParams(format!("parameter `{key}` must be a number"))),
    }
}

fn param_vec(params: &BTreeMap<String, Value>, key: &str) -> Result<Option<Vec<f64>>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value::<Vec<f64>>(v.clone())
            .map(Some)
            .map_err(|_| Error::InvalidParams(format!("parameter `{key}` must be a list of numbers"))),
    }
}

/// Builds one of the zoo models from a parameter map.
///
/// Common keys: `center` (list), `radius`, `gap_c`, `grid`. Model keys:
/// `linear`: `matrix` (list of rows, default `diag(-1, 2)`);
/// `p_system`: `gamma` (default 2), `pressure` (`"gamma"` or `"cubic"`),
/// `slope`, `curvature`; `noncons_demo`: `a`, `b`, `c`.
pub fn builtin(name: &str, params: &BTreeMap<String, Value>) -> Result<HyperbolicModel> {
    let grid = param_f64(params, "grid")?
        .map(|g| g as usize)
        .unwrap_or(DEFAULT_GRID_PER_AXIS);
    let gap_c = param_f64(params, "gap_c")?;
    let radius = param_f64(params, "radius")?.unwrap_or(DEFAULT_RADIUS);
    let center = param_vec(params, "center")?;
    match name {
        "linear" => {
            let matrix = match params.get("matrix") {
                None | Some(Value::Null) => DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]),
                Some(v) => {
                    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).map_err(|_| {
                        Error::InvalidParams("`matrix` must be a list of rows".into())
                    })?;
                    let n = rows.len();
                    if n == 0 || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::InvalidParams("`matrix` must be square".into()));
                    }
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
            };
            let n = matrix.nrows();
            let center = center.map(DVector::from_vec).unwrap_or_else(|| DVector::zeros(n));
            let domain = DomainBox::new(center, radius)?;
            HyperbolicModel::new("linear", Arc::new(LinearField { matrix }), domain, gap_c, grid)
        }
        "p_system" => {
            let kind = params
                .get("pressure")
                .and_then(Value::as_str)
                .unwrap_or("gamma");
            let pressure = match kind {
                "gamma" => {
                    let gamma = param_f64(params, "gamma")?.unwrap_or(2.0);
                    if !(gamma > 1.0) {
                        return Err(Error::InvalidParams(format!("gamma must exceed 1, got {gamma}")));
                    }
                    Pressure::Gamma { gamma }
                }
                "cubic" => {
                    let slope = param_f64(params, "slope")?.unwrap_or(1.0);
                    let curvature = param_f64(params, "curvature")?.unwrap_or(1.0);
                    if !(slope > 0.0) || !(curvature >= 0.0) {
                        return Err(Error::InvalidParams(
                            "cubic pressure needs slope > 0 and curvature >= 0".into(),
                        ));
                    }
                    Pressure::Cubic { slope, curvature }
                }
                other => {
                    return Err(Error::InvalidParams(format!("unknown pressure law `{other}`")))
                }
            };
            let center = center.unwrap_or_else(|| vec![1.0, 0.0]);
            if center.len() != 2 {
                return Err(Error::InvalidParams("p_system center must have 2 entries".into()));
            }
            if center[0] - radius <= 0.0 {
                return Err(Error::InvalidParams(
                    "p_system domain must keep v bounded away from 0".into(),
                ));
            }
            let domain = DomainBox::new(DVector::from_vec(center), radius)?;
            HyperbolicModel::new("p_system", Arc::new(PSystem { pressure }), domain, gap_c, grid)
        }
        "noncons_demo" => {
            let d = NonconsDemo::default();
            let field = NonconsDemo {
                a: param_f64(params, "a")?.unwrap_or(d.a),
                b: param_f64(params, "b")?.unwrap_or(d.b),
                c: param_f64(params, "c")?.unwrap_or(d.c),
            };
            let center = center.map(DVector::from_vec).unwrap_or_else(|| DVector::zeros(2));
            let domain = DomainBox::new(center, radius)?;
            HyperbolicModel::new("noncons_demo", Arc::new(field), domain, gap_c, grid)
        }
        other => Err(Error::InvalidParams(format!(
            "unknown model `{other}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// JSON model definition: `{"name", "params", "domain": {"center", "radius"}, "gap_c"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_c: Option<f64>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Parameters with domain and gap folded in, as accepted by [`builtin`].
    pub fn merged_params(&self) -> BTreeMap<String, Value> {
        let mut params = self.params.clone();
        if let Some(d) = &self.domain {
            params.insert("center".into(), serde_json::json!(d.center));
            params.insert("radius".into(), serde_json::json!(d.radius));
        }
        if let Some(c) = self.gap_c {
            params.insert("gap_c".into(), serde_json::json!(c));
        }
        params
    }

    pub fn build(&self) -> Result<HyperbolicModel> {
        builtin(&self.name, &self.merged_params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use serde_json::json;

    fn params(v: Value) -> BTreeMap<String, Value> {
        serde_json::from_value(v).unwrap()
    }

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn linear_matrix_is_constant() {
        let m = builtin("linear", &BTreeMap::new()).unwrap();
        let a = m.eval_matrix(&dv(&[0.1, -0.2])).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]));
        assert_eq!(m.k(), 1);
        assert!(m.gap_c() <= 1.0);
    }

    #[test]
    fn p_system_matrix_at_rest_state() {
        let m = builtin("p_system", &params(json!({"gamma": 2.0}))).unwrap();
        let a = m.eval_matrix(&dv(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -2.0, 0.0]));
    }

    #[test]
    fn outside_box_is_rejected() {
        let m = builtin("linear", &BTreeMap::new()).unwrap();
        assert!(matches!(
            m.eval_matrix(&dv(&[0.3, 0.0])),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn eval_is_bit_identical() {
        let m = builtin("noncons_demo", &BTreeMap::new()).unwrap();
        let u = dv(&[0.1234567, -0.0765]);
        let a = m.eval_matrix(&u).unwrap();
        let b = m.eval_matrix(&u).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn invalid_gamma() {
        assert!(matches!(
            builtin("p_system", &params(json!({"gamma": 1.0}))),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            builtin("bogus", &BTreeMap::new()),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn p_system_closed_form_eigenvalues() {
        let m = builtin(
            "p_system",
            &params(json!({"gamma": 2.0, "center": [1.25, 0.0], "radius": 0.75})),
        )
        .unwrap();
        assert_eq!(m.k(), 1);
        for &v in &[0.5, 0.8, 1.3, 2.0] {
            let s = m.spectral(&dv(&[v, 0.1])).unwrap();
            let lam = 2f64.sqrt() * v.powf(-1.5);
            assert_relative_eq!(s.lambdas[0], -lam, epsilon = 1e-12);
            assert_relative_eq!(s.lambdas[1], lam, epsilon = 1e-12);
        }
    }

    #[test]
    fn verify_linear() {
        let m = builtin("linear", &BTreeMap::new()).unwrap();
        let r = verify_model(&m, 5).unwrap();
        assert_eq!(r.k, 1);
        assert_relative_eq!(r.worst_gap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn verify_p_system_worst_gap() {
        // min over v in [0.5, 2] of sqrt(2) v^(-3/2), attained at v = 2.
        let m = builtin(
            "p_system",
            &params(json!({"gamma": 2.0, "center": [1.25, 0.0], "radius": 0.75})),
        )
        .unwrap();
        let r = verify_model(&m, 9).unwrap();
        assert_relative_eq!(r.worst_gap, 2f64.sqrt() * 2f64.powf(-1.5), epsilon = 1e-12);
        assert!(r.max_jacobian_mismatch.unwrap() < 1e-8);
    }

    #[test]
    fn zero_eigenvalue_is_characteristic() {
        let p = params(json!({"matrix": [[-1.0, 0.0], [0.0, 0.0]]}));
        assert!(matches!(
            builtin("linear", &p),
            Err(Error::NonCharacteristicViolation { .. })
        ));
    }

    #[test]
    fn gap_above_spectrum_rejected() {
        let p = params(json!({"gap_c": 1.5}));
        assert!(matches!(
            builtin("linear", &p),
            Err(Error::NonCharacteristicViolation { .. })
        ));
        let ok = builtin("linear", &params(json!({"gap_c": 1.0}))).unwrap();
        assert_eq!(ok.gap_c(), 1.0);
    }

    #[test]
    fn complex_spectrum_fails_certification() {
        let p = params(json!({"matrix": [[0.0, -1.0], [1.0, 0.0]]}));
        assert!(matches!(
            builtin("linear", &p),
            Err(Error::HyperbolicityCheckFailed { .. })
        ));
    }

    #[test]
    fn noncons_demo_is_not_a_jacobian() {
        let m = builtin("noncons_demo", &BTreeMap::new()).unwrap();
        assert!(!m.is_conservative());
        assert!(m.eval_flux(&dv(&[0.0, 0.0])).unwrap().is_none());
        let defect = integrability_defect(&m, &m.domain().center.clone(), 1e-4);
        assert!(defect > 1e-3, "defect {defect}");
        let r = verify_model(&m, 9).unwrap();
        assert_eq!(r.k, 1);
        assert!(r.max_jacobian_mismatch.is_none());
    }

    #[test]
    fn p_system_matrix_matches_flux_jacobian() {
        let m = builtin("p_system", &params(json!({"gamma": 1.4}))).unwrap();
        let h = 1e-4;
        for u in m.domain().grid(5) {
            let jac = flux_jacobian(m.field().as_ref(), &u, h).unwrap();
            let a = m.eval_matrix(&u).unwrap();
            assert!((&jac - &a).amax() <= 10.0 * h * h);
        }
        assert!(integrability_defect(&m, &dv(&[1.0, 0.0]), 1e-4) < 1e-6);
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"name": "p_system", "params": {"gamma": 1.4},
                       "domain": {"center": [1.0, 0.0], "radius": 0.2}, "gap_c": 0.5}"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.name(), "p_system");
        assert_eq!(m.gap_c(), 0.5);
        assert_eq!(m.domain().radius, 0.2);
    }
}
