//! Real eigen-structure of strictly hyperbolic matrices.
//!
//! Eigenvalues are sorted ascending, right eigenvectors have unit Euclidean
//! norm and a sign fixed either against a reference basis or by making the
//! first nonzero component positive. Left eigenvectors are the rows of the
//! inverse of the right eigenvector matrix, so `L·R = I`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::HyperbolicModel;

/// Minimal separation between consecutive eigenvalues.
pub const MIN_EIGEN_GAP: f64 = 1e-10;
/// Separation below which interaction coefficients are refused.
pub const ILL_CONDITIONED_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Eigenvalues, strictly increasing.
    pub lambdas: DVector<f64>,
    /// Right eigenvectors as columns.
    pub right: DMatrix<f64>,
    /// Left eigenvectors as rows.
    pub left: DMatrix<f64>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn right_vector(&self, i: usize) -> DVector<f64> {
        self.right.column(i).into_owned()
    }

    pub fn left_vector(&self, i: usize) -> DVector<f64> {
        self.left.row(i).transpose()
    }

    /// Number of strictly negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        self.lambdas.iter().filter(|&&l| l < 0.0).count()
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.lambdas.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()))
    }

    pub fn min_gap(&self) -> f64 {
        (1..self.dim())
            .map(|i| self.lambdas[i] - self.lambdas[i - 1])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sorted real eigendecomposition of `a`.
///
/// With `orient`, each right eigenvector is flipped so that its inner
/// product with the matching column of `orient` is positive.
pub fn eigendecompose(a: &DMatrix<f64>, orient: Option<&DMatrix<f64>>) -> Result<SpectralData> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::StrictHyperbolicityViolation("empty matrix".into()));
    }
    let scale = 1.0 + a.amax();
    let eigs = a.clone().schur().complex_eigenvalues();
    let mut lambdas = Vec::with_capacity(n);
    for z in eigs.iter() {
        if z.im.abs() > 1e-12 * scale {
            return Err(Error::StrictHyperbolicityViolation(format!(
                "complex eigenvalue {} {:+}i",
                z.re, z.im
            )));
        }
        lambdas.push(z.re);
    }
    lambdas.sort_by(|x, y| x.total_cmp(y));
    for w in lambdas.windows(2) {
        if w[1] - w[0] < MIN_EIGEN_GAP {
            return Err(Error::StrictHyperbolicityViolation(format!(
                "eigenvalues {} and {} are not separated",
                w[0], w[1]
            )));
        }
    }

    let mut right = DMatrix::zeros(n, n);
    for (i, &lambda) in lambdas.iter().enumerate() {
        let mut v = null_vector(a, lambda);
        let flip = match orient {
            Some(basis) => v.dot(&basis.column(i)) < 0.0,
            None => v
                .iter()
                .find(|x| x.abs() > 1e-12)
                .is_some_and(|&x| x < 0.0),
        };
        if flip {
            v = -v;
        }
        right.set_column(i, &v);
    }
    let left = right.clone().try_inverse().ok_or_else(|| {
        Error::StrictHyperbolicityViolation("eigenvector matrix is singular".into())
    })?;
    Ok(SpectralData {
        lambdas: DVector::from_vec(lambdas),
        right,
        left,
    })
}

/// Unit vector spanning the (numerical) kernel of `a - lambda I`.
fn null_vector(a: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty");
    let mut v = v_t.row(imin).transpose();
    // One step of inverse iteration on a slightly perturbed shift sharpens the
    // vector when the Schur eigenvalue carries rounding error.
    let perturbed = a - DMatrix::identity(n, n) * (lambda + 1e-13 * (1.0 + lambda.abs()));
    if let Some(w) = perturbed.lu().solve(&v) {
        let norm = w.norm();
        if norm.is_finite() && norm > 0.0 {
            v = w / norm;
        }
    }
    v.normalize()
}

/// Coefficients of `d` along the right eigenvectors at `u`: `a_j = <L_j(u), d>`.
pub fn decompose_derivative(
    model: &HyperbolicModel,
    u: &DVector<f64>,
    d: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_dim(d)?;
    let spec = model.spectral(u)?;
    Ok(&spec.left * d)
}

/// Interaction coefficients `beta[j][h][l] = -<(D L_j) R_h, R_l>`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionCoefficients {
    n: usize,
    data: Vec<f64>,
}

impl InteractionCoefficients {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, h: usize, l: usize) -> f64 {
        self.data[(j * self.n + h) * self.n + l]
    }

    fn set(&mut self, j: usize, h: usize, l: usize, value: f64) {
        self.data[(j * self.n + h) * self.n + l] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn combine(a: &Self, wa: f64, b: &Self, wb: f64) -> Self {
        Self {
            n: a.n,
            data: a
                .data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| wa * x + wb * y)
                .collect(),
        }
    }
}

/// Interaction coefficients by Richardson-extrapolated central differences
/// of the oriented left-eigenvector field. `step` defaults to `1e-6 * radius`.
pub fn beta_coefficients(
    model: &HyperbolicModel,
    u: &DVector<f64>,
    step: Option<f64>,
) -> Result<InteractionCoefficients> {
    let step = step.unwrap_or(1e-6 * model.domain().radius);
    let coarse = beta_central(model, u, step)?;
    let fine = beta_central(model, u, 0.5 * step)?;
    Ok(InteractionCoefficients::combine(
        &fine,
        4.0 / 3.0,
        &coarse,
        -1.0 / 3.0,
    ))
}

/// Plain second-order central-difference interaction coefficients with step `step`.
pub fn beta_central(
    model: &HyperbolicModel,
    u: &DVector<f64>,
    step: f64,
) -> Result<InteractionCoefficients> {
    if !(step > 0.0) {
        return Err(Error::InvalidParams(format!("step must be positive, got {step}")));
    }
    let domain = model.domain();
    domain.check(u)?;
    if domain.distance_to_boundary(u) < step {
        return Err(Error::OutOfDomain {
            state: u.iter().copied().collect(),
            center: domain.center.iter().copied().collect(),
            radius: domain.radius,
        });
    }
    let base = model.spectral(u)?;
    let n = base.dim();
    let mut beta = InteractionCoefficients::zeros(n);
    for h in 0..n {
        let dir = base.right_vector(h);
        let plus = model.spectral(&(u + &dir * step))?;
        let minus = model.spectral(&(u - &dir * step))?;
        for s in [&base, &plus, &minus] {
            if s.min_gap() < ILL_CONDITIONED_GAP {
                return Err(Error::IllConditioned {
                    state: u.iter().copied().collect(),
                    threshold: ILL_CONDITIONED_GAP,
                });
            }
        }
        let dl = (&plus.left - &minus.left) / (2.0 * step);
        // Row j of dl is (D L_j) R_h.
        let projected = &dl * &base.right;
        for j in 0..n {
            for l in 0..n {
                beta.set(j, h, l, -projected[(j, l)]);
            }
        }
    }
    Ok(beta)
}
