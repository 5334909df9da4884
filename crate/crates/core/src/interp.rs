//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson) on a
//! strictly increasing, possibly nonuniform grid.

use nalgebra::DVector;

/// Scalar PCHIP interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing with at least one node.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d: slopes(x, y),
        }
    }

    /// Value at `t`; constant extrapolation outside the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 || t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&xi| xi <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h10, h01, h11) = hermite(s);
        // increment form keeps constant data exact
        self.y[k] + h01 * (self.y[k + 1] - self.y[k]) + h * (h10 * self.d[k] + h11 * self.d[k + 1])
    }

    /// Derivative at `t`; zero outside the grid.
    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 || t < self.x[0] || t > self.x[n - 1] {
            return 0.0;
        }
        let k = (self.x.partition_point(|&xi| xi <= t).max(1) - 1).min(n - 2);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let dy = self.y[k + 1] - self.y[k];
        6.0 * s * (1.0 - s) * dy / h
            + (1.0 - 4.0 * s + 3.0 * s * s) * self.d[k]
            + (3.0 * s * s - 2.0 * s) * self.d[k + 1]
    }
}

/// Hermite basis weights of `d_k`, `y_{k+1}` and `d_{k+1}`.
fn hermite(s: f64) -> (f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Shape-preserving one-sided three-point slope.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Component-wise PCHIP of a vector-valued sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPchip {
    parts: Vec<Pchip>,
}

impl VectorPchip {
    pub fn new(x: &[f64], values: &[DVector<f64>]) -> Self {
        let n = values.first().map_or(0, |v| v.len());
        let parts = (0..n)
            .map(|i| {
                let y: Vec<f64> = values.iter().map(|v| v[i]).collect();
                Pchip::new(x, &y)
            })
            .collect();
        Self { parts }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.parts.len(), self.parts.iter().map(|p| p.eval(t)))
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.parts.len(), self.parts.iter().map(|p| p.derivative(t)))
    }
}
