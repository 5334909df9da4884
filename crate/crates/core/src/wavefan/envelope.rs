/// Which envelope to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Least concave majorant.
    Concave,
    /// Greatest convex minorant.
    Convex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub g: Vec<f64>,
    /// Slope of the hull; at hull vertices shared by two segments, the mean of
    /// the adjacent slopes.
    pub g_prime: Vec<f64>,
    /// Indices of the hull vertices, increasing, first and last always included.
    pub vertices: Vec<usize>,
}

/// Orientation of `(a, fa) -> (b, fb) -> (c, fc)` on index coordinates; positive
/// when `c` lies above the line through the first two points.
#[inline]
fn cross(a: usize, fa: f64, b: usize, fb: f64, c: usize, fc: f64) -> f64 {
    (b - a) as f64 * (fc - fa) - (fb - fa) * (c - a) as f64
}

/// Upper hull vertices of `(i, f[i])` by a single monotone-chain pass.
fn upper_hull(f: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(f.len().min(64));
    for (c, &fc) in f.iter().enumerate() {
        while hull.len() >= 2 {
            let b = hull[hull.len() - 1];
            let a = hull[hull.len() - 2];
            if cross(a, f[a], b, f[b], c, fc) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(c);
    }
    hull
}

/// Piecewise-linear interpolant through hull vertices and its slopes.
fn fill_from_vertices(f: &[f64], step: f64, vertices: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let m = f.len();
    let mut g = vec![0.0; m];
    let mut gp = vec![0.0; m];
    if m == 1 {
        g[0] = f[0];
        return (g, gp);
    }
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rise = f[b] - f[a];
        let slope = rise / ((b - a) as f64 * step);
        for j in a..=b {
            g[j] = f[a] + rise * ((j - a) as f64 / (b - a) as f64);
            gp[j] = slope;
        }
        g[a] = f[a];
        g[b] = f[b];
    }
    // shared vertices take the mean of the two adjacent slopes
    for w in vertices.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let left = (f[b] - f[a]) / ((b - a) as f64 * step);
        let right = (f[c] - f[b]) / ((c - b) as f64 * step);
        gp[b] = 0.5 * (left + right);
    }
    (g, gp)
}

/// Concave or convex envelope of samples `f` on a uniform grid with spacing `step > 0`.
pub fn envelope(f: &[f64], step: f64, sense: Sense) -> Envelope {
    match sense {
        Sense::Concave => {
            let vertices = upper_hull(f);
            let (g, g_prime) = fill_from_vertices(f, step, &vertices);
            Envelope {
                g,
                g_prime,
                vertices,
            }
        }
        Sense::Convex => {
            let neg: Vec<f64> = f.iter().map(|x| -x).collect();
            let vertices = upper_hull(&neg);
            let (g, g_prime) = fill_from_vertices(&neg, step, &vertices);
            Envelope {
                g: g.into_iter().map(|x| -x).collect(),
                g_prime: g_prime.into_iter().map(|x| -x).collect(),
                vertices,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Vec<f64> {
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn convex_function_gets_chord() {
        let t = grid(101);
        let f: Vec<f64> = t.iter().map(|x| x * x).collect();
        let e = envelope(&f, 0.01, Sense::Concave);
        assert_eq!(e.vertices, vec![0, 100]);
        for (g, x) in e.g.iter().zip(&t) {
            assert!((g - x).abs() < 1e-15);
        }
        assert!(e.g_prime.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn concave_function_is_its_own_envelope() {
        let t = grid(101);
        let f: Vec<f64> = t.iter().map(|x| -x * x).collect();
        let e = envelope(&f, 0.01, Sense::Concave);
        assert_eq!(e.g, f);
        assert_eq!(e.vertices.len(), 101);
        for (j, x) in t.iter().enumerate().skip(1).take(99) {
            assert!((e.g_prime[j] + 2.0 * x).abs() < 1e-3);
        }
    }

    #[test]
    fn convex_sense_mirrors_concave() {
        let f = [0.0, 0.3, -0.2, 0.5, 0.1];
        let up = envelope(&f, 1.0, Sense::Concave);
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        let down = envelope(&neg, 1.0, Sense::Convex);
        for (a, b) in up.g.iter().zip(&down.g) {
            assert_eq!(*a, -b);
        }
        assert!(up.g.iter().zip(&f).all(|(g, f)| g >= f));
        assert!(down.g.iter().zip(&neg).all(|(g, f)| g <= f));
    }

    #[test]
    fn endpoints_touch() {
        let f = [1.0, 5.0, -3.0, 2.0];
        let e = envelope(&f, 0.5, Sense::Concave);
        assert_eq!(e.g[0], f[0]);
        assert_eq!(e.g[3], f[3]);
    }

    #[test]
    fn two_points() {
        let e = envelope(&[0.0, 1.0], 0.5, Sense::Convex);
        assert_eq!(e.g, vec![0.0, 1.0]);
        assert_eq!(e.g_prime, vec![2.0, 2.0]);
    }
}
