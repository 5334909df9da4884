//! Banded Gaussian elimination with partial pivoting.

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored by rows with
/// room for the fill-in created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.index(i, j)]
        }
    }

    /// Adds `value` at `(i, j)`, which must lie inside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let k = self.index(i, j);
        self.data[k] += value;
    }

    /// Solves `A x = b` in place, destroying the matrix. Returns `None` when a
    /// pivot vanishes.
    pub fn solve(mut self, b: &mut [f64]) -> Option<()> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let reach = self.kl + self.ku;
        for i in 0..n {
            let last_row = (i + self.kl).min(n - 1);
            let last_col = (i + reach).min(n - 1);
            let mut p = i;
            let mut best = self.get(i, i).abs();
            for r in i + 1..=last_row {
                let v = self.get(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return None;
            }
            if p != i {
                for c in i..=last_col {
                    let a = self.index(i, c);
                    let q = self.index(p, c);
                    self.data.swap(a, q);
                }
                b.swap(i, p);
            }
            let pivot = self.data[self.index(i, i)];
            for r in i + 1..=last_row {
                let ri = self.index(r, i);
                let factor = self.data[ri] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[ri] = 0.0;
                for c in i + 1..=last_col {
                    let src = self.data[self.index(i, c)];
                    if src != 0.0 {
                        let dst = self.index(r, c);
                        self.data[dst] -= factor * src;
                    }
                }
                b[r] -= factor * b[i];
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + reach).min(n - 1);
            let mut acc = b[i];
            for c in i + 1..=last_col {
                acc -= self.data[self.index(i, c)] * b[c];
            }
            b[i] = acc / self.data[self.index(i, i)];
        }
        Some(())
    }
}
