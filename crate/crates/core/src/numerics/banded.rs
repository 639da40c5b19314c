//! Banded Gaussian elimination with partial pivoting.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("singular banded matrix at column {column}")]
pub struct SingularMatrix {
    pub column: usize,
}

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage leaves
/// room for the `kl` extra super-diagonals that pivoting can fill in.
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

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "({i}, {j}) outside the band"
        );
        let k = self.slot(i, j).expect("inside the matrix");
        self.data[k] = v;
    }

    /// Solves `A x = b` in place of a copy; `A` is consumed.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(SingularMatrix { column: k });
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, c) = (self.get(k, j), self.get(p, j));
                    self.put(k, j, c);
                    self.put(p, j, a);
                }
                x.swap(k, p);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.put(i, k, 0.0);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - factor * self.get(k, j);
                    self.put(i, j, v);
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=last_col {
                acc -= self.get(k, j) * x[j];
            }
            x[k] = acc / self.get(k, k);
        }
        Ok(x)
    }

    #[inline]
    fn put(&mut self, i: usize, j: usize, v: f64) {
        if let Some(k) = self.slot(i, j) {
            self.data[k] = v;
        } else {
            debug_assert!(v == 0.0, "fill-in outside storage at ({i}, {j})");
        }
    }
}
