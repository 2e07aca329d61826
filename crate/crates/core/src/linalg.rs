//! Small direct solvers: tridiagonal (Thomas) and general banded LU.

use crate::error::{Error, Result};

/// A tridiagonal matrix stored by diagonals.
///
/// `lower[i]` sits at `(i + 1, i)`, `upper[i]` at `(i, i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Precomputes the Thomas elimination so repeated solves are `O(n)` with no divisions
    /// beyond one multiply per entry.
    pub fn factorize(&self) -> Result<ThomasFactor> {
        let n = self.len();
        let mut c_prime = vec![0.0; n.saturating_sub(1)];
        let mut inv_denom = vec![0.0; n];
        let mut denom = self.diag[0];
        for i in 0..n {
            if i > 0 {
                denom = self.diag[i] - self.lower[i - 1] * c_prime[i - 1];
            }
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "singular tridiagonal pivot at row {i}"
                )));
            }
            inv_denom[i] = 1.0 / denom;
            if i + 1 < n {
                c_prime[i] = self.upper[i] * inv_denom[i];
            }
        }
        Ok(ThomasFactor {
            lower: self.lower.clone(),
            c_prime,
            inv_denom,
        })
    }
}

/// Stored Thomas factorization of a [`Tridiagonal`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThomasFactor {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl ThomasFactor {
    /// Solves in place: `rhs` is overwritten by the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.inv_denom.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, solved by
/// Gaussian elimination with partial pivoting (fill-in widens the upper band to `kl + ku`).
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage: row `i`, column `j` lives at `i * width + (j + kl - i)`,
    /// with `width = 2 kl + ku + 1` to hold the pivoting fill-in.
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * width],
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Solves `A x = b`, consuming the matrix.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let kl = self.kl;
        let ku_fill = self.kl + self.ku;
        let mut x = b.to_vec();
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let a = self.get(i, k).abs();
                if a > best {
                    best = a;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "singular banded matrix at column {k}"
                )));
            }
            let last_col = (k + ku_fill).min(n - 1);
            if piv != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let bidx = self.idx(piv, j);
                    self.data.swap(a, bidx);
                }
                x.swap(k, piv);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in k..=last_col {
                    let akj = self.data[self.idx(k, j)];
                    let id = self.idx(i, j);
                    self.data[id] -= factor * akj;
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + ku_fill).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= self.data[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_product() {
        let t = Tridiagonal::new(
            vec![1.0, -0.5, 2.0],
            vec![4.0, 5.0, 6.0, 7.0],
            vec![0.3, 1.0, -1.0],
        );
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let b = t.mul_vec(&x);
        let y = t.factorize().unwrap().solve(&b);
        for (a, e) in y.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn banded_solve_needs_pivoting() {
        // zero leading diagonal forces a row swap
        let n = 5;
        let mut a = BandedMatrix::zeros(n, 2, 2);
        let dense = [
            [0.0, 1.0, 2.0, 0.0, 0.0],
            [3.0, 1.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 4.0, 1.0, 2.0],
            [0.0, 2.0, 1.0, 5.0, 1.0],
            [0.0, 0.0, 1.0, 1.0, 3.0],
        ];
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    a.add(i, j, v);
                }
            }
        }
        let x = [1.0, 2.0, -1.0, 0.5, 4.0];
        let b: Vec<f64> = dense
            .iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let y = a.solve(&b).unwrap();
        for (a, e) in y.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn banded_singular_is_error() {
        let a = BandedMatrix::zeros(3, 1, 1);
        assert!(a.solve(&[1.0, 1.0, 1.0]).is_err());
    }
}
