//! Uniform 1D grid, discrete Laplacian and the principal Dirichlet eigenpair.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;

/// Uniform grid on `(0, length)` with `n` interior nodes `x_i = i dx`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    length: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 interior nodes, got {n}")));
        }
        Ok(Grid {
            length,
            n,
            dx: length / (n + 1) as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Abscissa of interior node `i` (zero-based, so `x(0) = dx`).
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Indices of interior nodes inside the closed interval `[lo, hi]`.
    pub fn support(&self, (lo, hi): (f64, f64)) -> std::ops::Range<usize> {
        let tol = 1e-12 * self.length;
        let nodes = self.nodes();
        let start = nodes.iter().position(|&x| x >= lo - tol).unwrap_or(self.n);
        let end = nodes
            .iter()
            .rposition(|&x| x <= hi + tol)
            .map_or(start, |i| i + 1);
        start..end.max(start)
    }

    /// Field sampled from `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.nodes().into_iter().map(f).collect())
    }

    pub fn constant(&self, value: f64) -> Field {
        Field(vec![value; self.n])
    }

    /// `(2/dx^2)(1 - cos(pi dx / L))`, the exact smallest eigenvalue of the
    /// Dirichlet second-difference operator on this grid.
    pub fn closed_form_lambda1(&self) -> f64 {
        2.0 / (self.dx * self.dx) * (1.0 - (PI * self.dx / self.length).cos())
    }

    /// Mass matrix weight: discrete L2 inner products use `dx * sum`.
    pub fn l2_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.dx * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }
}

/// Nodal values of a scalar field on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i - other_i|`.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        sup_distance(&self.0, other)
    }

    pub fn scaled(&self, k: f64) -> Field {
        Field(self.0.iter().map(|v| k * v).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Boundary closure for the second-difference operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Prescribed boundary values, used as ghost data.
    Dirichlet { left: f64, right: f64 },
    /// Zero flux: the ghost value mirrors the adjacent interior node.
    Neumann,
}

impl Boundary {
    pub const ZERO: Boundary = Boundary::Dirichlet {
        left: 0.0,
        right: 0.0,
    };

    pub fn dirichlet(left: f64, right: f64) -> Self {
        Boundary::Dirichlet { left, right }
    }

    pub fn is_neumann(&self) -> bool {
        matches!(self, Boundary::Neumann)
    }

    /// Ghost values `(left, right)` for a field `f`.
    pub fn ghosts(&self, f: &[f64]) -> (f64, f64) {
        match *self {
            Boundary::Dirichlet { left, right } => (left, right),
            Boundary::Neumann => (f[0], f[f.len() - 1]),
        }
    }
}

/// Central second difference `(f_{i-1} - 2 f_i + f_{i+1}) / dx^2` with ghost data from `bc`.
pub fn apply_laplacian(grid: &Grid, f: &[f64], bc: Boundary) -> Vec<f64> {
    let n = grid.n();
    assert_eq!(f.len(), n, "field length does not match grid");
    let inv = 1.0 / (grid.dx() * grid.dx());
    let (gl, gr) = bc.ghosts(f);
    (0..n)
        .map(|i| {
            let left = if i == 0 { gl } else { f[i - 1] };
            let right = if i + 1 == n { gr } else { f[i + 1] };
            (left - 2.0 * f[i] + right) * inv
        })
        .collect()
}

/// Matrix of the homogeneous part of the second difference (ghosts zero for
/// Dirichlet, mirrored for Neumann), scaled by `1/dx^2`.
pub fn laplacian_matrix(grid: &Grid, neumann: bool) -> Tridiagonal {
    let n = grid.n();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let mut diag = vec![-2.0 * inv; n];
    if neumann {
        diag[0] = -inv;
        diag[n - 1] = -inv;
    }
    Tridiagonal::new(vec![inv; n - 1], diag, vec![inv; n - 1])
}

/// Principal Dirichlet eigenpair of `-d^2/dx^2` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda1_discrete: f64,
    /// `pi^2 / L^2`.
    pub lambda1_analytic: f64,
    /// Positive eigenfunction normalized to unit maximum.
    pub eigenfunction: Field,
    pub iterations: usize,
    pub residual: f64,
}

const EIGEN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 10_000;

/// Inverse power iteration on the Dirichlet second-difference matrix, started from all ones.
pub fn principal_eigenvalue(grid: &Grid) -> Result<Eigenpair> {
    let n = grid.n();
    // -Delta_h is symmetric positive definite
    let neg_lap = {
        let t = laplacian_matrix(grid, false);
        Tridiagonal::new(
            t.lower.iter().map(|v| -v).collect(),
            t.diag.iter().map(|v| -v).collect(),
            t.upper.iter().map(|v| -v).collect(),
        )
    };
    let factor = neg_lap.factorize()?;
    // backward-error normalization by the operator norm bound 4/dx^2
    let op_norm = 4.0 / (grid.dx() * grid.dx());
    let mut x = vec![1.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=EIGEN_MAX_ITER {
        let mut y = x.clone();
        factor.solve_in_place(&mut y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in y.iter_mut() {
            *v /= norm;
        }
        let ay = neg_lap.mul_vec(&y);
        let lambda = y.iter().zip(&ay).map(|(a, b)| a * b).sum::<f64>();
        residual = ay
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / op_norm;
        x = y;
        if residual < EIGEN_TOL {
            let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let eigenfunction = Field(x.iter().map(|v| v / max).collect());
            return Ok(Eigenpair {
                lambda1_discrete: lambda,
                lambda1_analytic: PI * PI / (grid.length() * grid.length()),
                eigenfunction,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        what: "inverse power iteration",
        iterations: EIGEN_MAX_ITER,
        residual,
    })
}
