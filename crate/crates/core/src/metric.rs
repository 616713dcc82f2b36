//! Symmetric positive-definite metrics for the anisotropic quadratic
//! Hamiltonian `H(p) = p^T A p`.

use crate::error::{CoreError, Result};
use nalgebra::{DMatrix, DVector};

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e12;

/// An SPD matrix `A` with its eagerly validated inverse and spectrum edges.
///
/// The inverse is assembled from the symmetric eigendecomposition so it is
/// symmetric by construction; construction refuses asymmetric input (beyond
/// `1e-12` relative), non-positive eigenvalues, and condition numbers above
/// `1e12`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl Metric {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(CoreError::NotSpd(format!(
                "expected square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("metric entries"));
        }
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let asym = (&a - a.transpose()).abs().max();
        if asym > SYMMETRY_TOL * scale {
            return Err(CoreError::NotSpd(format!(
                "asymmetry {asym:.3e} exceeds tolerance"
            )));
        }
        let eig = nalgebra::SymmetricEigen::new(a.clone());
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if lambda_min <= 0.0 {
            return Err(CoreError::NotSpd(format!(
                "minimum eigenvalue {lambda_min:.3e} is not positive"
            )));
        }
        let cond = lambda_max / lambda_min;
        if cond > MAX_CONDITION {
            return Err(CoreError::IllConditioned(cond));
        }
        let inv_vals = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| 1.0 / l),
        );
        let a_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
        // Symmetrize away the last rounding bits.
        let a_inv = (&a_inv + a_inv.transpose()) * 0.5;
        Ok(Self {
            a,
            a_inv,
            lambda_min,
            lambda_max,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            a: DMatrix::identity(dim, dim),
            a_inv: DMatrix::identity(dim, dim),
            lambda_min: 1.0,
            lambda_max: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `x^T A^{-1} x` for a slice-borne point.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut q = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                row += self.a_inv[(i, j)] * xj;
            }
            q += x[i] * row;
        }
        q
    }

    /// `A^{-1} y` into a fresh vector.
    pub fn inv_mul(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        debug_assert_eq!(y.len(), d);
        (0..d)
            .map(|i| (0..d).map(|j| self.a_inv[(i, j)] * y[j]).sum())
            .collect()
    }
}
