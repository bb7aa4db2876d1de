//! Small fixed-size complex matrices and the dense solver used for the Bloch system.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::model::C64;

pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec9 = SVector<C64, 9>;
pub type Mat9x4 = SMatrix<C64, 9, 4>;
pub type Mat4x9 = SMatrix<C64, 4, 9>;
pub type Mat4 = SMatrix<C64, 4, 4>;

/// Condition estimates above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Residual (max-norm, relative to the right-hand side) that triggers one
/// step of iterative refinement.
const REFINE_RESIDUAL: f64 = 1e-10;

pub(crate) fn norm1(m: &Mat9) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Partial-pivoting LU factorization of a 9×9 system together with its
/// explicit inverse and 1-norm condition number.
pub struct Factorized {
    matrix: Mat9,
    lu: nalgebra::LU<C64, nalgebra::Const<9>, nalgebra::Const<9>>,
    inverse: Mat9,
    condition: f64,
}

impl Factorized {
    pub fn new(matrix: Mat9) -> Result<Self> {
        let lu = matrix.lu();
        let inverse = lu.try_inverse().ok_or(Error::SingularSystem {
            condition: f64::INFINITY,
            omega: None,
        })?;
        let condition = norm1(&matrix) * norm1(&inverse);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::SingularSystem {
                condition,
                omega: None,
            });
        }
        Ok(Factorized {
            matrix,
            lu,
            inverse,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn inverse(&self) -> &Mat9 {
        &self.inverse
    }

    /// Solves `matrix · x = b`, refining once if the residual is large.
    pub fn solve(&self, b: &Vec9) -> Vec9 {
        let mut x = self.lu.solve(b).unwrap_or_else(|| self.inverse * b);
        let residual = b - self.matrix * x;
        let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if residual.iter().map(|z| z.norm()).fold(0.0, f64::max) > REFINE_RESIDUAL * scale {
            if let Some(dx) = self.lu.solve(&residual) {
                x += dx;
            }
        }
        x
    }
}

/// Smallest eigenvalue of the Hermitian part; used for positivity checks.
pub fn min_hermitian_eigenvalue<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    let h = (m + m.adjoint()) * C64::from(0.5);
    nalgebra::DMatrix::from_column_slice(N, N, h.as_slice())
        .symmetric_eigenvalues()
        .min()
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermitian_defect<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
