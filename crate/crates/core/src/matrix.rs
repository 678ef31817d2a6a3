//! Dense matrix newtypes shared by every stage of the pipeline.
//!
//! All matrices are backed by [`nalgebra::DMatrix`]. The newtypes carry the
//! invariants each stage relies on: finite observations, exact symmetry, or
//! strict positive definiteness.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const EIGEN_MAX_ITERS: usize = 100_000;

/// n x p observation matrix; rows are observations, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() < 2 || m.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be at least 2x2, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(m))
    }

    /// Builds from row-major values.
    pub fn from_row_major(n: usize, p: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::LengthMismatch(values.len(), n * p));
        }
        Self::new(DMatrix::from_row_slice(n, p, values))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.ncols()).map(|j| self.column(j)).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Classical sample covariance with the n - 1 denominator.
    pub fn classical_covariance(&self) -> SymMatrix {
        SymMatrix::from_trusted(sample_covariance(&self.0))
    }
}

/// p x p symmetric matrix; not necessarily positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates near-symmetry and finiteness, then enforces exact symmetry
    /// by averaging the two triangles.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::from_trusted(m))
    }

    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self(symmetrize(m))
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigen(&self) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        sym_eigen(&self.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigen()?.eigenvalues.min())
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Symmetric positive definite matrix with its smallest eigenvalue recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct PdMatrix {
    matrix: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl PdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let sym = SymMatrix::new(m)?;
        let min_eigenvalue = sym.min_eigenvalue()?;
        if min_eigenvalue <= 0.0 {
            return Err(Error::NotPd);
        }
        Ok(Self {
            matrix: sym.0,
            min_eigenvalue,
        })
    }

    pub(crate) fn from_parts(matrix: DMatrix<f64>, min_eigenvalue: f64) -> Self {
        Self {
            matrix,
            min_eigenvalue,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix(self.matrix.clone())
    }

    pub fn inverse(&self) -> Result<PdMatrix> {
        PdMatrix::new(spd_inverse(&self.matrix)?)
    }
}

impl std::ops::Index<(usize, usize)> for PdMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.matrix[idx]
    }
}

pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITERS).ok_or(Error::EigenFailure)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::NotPd)?;
    Ok(symmetrize(chol.inverse()))
}

pub(crate) fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let mut centered = x.clone();
    for (mut col, mu) in centered.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-mu);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    symmetrize(cov)
}
