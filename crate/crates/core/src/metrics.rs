//! Performance indices comparing an estimated precision (or covariance)
//! matrix against the truth.
//!
//! Most indices are functions of `Theta0 = Theta^-1 Theta_hat`, which equals
//! the identity for a perfect estimate. `Theta0` is not symmetric in general,
//! so the one and infinity norms can differ.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sym_eigen, symmetrize, PdMatrix};

pub const DEFAULT_EDGE_TOL: f64 = 1e-8;

/// Eigenvalues of `a^-1 b` for symmetric positive definite `a`, `b`, via
/// Cholesky whitening: with `a = L L'`, these are the eigenvalues of
/// `L^-1 b L^-T`.
pub fn relative_eigenvalues(a: &PdMatrix, b: &PdMatrix) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::LengthMismatch(a.dim(), b.dim()));
    }
    let chol = a.as_matrix().clone().cholesky().ok_or(Error::NotPd)?;
    let l = chol.l();
    let half = l.solve_lower_triangular(b.as_matrix()).ok_or(Error::NotPd)?;
    let whitened = l
        .solve_lower_triangular(&half.transpose())
        .ok_or(Error::NotPd)?;
    let eig = sym_eigen(&symmetrize(whitened))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// `tr(Theta^-1 Theta_hat) - log det(Theta^-1 Theta_hat) - p`.
pub fn entropy_loss(theta_true: &PdMatrix, theta_hat: &PdMatrix) -> Result<f64> {
    let eig = relative_eigenvalues(theta_true, theta_hat)?;
    if eig.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPd);
    }
    Ok(eig.iter().map(|&l| l - l.ln()).sum::<f64>() - eig.len() as f64)
}

/// Percentage relative improvement in average loss over a baseline.
pub fn prial(loss_baseline: f64, loss_estimate: f64) -> Result<f64> {
    if !(loss_baseline > 0.0) {
        return Err(Error::ZeroBaseline(loss_baseline));
    }
    Ok(100.0 * (loss_baseline - loss_estimate) / loss_baseline)
}

/// `Theta^-1 Theta_hat`.
pub fn standardized_product(theta_true: &PdMatrix, theta_hat: &PdMatrix) -> Result<DMatrix<f64>> {
    if theta_true.dim() != theta_hat.dim() {
        return Err(Error::LengthMismatch(theta_true.dim(), theta_hat.dim()));
    }
    let chol = theta_true.as_matrix().clone().cholesky().ok_or(Error::NotPd)?;
    Ok(chol.solve(theta_hat.as_matrix()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    pub frobenius: f64,
    pub one: f64,
    pub infinity: f64,
    pub spectral: f64,
}

impl MatrixNorms {
    pub fn of(a: &DMatrix<f64>) -> Self {
        let one = a
            .column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let infinity = a
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let spectral = a.singular_values().max();
        Self {
            frobenius: a.norm(),
            one,
            infinity,
            spectral,
        }
    }
}

/// Frobenius, one, infinity and spectral norms of `Theta^-1 Theta_hat - I`.
pub fn matrix_norms(theta_true: &PdMatrix, theta_hat: &PdMatrix) -> Result<MatrixNorms> {
    let t0 = standardized_product(theta_true, theta_hat)?;
    let p = t0.nrows();
    Ok(MatrixNorms::of(&(t0 - DMatrix::identity(p, p))))
}

/// Log determinant from the eigenvalues of `Theta0`.
pub fn log_det_index(theta0_eigenvalues: &[f64]) -> f64 {
    theta0_eigenvalues.iter().map(|l| l.ln()).sum()
}

/// Log of the spectral condition number of `theta0`; `+inf` when singular.
pub fn log_cond_index(theta0: &DMatrix<f64>) -> f64 {
    let sv = theta0.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max.ln() - min.ln()
    }
}

/// `||Theta^-1 Theta_hat - I||_F^2`.
pub fn quadratic_loss(theta_true: &PdMatrix, theta_hat: &PdMatrix) -> Result<f64> {
    Ok(matrix_norms(theta_true, theta_hat)?.frobenius.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportRecovery {
    pub mcc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl SupportRecovery {
    /// Matthews correlation from confusion counts; 0 when any marginal is empty.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (tpf, fpf, tnf, fnf) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
        let denom = (tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf);
        let mcc = if denom == 0.0 {
            0.0
        } else {
            (tpf * tnf - fpf * fnf) / denom.sqrt()
        };
        Self { mcc, tp, fp, tn, fn_ }
    }
}

/// Edge-recovery confusion counts over the upper off-diagonal triangle.
pub fn mcc(theta_true: &DMatrix<f64>, theta_hat: &DMatrix<f64>, edge_tol: f64) -> Result<SupportRecovery> {
    if theta_true.shape() != theta_hat.shape() {
        return Err(Error::LengthMismatch(theta_true.nrows(), theta_hat.nrows()));
    }
    let p = theta_true.nrows();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for i in 0..p {
        for j in (i + 1)..p {
            let truth = theta_true[(i, j)].abs() > edge_tol;
            let found = theta_hat[(i, j)].abs() > edge_tol;
            match (truth, found) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
    }
    Ok(SupportRecovery::from_counts(tp, fp, tn, fn_))
}

/// Every index for one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub entropy_loss: f64,
    pub prial: f64,
    pub norm_frobenius: f64,
    pub norm_one: f64,
    pub norm_infinity: f64,
    pub norm_spectral: f64,
    pub log_det: f64,
    pub log_cond: f64,
    pub quadratic_loss: f64,
    pub mcc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl MetricReport {
    /// Scores `theta_hat` against `theta_true`. `prial` is NaN without a baseline.
    pub fn evaluate(
        theta_true: &PdMatrix,
        theta_hat: &PdMatrix,
        baseline_loss: Option<f64>,
        edge_tol: f64,
    ) -> Result<Self> {
        let eig = relative_eigenvalues(theta_true, theta_hat)?;
        let entropy = eig.iter().map(|&l| l - l.ln()).sum::<f64>() - eig.len() as f64;
        let t0 = standardized_product(theta_true, theta_hat)?;
        let p = t0.nrows();
        let norms = MatrixNorms::of(&(&t0 - DMatrix::identity(p, p)));
        let support = mcc(theta_true.as_matrix(), theta_hat.as_matrix(), edge_tol)?;
        let prial = match baseline_loss {
            Some(b) => prial(b, entropy)?,
            None => f64::NAN,
        };
        Ok(Self {
            entropy_loss: entropy,
            prial,
            norm_frobenius: norms.frobenius,
            norm_one: norms.one,
            norm_infinity: norms.infinity,
            norm_spectral: norms.spectral,
            log_det: log_det_index(&eig),
            log_cond: log_cond_index(&t0),
            quadratic_loss: norms.frobenius.powi(2),
            mcc: support.mcc,
            tp: support.tp,
            fp: support.fp,
            tn: support.tn,
            fn_: support.fn_,
        })
    }
}
