//! l1-penalized Gaussian likelihood (graphical lasso) and oracle tuning of
//! the penalty.
//!
//! Minimizes `tr(S Theta) - log det Theta + lambda * sum_ij |theta_ij|` by
//! block coordinate descent over columns of `W ~ Theta^-1`, each column being
//! a lasso solved by cyclic coordinate descent.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{spd_inverse, sym_eigen, symmetrize, PdMatrix, SymMatrix};
use crate::metrics::entropy_loss;
use crate::simlab::{sample_gaussian, Scenario};

pub const DEFAULT_MAX_OUTER_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_INNER_TOL: f64 = 1e-7;
const MAX_INNER_SWEEPS: usize = 10_000;
/// Stationarity residual a solve must also reach before it counts as
/// converged; a tenth of the certificate level checked by callers.
pub const KKT_TARGET: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoConfig {
    pub lambda: f64,
    pub max_outer_iters: usize,
    /// Relative change of `W` between sweeps that counts as converged.
    pub tol: f64,
    pub inner_tol: f64,
    pub penalize_diagonal: bool,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_outer_iters: DEFAULT_MAX_OUTER_ITERS,
            tol: DEFAULT_TOL,
            inner_tol: DEFAULT_INNER_TOL,
            penalize_diagonal: true,
        }
    }
}

impl GlassoConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub theta: DMatrix<f64>,
    pub lambda_used: f64,
    pub outer_iters: usize,
    pub kkt_residual: f64,
    pub min_eigenvalue: f64,
    pub converged: bool,
}

impl PrecisionEstimate {
    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn theta_pd(&self) -> Result<PdMatrix> {
        if self.min_eigenvalue <= 0.0 {
            return Err(Error::NotPd);
        }
        Ok(PdMatrix::from_parts(self.theta.clone(), self.min_eigenvalue))
    }

    /// Off-diagonal upper-triangle entries with `|theta_ij| > tol`.
    pub fn edge_count(&self, tol: f64) -> usize {
        let p = self.dim();
        (0..p)
            .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.theta[(i, j)].abs() > tol)
            .count()
    }
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn validate_input(s: &SymMatrix, cfg: &GlassoConfig) -> Result<()> {
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", cfg.lambda)));
    }
    if cfg.max_outer_iters == 0 || !(cfg.tol > 0.0) || !(cfg.inner_tol > 0.0) {
        return Err(Error::InvalidInput("iteration limits and tolerances must be positive".into()));
    }
    let m = s.as_matrix();
    for i in 0..s.dim() {
        let d = m[(i, i)];
        if d < 0.0 {
            return Err(Error::InvalidInput(format!("negative diagonal entry {d} at {i}")));
        }
        if d + if cfg.penalize_diagonal { cfg.lambda } else { 0.0 } <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "zero diagonal at {i} requires a penalized diagonal with lambda > 0"
            )));
        }
    }
    if cfg.lambda == 0.0 && m.clone().cholesky().is_none() {
        return Err(Error::InvalidInput(
            "lambda must be > 0 when the input covariance is singular".into(),
        ));
    }
    Ok(())
}

/// Graphical lasso by block coordinate descent.
///
/// Returns [`Error::NotConverged`] carrying the last iterate when the outer
/// loop exhausts `max_outer_iters`.
pub fn glasso(s: &SymMatrix, cfg: &GlassoConfig) -> Result<PrecisionEstimate> {
    validate_input(s, cfg)?;
    let p = s.dim();
    let lambda = cfg.lambda;
    let sm = s.as_matrix();

    let mut w = sm.clone();
    if cfg.penalize_diagonal {
        for i in 0..p {
            w[(i, i)] += lambda;
        }
    }
    // Column j of `beta` holds the lasso coefficients for column j (entry j unused).
    let mut beta = DMatrix::<f64>::zeros(p, p);
    let mut v = vec![0.0; p];

    let mut converged = p == 1;
    let mut outer_iters = 0;
    while !converged && outer_iters < cfg.max_outer_iters {
        outer_iters += 1;
        let w_old = w.clone();
        for j in 0..p {
            // v = W11 * beta, indexed by the full variable index.
            v.iter_mut().for_each(|x| *x = 0.0);
            for k in (0..p).filter(|&k| k != j) {
                let b = beta[(k, j)];
                if b != 0.0 {
                    for (l, vl) in v.iter_mut().enumerate() {
                        *vl += w[(l, k)] * b;
                    }
                }
            }
            for _ in 0..MAX_INNER_SWEEPS {
                let mut max_step = 0.0_f64;
                for k in (0..p).filter(|&k| k != j) {
                    let wkk = w[(k, k)];
                    let old = beta[(k, j)];
                    let r = sm[(k, j)] - (v[k] - wkk * old);
                    let new = soft_threshold(r, lambda) / wkk;
                    let step = new - old;
                    if step != 0.0 {
                        beta[(k, j)] = new;
                        for (l, vl) in v.iter_mut().enumerate() {
                            *vl += step * w[(l, k)];
                        }
                        max_step = max_step.max(step.abs() * wkk);
                    }
                }
                if max_step < cfg.inner_tol {
                    break;
                }
            }
            for k in (0..p).filter(|&k| k != j) {
                w[(k, j)] = v[k];
                w[(j, k)] = v[k];
            }
        }
        let scale = w_old.amax();
        let change = (&w - &w_old).amax();
        if change <= cfg.tol * scale {
            let theta = theta_from(&w, &beta);
            converged = matches!(
                kkt_residual_matrix(sm, &theta, lambda, cfg.penalize_diagonal),
                Ok(r) if r <= KKT_TARGET
            );
        }
    }

    let theta = theta_from(&w, &beta);
    let min_eigenvalue = sym_eigen(&theta)?.eigenvalues.min();
    let kkt = if min_eigenvalue > 0.0 {
        kkt_residual_matrix(sm, &theta, lambda, cfg.penalize_diagonal)?
    } else {
        f64::INFINITY
    };
    let estimate = PrecisionEstimate {
        theta,
        lambda_used: lambda,
        outer_iters,
        kkt_residual: kkt,
        min_eigenvalue,
        converged,
    };
    if converged {
        Ok(estimate)
    } else {
        Err(Error::NotConverged {
            estimate: Box::new(estimate),
        })
    }
}

/// Precision matrix implied by `W` and the per-column lasso coefficients.
fn theta_from(w: &DMatrix<f64>, beta: &DMatrix<f64>) -> DMatrix<f64> {
    let p = w.nrows();
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let dot: f64 = (0..p).filter(|&k| k != j).map(|k| w[(k, j)] * beta[(k, j)]).sum();
        let tjj = 1.0 / (w[(j, j)] - dot);
        theta[(j, j)] = tjj;
        for k in (0..p).filter(|&k| k != j) {
            theta[(k, j)] = -beta[(k, j)] * tjj;
        }
    }
    symmetrize(theta)
}

/// Largest violation of the stationarity conditions of the penalized
/// likelihood at `theta`; zero at an exact solution.
pub fn kkt_residual(s: &SymMatrix, theta: &PdMatrix, lambda: f64, penalize_diagonal: bool) -> Result<f64> {
    if s.dim() != theta.dim() {
        return Err(Error::LengthMismatch(s.dim(), theta.dim()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    kkt_residual_matrix(s.as_matrix(), theta.as_matrix(), lambda, penalize_diagonal)
}

fn kkt_residual_matrix(s: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64, penalize_diagonal: bool) -> Result<f64> {
    let w = spd_inverse(theta)?;
    let p = s.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let g = w[(i, j)] - s[(i, j)];
            let t = theta[(i, j)];
            let lam = if i == j && !penalize_diagonal { 0.0 } else { lambda };
            let r = if t == 0.0 {
                (g.abs() - lam).max(0.0)
            } else {
                (g - lam * t.signum()).abs()
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// `points` logarithmically spaced values on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// 20 log-spaced points on [0.01, 1].
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(0.01, 1.0, 20)
}

/// Oracle penalty: the grid value minimizing entropy loss against the true
/// precision matrix, fitted on a clean training sample of the scenario's size
/// using the classical covariance. Ties go to the larger penalty.
pub fn tune_lambda(theta_true: &PdMatrix, scenario: &Scenario, grid: &[f64], seed: u64) -> Result<f64> {
    tune_lambda_with(theta_true, scenario.n, grid, seed, &GlassoConfig::default())
}

pub fn tune_lambda_with(
    theta_true: &PdMatrix,
    n: usize,
    grid: &[f64],
    seed: u64,
    base: &GlassoConfig,
) -> Result<f64> {
    let train = sample_gaussian(theta_true, n, seed)?;
    tune_lambda_on(theta_true, &train.classical_covariance(), grid, base)
}

/// Grid value minimizing entropy loss of the fit to `s` against the truth.
/// Ties go to the larger penalty.
pub fn tune_lambda_on(theta_true: &PdMatrix, s: &SymMatrix, grid: &[f64], base: &GlassoConfig) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) || grid[0] <= 0.0 {
        return Err(Error::InvalidInput("lambda grid must be positive and ascending".into()));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in grid {
        let cfg = GlassoConfig { lambda, ..*base };
        let est = match glasso(s, &cfg) {
            Ok(e) => e,
            Err(Error::NotConverged { estimate }) => *estimate,
            Err(e) => return Err(e),
        };
        let loss = entropy_loss(theta_true, &est.theta_pd()?)?;
        if loss <= best.0 {
            best = (loss, lambda);
        }
    }
    Ok(best.1)
}
