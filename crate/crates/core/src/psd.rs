//! Positive-definiteness repair for pairwise covariance matrices.
//!
//! Two routes: clip the spectrum of the pairwise matrix at a small floor
//! (nearest PD matrix in Frobenius norm), or rebuild the estimate from robust
//! variances of principal directions (orthogonalized Gnanadesikan-Kettenring),
//! optionally followed by hard-rejection reweighting.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::matrix::{sample_covariance, sym_eigen, symmetrize, DataMatrix, PdMatrix, SymMatrix};
use crate::scale::{median_sorted, ScaleEstimator};

pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_OGK_ITERATIONS: usize = 2;
pub const DEFAULT_REWEIGHT_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PsdMethod {
    Npd { delta: f64 },
    Ogk { iterations: usize },
    OgkReweighted { iterations: usize, quantile: f64 },
}

impl PsdMethod {
    pub fn npd() -> Self {
        PsdMethod::Npd { delta: DEFAULT_DELTA }
    }

    pub fn ogk() -> Self {
        PsdMethod::Ogk {
            iterations: DEFAULT_OGK_ITERATIONS,
        }
    }

    pub fn ogk_reweighted() -> Self {
        PsdMethod::OgkReweighted {
            iterations: DEFAULT_OGK_ITERATIONS,
            quantile: DEFAULT_REWEIGHT_QUANTILE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PsdMethod::Npd { .. } => "npd",
            PsdMethod::Ogk { .. } => "ogk",
            PsdMethod::OgkReweighted { .. } => "ogkw",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "npd" => Ok(Self::npd()),
            "ogk" => Ok(Self::ogk()),
            "ogkw" | "ogk-reweighted" | "ogk_reweighted" => Ok(Self::ogk_reweighted()),
            other => Err(Error::InvalidInput(format!("unknown PSD repair method '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PsdMethod::Npd { delta } if !(delta > 0.0 && delta.is_finite()) => Err(
                Error::InvalidInput(format!("NPD floor must be positive, got {delta}")),
            ),
            PsdMethod::Ogk { iterations } | PsdMethod::OgkReweighted { iterations, .. }
                if !(1..=2).contains(&iterations) =>
            {
                Err(Error::InvalidInput(format!(
                    "OGK iterations must be 1 or 2, got {iterations}"
                )))
            }
            PsdMethod::OgkReweighted { quantile, .. } if !(quantile > 0.0 && quantile < 1.0) => {
                Err(Error::InvalidInput(format!(
                    "reweighting quantile must lie in (0, 1), got {quantile}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Clips the spectrum of `a` at `delta`. Inputs whose smallest eigenvalue is
/// already at least `delta` are returned unchanged.
///
/// The effective floor is `delta` plus a few ulps of the spectral radius so
/// that the reconstructed matrix still measures at least `delta`.
pub fn nearest_pd(a: &SymMatrix, delta: f64) -> Result<PdMatrix> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("NPD floor must be positive, got {delta}")));
    }
    let eig = a.eigen()?;
    let min = eig.eigenvalues.min();
    if min >= delta {
        return Ok(PdMatrix::from_parts(a.as_matrix().clone(), min));
    }
    let radius = eig.eigenvalues.amax();
    let floor = delta + 8.0 * f64::EPSILON * radius;
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let e = &eig.eigenvectors;
    let w = e * DMatrix::from_diagonal(&clipped) * e.transpose();
    Ok(PdMatrix::from_parts(symmetrize(w), floor))
}

/// Transformation `x = A z` and rotated data `Z` from one OGK pass.
struct OgkStep {
    z: DMatrix<f64>,
    transform: DMatrix<f64>,
}

fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

fn ogk_step<S: ScaleEstimator + ?Sized>(y: &DMatrix<f64>, scale: &S) -> Result<OgkStep> {
    let p = y.ncols();
    let mut d = Vec::with_capacity(p);
    let mut standardized = y.clone();
    for j in 0..p {
        let s = scale.scale(&column(y, j))?;
        if s == 0.0 {
            return Err(Error::DegenerateDirection(j));
        }
        standardized.column_mut(j).unscale_mut(s);
        d.push(s);
    }

    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(&standardized, j)).collect();
    let mut u = DMatrix::identity(p, p);
    for j in 0..p {
        for k in (j + 1)..p {
            let (sum, diff): (Vec<f64>, Vec<f64>) = cols[j]
                .iter()
                .zip(&cols[k])
                .map(|(a, b)| (a + b, a - b))
                .unzip();
            let sp = scale.scale(&sum)?;
            let sm = scale.scale(&diff)?;
            let v = 0.25 * (sp * sp - sm * sm);
            u[(j, k)] = v;
            u[(k, j)] = v;
        }
    }

    let eig = sym_eigen(&u)?;
    let e = eig.eigenvectors;
    let z = &standardized * &e;
    let transform = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * e;
    Ok(OgkStep { z, transform })
}

struct OgkFit {
    sigma: PdMatrix,
    z: DMatrix<f64>,
    gamma: Vec<f64>,
}

fn ogk_fit<S: ScaleEstimator + ?Sized>(x: &DataMatrix, scale: &S, iterations: usize) -> Result<OgkFit> {
    PsdMethod::Ogk { iterations }.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    if n <= p {
        log::warn!("OGK with n = {n} <= p = {p}; estimate may be unstable");
    }
    let mut z = x.as_matrix().clone();
    let mut transform = DMatrix::<f64>::identity(p, p);
    for _ in 0..iterations {
        let step = ogk_step(&z, scale)?;
        transform *= step.transform;
        z = step.z;
    }
    let mut gamma = Vec::with_capacity(p);
    for j in 0..p {
        let s = scale.scale(&column(&z, j))?;
        if s == 0.0 {
            return Err(Error::DegenerateDirection(j));
        }
        gamma.push(s * s);
    }
    let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gamma.clone()));
    let sigma = symmetrize(&transform * g * transform.transpose());
    let sigma = PdMatrix::new(sigma)?;
    Ok(OgkFit { sigma, z, gamma })
}

/// Orthogonalized Gnanadesikan-Kettenring covariance estimate.
pub fn ogk<S: ScaleEstimator + ?Sized>(x: &DataMatrix, scale: &S, iterations: usize) -> Result<PdMatrix> {
    Ok(ogk_fit(x, scale, iterations)?.sigma)
}

/// Rows kept by the reweighting step, as a boolean mask.
pub fn ogk_reweight_mask<S: ScaleEstimator + ?Sized>(
    x: &DataMatrix,
    scale: &S,
    iterations: usize,
    quantile: f64,
) -> Result<Vec<bool>> {
    PsdMethod::OgkReweighted { iterations, quantile }.validate()?;
    let fit = ogk_fit(x, scale, iterations)?;
    let (n, p) = (x.nrows(), x.ncols());

    // Mahalanobis distances in the rotated coordinates, centred at the
    // coordinatewise median.
    let centres: Vec<f64> = (0..p)
        .map(|j| {
            let mut c = column(&fit.z, j);
            c.sort_by(f64::total_cmp);
            median_sorted(&c)
        })
        .collect();
    let d2: Vec<f64> = (0..n)
        .map(|i| {
            (0..p)
                .map(|j| (fit.z[(i, j)] - centres[j]).powi(2) / fit.gamma[j])
                .sum()
        })
        .collect();

    let chi = ChiSquared::new(p as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut sorted = d2.clone();
    sorted.sort_by(f64::total_cmp);
    let cutoff = chi.inverse_cdf(quantile) * median_sorted(&sorted) / chi.inverse_cdf(0.5);
    Ok(d2.iter().map(|&d| d <= cutoff).collect())
}

/// Classical covariance of the rows retained after OGK-based screening.
pub fn ogk_reweighted<S: ScaleEstimator + ?Sized>(
    x: &DataMatrix,
    scale: &S,
    iterations: usize,
    quantile: f64,
) -> Result<PdMatrix> {
    let keep = ogk_reweight_mask(x, scale, iterations, quantile)?;
    let p = x.ncols();
    let rows: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect();
    if rows.len() < p + 1 {
        return Err(Error::TooFewSurvivors {
            survivors: rows.len(),
            required: p + 1,
        });
    }
    let retained = x.as_matrix().select_rows(&rows);
    PdMatrix::new(sample_covariance(&retained))
}

/// Applies `method` to produce a positive definite covariance estimate.
/// NPD works on the pairwise matrix; the OGK variants work on the data.
pub fn repair<S: ScaleEstimator + Sync + ?Sized>(x: &DataMatrix, scale: &S, method: PsdMethod) -> Result<PdMatrix> {
    method.validate()?;
    match method {
        PsdMethod::Npd { delta } => {
            let pairwise = crate::paircov::pairwise_cov_matrix(x, scale)?;
            nearest_pd(&pairwise, delta)
        }
        PsdMethod::Ogk { iterations } => ogk(x, scale, iterations),
        PsdMethod::OgkReweighted { iterations, quantile } => ogk_reweighted(x, scale, iterations, quantile),
    }
}
