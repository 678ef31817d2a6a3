//! Pairwise robust covariances via the Gnanadesikan-Kettenring identity
//!
//! `cov(X, Y) = (sX sY / 4) [s(X/sX + Y/sY)^2 - s(X/sX - Y/sY)^2]`

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, SymMatrix};
use crate::scale::{check_sample, ScaleEstimator};

/// Robust covariance of one pair of variables. Zero if either scale is zero.
pub fn gk_cov_pair<S: ScaleEstimator + ?Sized>(x: &[f64], y: &[f64], scale: &S) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    check_sample(x)?;
    check_sample(y)?;
    let sx = scale.scale(x)?;
    let sy = scale.scale(y)?;
    gk_with_scales(x, y, sx, sy, scale)
}

fn gk_with_scales<S: ScaleEstimator + ?Sized>(x: &[f64], y: &[f64], sx: f64, sy: f64, scale: &S) -> Result<f64> {
    if sx == 0.0 || sy == 0.0 {
        return Ok(0.0);
    }
    let (sum, diff): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a / sx + b / sy, a / sx - b / sy))
        .unzip();
    let s_plus = scale.scale(&sum)?;
    let s_minus = scale.scale(&diff)?;
    Ok(0.25 * sx * sy * (s_plus * s_plus - s_minus * s_minus))
}

/// Symmetric matrix of pairwise covariances; diagonal holds squared column scales.
pub fn pairwise_cov_matrix<S: ScaleEstimator + Sync + ?Sized>(x: &DataMatrix, scale: &S) -> Result<SymMatrix> {
    let cols = x.columns();
    let p = cols.len();
    let scales = cols
        .iter()
        .map(|c| scale.scale(c))
        .collect::<Result<Vec<f64>>>()?;

    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(j, k)| gk_with_scales(&cols[j], &cols[k], scales[j], scales[k], scale))
        .collect::<Result<Vec<f64>>>()?;

    let mut m = DMatrix::zeros(p, p);
    for (j, s) in scales.iter().enumerate() {
        m[(j, j)] = s * s;
    }
    for (&(j, k), v) in pairs.iter().zip(values) {
        m[(j, k)] = v;
        m[(k, j)] = v;
    }
    Ok(SymMatrix::from_trusted(m))
}
