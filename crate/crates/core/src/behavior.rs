//! How the performance indices react to a known distortion of an
//! identity-truth sample covariance, on both the covariance and the
//! precision side.
//!
//! With `Sigma = Theta = I` every index reduces to a function of the
//! estimate itself, so the sweeps isolate the index behaviour from any
//! estimator.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, PdMatrix};
use crate::metrics::{MetricReport, DEFAULT_EDGE_TOL};
use crate::simlab::{derive_seed, sample_gaussian};

/// Real-valued indices of one matrix against the identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IndexSet {
    pub entropy_loss: f64,
    pub norm_frobenius: f64,
    pub norm_one: f64,
    pub norm_infinity: f64,
    pub norm_spectral: f64,
    pub log_det: f64,
    pub log_cond: f64,
    pub quadratic_loss: f64,
}

impl IndexSet {
    pub fn against_identity(m: &PdMatrix) -> Result<Self> {
        let id = PdMatrix::new(DMatrix::identity(m.dim(), m.dim()))?;
        let r = MetricReport::evaluate(&id, m, None, DEFAULT_EDGE_TOL)?;
        Ok(Self {
            entropy_loss: r.entropy_loss,
            norm_frobenius: r.norm_frobenius,
            norm_one: r.norm_one,
            norm_infinity: r.norm_infinity,
            norm_spectral: r.norm_spectral,
            log_det: r.log_det,
            log_cond: r.log_cond,
            quadratic_loss: r.quadratic_loss,
        })
    }

    fn mean(sets: &[IndexSet]) -> Self {
        let k = sets.len() as f64;
        let avg = |f: fn(&IndexSet) -> f64| sets.iter().map(f).sum::<f64>() / k;
        Self {
            entropy_loss: avg(|s| s.entropy_loss),
            norm_frobenius: avg(|s| s.norm_frobenius),
            norm_one: avg(|s| s.norm_one),
            norm_infinity: avg(|s| s.norm_infinity),
            norm_spectral: avg(|s| s.norm_spectral),
            log_det: avg(|s| s.log_det),
            log_cond: avg(|s| s.log_cond),
            quadratic_loss: avg(|s| s.quadratic_loss),
        }
    }
}

/// Indices of the covariance estimate and of its inverse at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub covariance: IndexSet,
    pub precision: IndexSet,
}

fn score(s: DMatrix<f64>, x: f64) -> Result<SweepPoint> {
    let cov = PdMatrix::new(s)?;
    let prec = cov.inverse()?;
    Ok(SweepPoint {
        x,
        covariance: IndexSet::against_identity(&cov)?,
        precision: IndexSet::against_identity(&prec)?,
    })
}

/// Overwrites `s_11` of one clean `N(0, I)` sample covariance with each value
/// in `values`.
pub fn inflate_s11(n: usize, p: usize, values: &[f64], seed: u64) -> Result<Vec<SweepPoint>> {
    let id = PdMatrix::new(DMatrix::identity(p, p))?;
    let s = sample_gaussian(&id, n, seed)?.classical_covariance().into_matrix();
    values
        .iter()
        .map(|&v| {
            let mut m = s.clone();
            m[(0, 0)] = v;
            score(m, v)
        })
        .collect()
}

/// Sets `count` randomly chosen cells in every column of an `N(0, I)` sample
/// to `value`, for `count = 0..=max_count`, averaging the classical
/// covariance indices over `reps` replications.
pub fn column_contamination_sweep(
    n: usize,
    p: usize,
    max_count: usize,
    value: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if max_count > n {
        return Err(Error::CountExceedsN { count: max_count, n });
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let id = PdMatrix::new(DMatrix::identity(p, p))?;
    (0..=max_count)
        .map(|count| {
            let points = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let stream = derive_seed(seed, r as u64, "behavior");
                    let mut x = sample_gaussian(&id, n, stream)?.into_matrix();
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, count as u64, "cells"));
                    for j in 0..p {
                        for i in sample_indices(&mut rng, n, count).into_iter() {
                            x[(i, j)] = value;
                        }
                    }
                    score(DataMatrix::new(x)?.classical_covariance().into_matrix(), count as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            let cov: Vec<IndexSet> = points.iter().map(|p| p.covariance).collect();
            let prec: Vec<IndexSet> = points.iter().map(|p| p.precision).collect();
            Ok(SweepPoint {
                x: count as f64,
                covariance: IndexSet::mean(&cov),
                precision: IndexSet::mean(&prec),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_log_det_is_negated() {
        let pts = inflate_s11(100, 5, &[1.0, 2.0, 5.0], 3).unwrap();
        for pt in &pts {
            assert!((pt.covariance.log_det + pt.precision.log_det).abs() < 1e-10);
            assert!((pt.covariance.log_cond - pt.precision.log_cond).abs() < 1e-8);
        }
    }

    #[test]
    fn sweep_starts_from_clean_data() {
        let pts = column_contamination_sweep(50, 4, 2, 10.0, 5, 1).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].covariance.entropy_loss < pts[2].covariance.entropy_loss);
    }
}
