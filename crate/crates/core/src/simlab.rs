//! Simulation laboratory: true precision matrices, Gaussian sampling and
//! cellwise contamination.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{spd_inverse, sym_eigen, DataMatrix, PdMatrix};

pub const DEFAULT_DF: f64 = 10.0;
pub const SCATTERED_EDGE_PROB: f64 = 0.1;
pub const SCATTERED_EDGE_VALUE: f64 = 0.5;
const SCATTERED_MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Banded,
    Scattered,
    Dense,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Banded => "banded",
            Family::Scattered => "scattered",
            Family::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contamination {
    /// Exactly this many cells per column.
    Fixed(usize),
    /// Each cell independently with this probability.
    Bernoulli(f64),
}

impl Contamination {
    pub fn level(&self) -> f64 {
        match *self {
            Contamination::Fixed(c) => c as f64,
            Contamination::Bernoulli(e) => e,
        }
    }
}

/// Full generative description of one simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub contamination: Contamination,
    pub outlier_scale: f64,
    pub df: f64,
    /// Only used by the scattered family; defaults to `p`.
    pub condition_target: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(family: Family, p: usize, n: usize) -> Self {
        Self {
            family,
            p,
            n,
            contamination: Contamination::Fixed(0),
            outlier_scale: 10.0,
            df: DEFAULT_DF,
            condition_target: None,
            seed: 0,
        }
    }

    pub fn condition(&self) -> f64 {
        self.condition_target.unwrap_or(self.p as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.n < 2 {
            return Err(Error::InvalidInput(format!(
                "scenario needs p >= 2 and n >= 2, got p={}, n={}",
                self.p, self.n
            )));
        }
        match self.contamination {
            Contamination::Fixed(c) if c > self.n => {
                return Err(Error::CountExceedsN { count: c, n: self.n })
            }
            Contamination::Bernoulli(e) if !(0.0..1.0).contains(&e) => {
                return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {e}")))
            }
            _ => {}
        }
        if !(self.outlier_scale > 0.0) || !(self.df > 0.0) {
            return Err(Error::InvalidInput("outlier scale and df must be positive".into()));
        }
        if self.family == Family::Scattered && !(self.condition() > 1.0) {
            return Err(Error::InvalidInput("condition target must exceed 1".into()));
        }
        Ok(())
    }

    /// True precision matrix; the scattered family draws it from `seed`.
    pub fn theta_true(&self, seed: u64) -> Result<PdMatrix> {
        match self.family {
            Family::Banded => gen_banded(self.p),
            Family::Scattered => gen_scattered(self.p, self.condition(), seed),
            Family::Dense => gen_dense(self.p),
        }
    }
}

/// Row-major n x p contamination indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    n: usize,
    p: usize,
    cells: Vec<bool>,
}

impl CellMask {
    pub fn clean(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            cells: vec![false; n * p],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.p + j]
    }

    fn set(&mut self, i: usize, j: usize) {
        self.cells[i * self.p + j] = true;
    }

    pub fn column_count(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, j)).count()
    }

    pub fn total(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn clean_rows(&self) -> usize {
        self.cells.chunks(self.p).filter(|r| r.iter().all(|c| !c)).count()
    }
}

#[derive(Debug, Clone)]
pub struct Contaminated {
    pub data: DataMatrix,
    pub mask: CellMask,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub mask: CellMask,
    pub theta_true: PdMatrix,
}

/// `theta_ij = 0.6^|i-j|`.
pub fn gen_banded(p: usize) -> Result<PdMatrix> {
    check_dim(p)?;
    let m = DMatrix::from_fn(p, p, |i, j| 0.6f64.powi(i.abs_diff(j) as i32));
    PdMatrix::new(m)
}

/// Unit diagonal, 0.5 off the diagonal.
pub fn gen_dense(p: usize) -> Result<PdMatrix> {
    check_dim(p)?;
    let m = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 });
    Ok(PdMatrix::from_parts(m, 0.5))
}

/// Random sparse `B + delta I` with `delta` chosen so the condition number is
/// `condition_target`, then scaled to unit diagonal.
pub fn gen_scattered(p: usize, condition_target: f64, seed: u64) -> Result<PdMatrix> {
    Ok(gen_scattered_unscaled(p, condition_target, seed)?.1)
}

/// Returns `(B + delta I, standardized)`.
pub(crate) fn gen_scattered_unscaled(p: usize, condition_target: f64, seed: u64) -> Result<(DMatrix<f64>, PdMatrix)> {
    check_dim(p)?;
    if !(condition_target > 1.0) {
        return Err(Error::InvalidInput(format!(
            "condition target must exceed 1, got {condition_target}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SCATTERED_MAX_RETRIES {
        let mut b = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            for j in (i + 1)..p {
                if rng.random_bool(SCATTERED_EDGE_PROB) {
                    b[(i, j)] = SCATTERED_EDGE_VALUE;
                    b[(j, i)] = SCATTERED_EDGE_VALUE;
                }
            }
        }
        let eig = sym_eigen(&b)?;
        let (lmin, lmax) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        let delta = (lmax - condition_target * lmin) / (condition_target - 1.0);
        if delta + lmin <= 0.0 || delta <= 0.0 {
            continue;
        }
        let mut shifted = b;
        for i in 0..p {
            shifted[(i, i)] += delta;
        }
        // Diagonal is constant, so standardizing is a scalar rescale.
        let theta = &shifted / delta;
        let min = (lmin + delta) / delta;
        return Ok((shifted, PdMatrix::from_parts(theta, min)));
    }
    Err(Error::RetriesExhausted(SCATTERED_MAX_RETRIES))
}

fn check_dim(p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidInput(format!("dimension must be >= 2, got {p}")));
    }
    Ok(())
}

/// `n` i.i.d. rows from `N(0, theta^-1)`.
pub fn sample_gaussian(theta_true: &PdMatrix, n: usize, seed: u64) -> Result<DataMatrix> {
    let sigma = spd_inverse(theta_true.as_matrix()).map_err(|_| Error::FactorizationFailure)?;
    let chol = sigma.cholesky().ok_or(Error::FactorizationFailure)?;
    let l = chol.l();
    let p = theta_true.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_row_iterator(n, p, (0..n * p).map(|_| StandardNormal.sample(&mut rng)));
    DataMatrix::new(z * l.transpose())
}

fn student_t(df: f64) -> Result<StudentT<f64>> {
    StudentT::new(df).map_err(|e| Error::InvalidInput(format!("invalid degrees of freedom {df}: {e}")))
}

/// Replaces exactly `count_per_col` cells in every column, at rows drawn
/// without replacement, by `outlier_scale * t_df` draws.
pub fn contaminate_fixed(
    x: &DataMatrix,
    count_per_col: usize,
    outlier_scale: f64,
    df: f64,
    seed: u64,
) -> Result<Contaminated> {
    let (n, p) = (x.nrows(), x.ncols());
    if count_per_col > n {
        return Err(Error::CountExceedsN { count: count_per_col, n });
    }
    let t = student_t(df)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = x.as_matrix().clone();
    let mut mask = CellMask::clean(n, p);
    for j in 0..p {
        for i in sample_indices(&mut rng, n, count_per_col).into_iter() {
            m[(i, j)] = outlier_scale * t.sample(&mut rng);
            mask.set(i, j);
        }
    }
    Ok(Contaminated {
        data: DataMatrix::new(m)?,
        mask,
    })
}

/// Replaces each cell independently with probability `epsilon`.
pub fn contaminate_bernoulli(
    x: &DataMatrix,
    epsilon: f64,
    outlier_scale: f64,
    df: f64,
    seed: u64,
) -> Result<Contaminated> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    let (n, p) = (x.nrows(), x.ncols());
    let t = student_t(df)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = x.as_matrix().clone();
    let mut mask = CellMask::clean(n, p);
    for i in 0..n {
        for j in 0..p {
            if rng.random_bool(epsilon) {
                m[(i, j)] = outlier_scale * t.sample(&mut rng);
                mask.set(i, j);
            }
        }
    }
    Ok(Contaminated {
        data: DataMatrix::new(m)?,
        mask,
    })
}

/// Probability that a row of `p` independently contaminated cells holds at
/// least one outlier: `1 - (1 - epsilon)^p`.
pub fn row_contamination_prob(epsilon: f64, p: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) || p == 0 {
        return Err(Error::InvalidInput(format!(
            "need epsilon in [0, 1] and p >= 1, got epsilon={epsilon}, p={p}"
        )));
    }
    Ok(1.0 - (1.0 - epsilon).powi(p as i32))
}

/// Applies the scenario's contamination to clean data.
pub fn contaminate(x: &DataMatrix, scenario: &Scenario, contamination: Contamination, seed: u64) -> Result<Contaminated> {
    match contamination {
        Contamination::Fixed(c) => contaminate_fixed(x, c, scenario.outlier_scale, scenario.df, seed),
        Contamination::Bernoulli(e) => contaminate_bernoulli(x, e, scenario.outlier_scale, scenario.df, seed),
    }
}

/// Stage tags for [`derive_seed`].
pub mod stage {
    pub const THETA: &str = "theta";
    pub const DATA: &str = "data";
    pub const TRAIN: &str = "train";
    pub const CONTAMINATE: &str = "contaminate";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for `(master, index, tag)`; stable across
/// platforms and releases.
pub fn derive_seed(master: u64, index: u64, tag: &str) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ index);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Draws the truth, a clean sample and the scenario's contamination, each
/// from its own derived stream.
pub fn generate(scenario: &Scenario) -> Result<LabeledDataset> {
    scenario.validate()?;
    let theta_true = scenario.theta_true(derive_seed(scenario.seed, 0, stage::THETA))?;
    let clean = sample_gaussian(&theta_true, scenario.n, derive_seed(scenario.seed, 0, stage::DATA))?;
    let c = contaminate(
        &clean,
        scenario,
        scenario.contamination,
        derive_seed(scenario.seed, 0, stage::CONTAMINATE),
    )?;
    Ok(LabeledDataset {
        data: c.data,
        mask: c.mask,
        theta_true,
    })
}
