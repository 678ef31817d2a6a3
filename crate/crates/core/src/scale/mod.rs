//! Robust univariate scale estimators, calibrated for consistency at the
//! standard Gaussian.
//!
//! | estimator    | definition                                             |
//! |--------------|--------------------------------------------------------|
//! | MAD          | median absolute deviation from the median              |
//! | IQR          | interquartile range                                    |
//! | Qn           | k-th order statistic of pairwise absolute differences  |
//! | tau          | tau-scale with a bisquare-weighted location            |
//! | Pn           | interquartile range of pairwise means                  |
//! | trimmed Pn   | Pn after dropping observations beyond `d` MADs         |
//!
//! Quantiles use linear interpolation between order statistics at position
//! `1 + (n - 1) q` so every estimator is reproducible bit for bit.

mod pairwise;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use pairwise::{order_stats, pair_count, PairOp};

/// `1 / Phi^-1(3/4)`.
pub const MAD_CONSTANT: f64 = 1.482_602_218_505_602;
/// `1 / (2 Phi^-1(3/4))`.
pub const IQR_CONSTANT: f64 = 0.741_301_109_252_801;
/// Rousseeuw and Croux asymptotic constant.
pub const QN_CONSTANT: f64 = 2.2219;
/// `sqrt(2) / (2 Phi^-1(3/4))`: pairwise means of N(0,1) draws have variance 1/2.
pub const PN_CONSTANT: f64 = 1.048_358_082_507_530_7;

pub const DEFAULT_TAU_C1: f64 = 4.5;
pub const DEFAULT_TAU_C2: f64 = 3.0;
pub const DEFAULT_TRIM_D: f64 = 3.0;

/// Anything that maps a univariate sample to a nonnegative dispersion.
pub trait ScaleEstimator {
    fn scale(&self, x: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScaleKind {
    Mad,
    Iqr,
    Qn,
    /// Qn times the small-sample bias factor of [`qn_small_sample_factor`].
    QnCorrected,
    Tau { c1: f64, c2: f64 },
    Pn,
    PnTrimmed { d: f64 },
}

impl ScaleKind {
    pub fn tau() -> Self {
        ScaleKind::Tau {
            c1: DEFAULT_TAU_C1,
            c2: DEFAULT_TAU_C2,
        }
    }

    pub fn pn_trimmed() -> Self {
        ScaleKind::PnTrimmed { d: DEFAULT_TRIM_D }
    }

    /// All kinds with default parameters.
    pub fn all() -> [ScaleKind; 7] {
        [
            ScaleKind::Mad,
            ScaleKind::Iqr,
            ScaleKind::Qn,
            ScaleKind::QnCorrected,
            ScaleKind::tau(),
            ScaleKind::Pn,
            ScaleKind::pn_trimmed(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScaleKind::Mad => "mad",
            ScaleKind::Iqr => "iqr",
            ScaleKind::Qn => "qn",
            ScaleKind::QnCorrected => "qn-corrected",
            ScaleKind::Tau { .. } => "tau",
            ScaleKind::Pn => "pn",
            ScaleKind::PnTrimmed { .. } => "pn-trimmed",
        }
    }

    /// Parses the short names used on the command line and in configs.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mad" => Ok(ScaleKind::Mad),
            "iqr" => Ok(ScaleKind::Iqr),
            "qn" => Ok(ScaleKind::Qn),
            "qn-corrected" | "qn_corrected" | "qnc" => Ok(ScaleKind::QnCorrected),
            "tau" => Ok(ScaleKind::tau()),
            "pn" => Ok(ScaleKind::Pn),
            "pn-trimmed" | "pn_trimmed" | "pnt" => Ok(ScaleKind::pn_trimmed()),
            other => Err(Error::InvalidInput(format!("unknown scale estimator '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScaleKind::Tau { c1, c2 } if !(c1 > c2 && c2 > 0.0) => Err(Error::InvalidInput(
                format!("tau constants need c1 > c2 > 0, got c1={c1}, c2={c2}"),
            )),
            ScaleKind::PnTrimmed { d } if !(d > 0.0) => Err(Error::InvalidInput(format!(
                "trimming parameter must be positive, got {d}"
            ))),
            _ => Ok(()),
        }
    }

    /// Analytic Gaussian-consistency multiplier.
    pub fn consistency_constant(&self) -> f64 {
        match *self {
            ScaleKind::Mad => MAD_CONSTANT,
            ScaleKind::Iqr => IQR_CONSTANT,
            ScaleKind::Qn | ScaleKind::QnCorrected => QN_CONSTANT,
            ScaleKind::Tau { c2, .. } => tau_constant(c2),
            ScaleKind::Pn | ScaleKind::PnTrimmed { .. } => PN_CONSTANT,
        }
    }

    /// Estimate without the consistency multiplier.
    pub fn raw(&self, x: &[f64]) -> Result<f64> {
        self.validate()?;
        check_sample(x)?;
        Ok(match *self {
            ScaleKind::Mad => mad_raw(x),
            ScaleKind::Iqr => iqr_raw(x),
            ScaleKind::Qn | ScaleKind::QnCorrected => qn_raw(x),
            ScaleKind::Tau { c1, c2 } => tau_raw(x, c1, c2),
            ScaleKind::Pn => pn_raw(x),
            ScaleKind::PnTrimmed { d } => pn_trimmed_raw(x, d),
        })
    }

    pub fn estimate(&self, x: &[f64]) -> Result<f64> {
        let raw = self.raw(x)?;
        let c = match self {
            ScaleKind::QnCorrected => QN_CONSTANT * qn_small_sample_factor(x.len()),
            _ => self.consistency_constant(),
        };
        Ok(c * raw)
    }
}

impl ScaleEstimator for ScaleKind {
    fn scale(&self, x: &[f64]) -> Result<f64> {
        self.estimate(x)
    }
}

impl std::fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-kind multiplicative constants making each estimator consistent for
/// sigma at the Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub mad: f64,
    pub iqr: f64,
    pub qn: f64,
    pub tau: f64,
    pub pn: f64,
    pub pn_trimmed: f64,
}

impl ConsistencyTable {
    pub fn analytic() -> Self {
        Self {
            mad: MAD_CONSTANT,
            iqr: IQR_CONSTANT,
            qn: QN_CONSTANT,
            tau: tau_constant(DEFAULT_TAU_C2),
            pn: PN_CONSTANT,
            pn_trimmed: PN_CONSTANT,
        }
    }

    pub fn get(&self, kind: ScaleKind) -> f64 {
        match kind {
            ScaleKind::Mad => self.mad,
            ScaleKind::Iqr => self.iqr,
            ScaleKind::Qn | ScaleKind::QnCorrected => self.qn,
            ScaleKind::Tau { .. } => self.tau,
            ScaleKind::Pn => self.pn,
            ScaleKind::PnTrimmed { .. } => self.pn_trimmed,
        }
    }

    pub fn set(&mut self, kind: ScaleKind, value: f64) {
        let slot = match kind {
            ScaleKind::Mad => &mut self.mad,
            ScaleKind::Iqr => &mut self.iqr,
            ScaleKind::Qn | ScaleKind::QnCorrected => &mut self.qn,
            ScaleKind::Tau { .. } => &mut self.tau,
            ScaleKind::Pn => &mut self.pn,
            ScaleKind::PnTrimmed { .. } => &mut self.pn_trimmed,
        };
        *slot = value;
    }
}

impl Default for ConsistencyTable {
    fn default() -> Self {
        Self::analytic()
    }
}

/// `E[min(Z^2, c^2)]` for standard normal `Z`.
fn truncated_second_moment(c: f64) -> f64 {
    let norm = Normal::standard();
    let inside = (2.0 * norm.cdf(c) - 1.0) - 2.0 * c * norm.pdf(c);
    let outside = c * c * 2.0 * norm.cdf(-c);
    inside + outside
}

/// Consistency constant of the tau-scale. The initial scale is the raw MAD,
/// about `0.6745 sigma` at the Gaussian, so the truncation point in units of
/// sigma is `c2 / MAD_CONSTANT`.
pub fn tau_constant(c2: f64) -> f64 {
    1.0 / truncated_second_moment(c2 / MAD_CONSTANT).sqrt()
}

pub(crate) fn check_sample(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::EmptyOrTooShort(x.len()));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    Ok(())
}

fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median of an ascending slice.
pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyOrTooShort(0));
    }
    Ok(median_sorted(&sorted_copy(x)))
}

/// Type-7 quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Type-7 quantile of the `n(n-1)/2` pairwise values.
fn pairwise_quantile(sorted: &[f64], op: PairOp, q: f64) -> f64 {
    let m = pair_count(sorted.len());
    let h = (m - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (a, b) = order_stats(sorted, op, lo);
    match b {
        Some(b) if frac > 0.0 => a + frac * (b - a),
        _ => a,
    }
}

fn mad_raw(x: &[f64]) -> f64 {
    let sorted = sorted_copy(x);
    let med = median_sorted(&sorted);
    let devs = sorted_copy(&x.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
    median_sorted(&devs)
}

fn iqr_raw(x: &[f64]) -> f64 {
    let sorted = sorted_copy(x);
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

/// Croux and Rousseeuw small-sample bias factor `d_n` for Qn: tabulated for
/// `n <= 9`, `n / (n + 1.4)` for odd and `n / (n + 3.8)` for even larger `n`.
pub fn qn_small_sample_factor(n: usize) -> f64 {
    const TABLE: [f64; 8] = [0.399, 0.994, 0.512, 0.844, 0.611, 0.857, 0.669, 0.872];
    let nf = n as f64;
    match n {
        0 | 1 => 1.0,
        2..=9 => TABLE[n - 2],
        _ if n % 2 == 1 => nf / (nf + 1.4),
        _ => nf / (nf + 3.8),
    }
}

/// Rank (1-based) of the Qn order statistic: `C(h, 2)` with `h = n/2 + 1`.
pub(crate) fn qn_rank(n: usize) -> usize {
    let h = n / 2 + 1;
    h * (h - 1) / 2
}

fn qn_raw(x: &[f64]) -> f64 {
    let sorted = sorted_copy(x);
    order_stats(&sorted, PairOp::AbsDiff, qn_rank(sorted.len()) - 1).0
}

fn tau_raw(x: &[f64], c1: f64, c2: f64) -> f64 {
    // Sums run over the sorted sample so the result is exactly permutation invariant.
    let sorted = sorted_copy(x);
    let med = median_sorted(&sorted);
    let s0 = mad_raw(x);
    if s0 == 0.0 {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &v in &sorted {
        let u = (v - med) / (c1 * s0);
        if u.abs() <= 1.0 {
            let w = (1.0 - u * u).powi(2);
            num += w * v;
            den += w;
        }
    }
    let loc = num / den;
    let c2sq = c2 * c2;
    let mean_rho = sorted
        .iter()
        .map(|&v| {
            let u = (v - loc) / s0;
            (u * u).min(c2sq)
        })
        .sum::<f64>()
        / x.len() as f64;
    s0 * mean_rho.sqrt()
}

fn pn_raw(x: &[f64]) -> f64 {
    let sorted = sorted_copy(x);
    pairwise_quantile(&sorted, PairOp::Mean, 0.75) - pairwise_quantile(&sorted, PairOp::Mean, 0.25)
}

fn pn_trimmed_raw(x: &[f64], d: f64) -> f64 {
    let sorted = sorted_copy(x);
    let med = median_sorted(&sorted);
    let cutoff = d * MAD_CONSTANT * mad_raw(x);
    let kept: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| (v - med).abs() <= cutoff)
        .collect();
    if kept.len() < 2 {
        return pn_raw(x);
    }
    pn_raw(&kept)
}

pub fn mad(x: &[f64]) -> Result<f64> {
    ScaleKind::Mad.estimate(x)
}

pub fn iqr(x: &[f64]) -> Result<f64> {
    ScaleKind::Iqr.estimate(x)
}

pub fn qn(x: &[f64]) -> Result<f64> {
    ScaleKind::Qn.estimate(x)
}

pub fn qn_corrected(x: &[f64]) -> Result<f64> {
    ScaleKind::QnCorrected.estimate(x)
}

pub fn tau_scale(x: &[f64]) -> Result<f64> {
    ScaleKind::tau().estimate(x)
}

pub fn pn(x: &[f64]) -> Result<f64> {
    ScaleKind::Pn.estimate(x)
}

pub fn pn_trimmed(x: &[f64], d: f64) -> Result<f64> {
    ScaleKind::PnTrimmed { d }.estimate(x)
}

/// Monte Carlo multiplier `c` with `c * mean(raw estimate) = 1` over `reps`
/// standard Gaussian samples of size `n_cal`.
pub fn calibrate_constant(kind: ScaleKind, n_cal: usize, reps: usize, seed: u64) -> Result<f64> {
    if n_cal < 1000 {
        return Err(Error::InvalidInput(format!(
            "calibration sample size must be at least 1000, got {n_cal}"
        )));
    }
    if reps < 100 {
        return Err(Error::InvalidInput(format!(
            "calibration needs at least 100 replications, got {reps}"
        )));
    }
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; n_cal];
    let mut total = 0.0;
    for _ in 0..reps {
        for v in sample.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        total += kind.raw(&sample)?;
    }
    Ok(reps as f64 / total)
}

/// Calibrates every kind in `kinds`, starting from the analytic table.
pub fn calibrate_table(kinds: &[ScaleKind], n_cal: usize, reps: usize, seed: u64) -> Result<ConsistencyTable> {
    let mut table = ConsistencyTable::analytic();
    for &kind in kinds {
        table.set(kind, calibrate_constant(kind, n_cal, reps, seed)?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn analytic_constants_match_normal_quantile() {
        let q = Normal::standard().inverse_cdf(0.75);
        assert!(close(MAD_CONSTANT, 1.0 / q, 1e-12));
        assert!(close(IQR_CONSTANT, 0.5 / q, 1e-12));
        assert!(close(PN_CONSTANT, std::f64::consts::SQRT_2 / (2.0 * q), 1e-12));
    }

    #[test]
    fn tau_constant_matches_truncated_second_moment() {
        // E[min(Z^2, 9)] = 0.9950073... by direct evaluation.
        assert!(close(truncated_second_moment(3.0), 0.995_007_3, 1e-7));
        // c = 3 * 0.67449 = 2.02347; E[min(Z^2, c^2)] = 0.92471539 by quadrature.
        assert!(close(tau_constant(3.0), 1.0 / 0.924_715_392_176_f64.sqrt(), 1e-9));
    }

    #[test]
    fn mad_hand_example() {
        assert!(close(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), MAD_CONSTANT, 1e-15));
        assert!(close(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 1.4826, 1e-4));
    }

    #[test]
    fn qn_hand_example() {
        // pairwise diffs 1 2 3 4 6 7; h = 3, k = 3 -> 3
        assert!(close(qn(&[1.0, 2.0, 4.0, 8.0]).unwrap(), 6.6657, 1e-12));
        assert_eq!(qn_rank(4), 3);
    }

    #[test]
    fn corrected_qn_hand_example() {
        // n = 4 uses the tabulated factor 0.512
        assert!(close(qn_corrected(&[1.0, 2.0, 4.0, 8.0]).unwrap(), 6.6657 * 0.512, 1e-12));
        assert!(close(qn_small_sample_factor(100), 100.0 / 103.8, 1e-15));
        assert!(close(qn_small_sample_factor(101), 101.0 / 102.4, 1e-15));
    }

    #[test]
    fn constant_samples_have_zero_scale() {
        let x = [5.0; 7];
        for kind in ScaleKind::all() {
            assert_eq!(kind.estimate(&x).unwrap(), 0.0, "{kind}");
        }
    }

    #[test]
    fn pn_of_two_points_is_zero() {
        assert_eq!(pn(&[0.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn pn_trimmed_drops_gross_value() {
        // median 0.05, raw MAD 0.05, cutoff 3 * 1.4826 * 0.05 = 0.222
        let x = [0.1, -0.15, 0.05, 0.0, 100.0];
        let expected = pn(&x[..4]).unwrap();
        assert_eq!(pn_trimmed(&x, 3.0).unwrap(), expected);
        assert!(pn(&x).unwrap() > expected);
    }

    #[test]
    fn pn_trimmed_flags_every_value_beyond_cutoff() {
        // |-0.2 - 0.05| = 0.25 also exceeds the 0.222 cutoff
        let x = [0.1, -0.2, 0.05, 0.0, 100.0];
        assert_eq!(pn_trimmed(&x, 3.0).unwrap(), pn(&[0.0, 0.05, 0.1]).unwrap());
    }

    #[test]
    fn pn_trimmed_equals_pn_without_flags() {
        let x = [0.3, -1.2, 0.8, 1.9, -0.4, 0.0, 0.7];
        assert_eq!(pn_trimmed(&x, 3.0).unwrap(), pn(&x).unwrap());
    }

    #[test]
    fn type7_quantile() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert!(close(quantile_sorted(&s, 0.25), 1.75, 1e-15));
        assert!(close(quantile_sorted(&s, 0.75), 3.25, 1e-15));
        assert!(close(iqr(&s).unwrap(), 1.5 * IQR_CONSTANT, 1e-15));
    }

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(matches!(qn(&[1.0]), Err(Error::EmptyOrTooShort(1))));
        assert!(matches!(mad(&[1.0, f64::INFINITY]), Err(Error::NonFinite(1))));
        assert!(ScaleKind::Tau { c1: 2.0, c2: 3.0 }.estimate(&[1.0, 2.0]).is_err());
        assert!(ScaleKind::PnTrimmed { d: 0.0 }.estimate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn calibration_validates_parameters() {
        assert!(calibrate_constant(ScaleKind::Mad, 999, 100, 1).is_err());
        assert!(calibrate_constant(ScaleKind::Mad, 1000, 99, 1).is_err());
    }

    #[test]
    fn names_round_trip() {
        for kind in ScaleKind::all() {
            assert_eq!(ScaleKind::from_name(kind.name()).unwrap(), kind);
        }
        assert!(ScaleKind::from_name("sd").is_err());
    }
}
