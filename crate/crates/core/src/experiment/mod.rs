//! Monte Carlo experiment runner.
//!
//! Each replication draws a clean sample and a separate clean training
//! sample. Oracle penalties minimize entropy loss on the training sample,
//! fitted either to each pipeline's own covariance estimate or to the
//! classical one. The tuned classical fit to the clean sample is the PRIAL
//! baseline. The clean sample is then contaminated at every sweep level and
//! every pipeline is scored. Replications are independent and use
//! index-derived seeds, so results do not depend on the worker count.

mod config;
mod output;

use rayon::prelude::*;

pub use config::{ContaminationMode, ExperimentConfig, TuningTarget};
pub use output::{
    summarize, write_results_csv, write_summary_csv, write_support_csv, SummaryRow, RESULTS_HEADER,
    SCHEMA_VERSION,
};

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, PdMatrix};
use crate::metrics::MetricReport;
use crate::pipeline::{LambdaPolicy, PipelineSpec};
use crate::regularize::{glasso, tune_lambda_on, GlassoConfig, PrecisionEstimate};
use crate::simlab::{contaminate, derive_seed, sample_gaussian, stage, Contamination, Scenario};

/// Covariance-side indices of `Sigma_hat = Theta_hat^-1` against `Sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceReport {
    pub entropy_loss: f64,
    pub norm_frobenius: f64,
    pub norm_one: f64,
    pub norm_infinity: f64,
    pub norm_spectral: f64,
    pub log_det: f64,
    pub quadratic_loss: f64,
}

impl CovarianceReport {
    fn evaluate(sigma_true: &PdMatrix, theta_hat: &PdMatrix) -> Result<Self> {
        let sigma_hat = theta_hat.inverse()?;
        let m = MetricReport::evaluate(sigma_true, &sigma_hat, None, crate::metrics::DEFAULT_EDGE_TOL)?;
        Ok(Self {
            entropy_loss: m.entropy_loss,
            norm_frobenius: m.norm_frobenius,
            norm_one: m.norm_one,
            norm_infinity: m.norm_infinity,
            norm_spectral: m.norm_spectral,
            log_det: m.log_det,
            quadratic_loss: m.quadratic_loss,
        })
    }
}

/// One (pipeline, contamination level, replication) record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub family: &'static str,
    pub p: usize,
    pub n: usize,
    pub contamination: f64,
    pub outlier_scale: f64,
    pub pipeline: String,
    pub identity: String,
    pub lambda: f64,
    pub replication: usize,
    pub seed: u64,
    pub baseline_entropy_loss: f64,
    pub metrics: Option<MetricReport>,
    pub covariance: Option<CovarianceReport>,
    pub outer_iters: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub error: Option<String>,
    pub(crate) pipeline_index: usize,
    pub(crate) level_index: usize,
}

/// Result of one pipeline run, with its estimated support when available.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub row: ResultRow,
    pub support: Option<Vec<bool>>,
}

/// Results of a whole experiment, sorted by pipeline, level, replication.
#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub outcomes: Vec<Outcome>,
    pub theta_true: PdMatrix,
}

impl ExperimentResults {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.outcomes.iter().map(|o| &o.row)
    }

    /// p x p nonzero counts (row-major) per (pipeline index, level index).
    pub fn support_counts(&self, n_pipelines: usize, n_levels: usize) -> Vec<Vec<usize>> {
        let p = self.theta_true.dim();
        let mut counts = vec![vec![0usize; p * p]; n_pipelines * n_levels];
        for o in &self.outcomes {
            if let Some(s) = &o.support {
                let slot = &mut counts[o.row.pipeline_index * n_levels + o.row.level_index];
                for (c, &nz) in slot.iter_mut().zip(s) {
                    *c += usize::from(nz);
                }
            }
        }
        counts
    }
}

fn estimate_or_last(res: Result<PrecisionEstimate>) -> Result<PrecisionEstimate> {
    match res {
        Ok(e) => Ok(e),
        Err(Error::NotConverged { estimate }) => Ok(*estimate),
        Err(e) => Err(e),
    }
}

/// Per-replication cache of tuned penalties and baseline losses.
struct ReplicationContext<'a> {
    cfg: &'a ExperimentConfig,
    theta_true: &'a PdMatrix,
    clean: DataMatrix,
    train_seed: u64,
    train: Option<DataMatrix>,
    tuned: Vec<(PipelineSpec, Result<f64>)>,
    baselines: Vec<(LambdaPolicy, GlassoConfig, Result<f64>)>,
}

fn same_tuning(a: &PipelineSpec, b: &PipelineSpec) -> bool {
    a.lambda == b.lambda
        && a.glasso == b.glasso
        && a.classical == b.classical
        && (a.classical || (a.scale == b.scale && a.psd == b.psd))
}

impl ReplicationContext<'_> {
    fn train(&mut self) -> Result<&DataMatrix> {
        if self.train.is_none() {
            self.train = Some(sample_gaussian(self.theta_true, self.cfg.scenario.n, self.train_seed)?);
        }
        Ok(self.train.as_ref().expect("just set"))
    }

    fn lambda_for(&mut self, spec: &PipelineSpec) -> Result<f64> {
        let LambdaPolicy::Oracle(grid) = &spec.lambda else {
            let LambdaPolicy::Fixed(l) = spec.lambda else { unreachable!() };
            return Ok(l);
        };
        let target = match self.cfg.tuning {
            TuningTarget::Pipeline => spec.clone(),
            TuningTarget::Classical => classical_like(spec),
        };
        if let Some((_, r)) = self.tuned.iter().find(|(t, _)| same_tuning(t, &target)) {
            return clone_result(r);
        }
        let theta_true = self.theta_true;
        let r = self
            .train()
            .and_then(|train| target.covariance(train))
            .and_then(|s| tune_lambda_on(theta_true, &s, grid, &target.glasso));
        let out = clone_result(&r);
        self.tuned.push((target, r));
        out
    }

    /// Entropy loss of the classical pipeline on the clean sample, with its
    /// penalty chosen by the same policy as `spec`.
    fn baseline_for(&mut self, spec: &PipelineSpec) -> Result<f64> {
        if let Some((_, _, r)) = self
            .baselines
            .iter()
            .find(|(l, c, _)| *l == spec.lambda && *c == spec.glasso)
        {
            return clone_result(r);
        }
        let classical = classical_like(spec);
        let r = self.lambda_for(&classical).and_then(|lambda| {
            let s = self.clean.classical_covariance();
            let est = estimate_or_last(glasso(&s, &GlassoConfig { lambda, ..spec.glasso }))?;
            crate::metrics::entropy_loss(self.theta_true, &est.theta_pd()?)
        });
        let out = clone_result(&r);
        self.baselines.push((spec.lambda.clone(), spec.glasso, r));
        out
    }
}

fn classical_like(spec: &PipelineSpec) -> PipelineSpec {
    let mut c = PipelineSpec::classical(spec.lambda.clone());
    c.glasso = spec.glasso;
    c
}

fn clone_result(r: &Result<f64>) -> Result<f64> {
    match r {
        Ok(v) => Ok(*v),
        Err(e) => Err(Error::InvalidInput(e.to_string())),
    }
}

fn run_replication(cfg: &ExperimentConfig, theta_true: &PdMatrix, sigma_true: &PdMatrix, levels: &[Contamination], rep: usize) -> Vec<Outcome> {
    let scenario = &cfg.scenario;
    let data_seed = derive_seed(cfg.master_seed, rep as u64, stage::DATA);
    let template = |pi: usize, li: usize, spec: &PipelineSpec| ResultRow {
        family: scenario.family.name(),
        p: scenario.p,
        n: scenario.n,
        contamination: levels[li].level(),
        outlier_scale: scenario.outlier_scale,
        pipeline: spec.name.clone(),
        identity: spec.identity(),
        lambda: f64::NAN,
        replication: rep,
        seed: data_seed,
        baseline_entropy_loss: f64::NAN,
        metrics: None,
        covariance: None,
        outer_iters: 0,
        kkt_residual: f64::NAN,
        converged: false,
        error: None,
        pipeline_index: pi,
        level_index: li,
    };
    let fail_all = |msg: String| -> Vec<Outcome> {
        let mut out = Vec::new();
        for (pi, spec) in cfg.pipelines.iter().enumerate() {
            for li in 0..levels.len() {
                let mut row = template(pi, li, spec);
                row.error = Some(msg.clone());
                out.push(Outcome { row, support: None });
            }
        }
        out
    };

    let clean = match sample_gaussian(theta_true, scenario.n, data_seed) {
        Ok(c) => c,
        Err(e) => return fail_all(e.to_string()),
    };
    let mut ctx = ReplicationContext {
        cfg,
        theta_true,
        clean,
        train_seed: derive_seed(cfg.master_seed, rep as u64, stage::TRAIN),
        train: None,
        tuned: Vec::new(),
        baselines: Vec::new(),
    };

    let contam_stream = derive_seed(cfg.master_seed, rep as u64, stage::CONTAMINATE);
    let mut out = Vec::with_capacity(cfg.pipelines.len() * levels.len());
    for (li, &level) in levels.iter().enumerate() {
        let data = contaminate(&ctx.clean, scenario, level, derive_seed(contam_stream, li as u64, "level"));
        for (pi, spec) in cfg.pipelines.iter().enumerate() {
            let mut row = template(pi, li, spec);
            let mut support = None;
            let result = (|| -> Result<()> {
                let data = data.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
                let lambda = ctx.lambda_for(spec)?;
                row.lambda = lambda;
                row.baseline_entropy_loss = ctx.baseline_for(spec)?;
                let est = estimate_or_last(spec.estimate(&data.data, lambda))?;
                row.outer_iters = est.outer_iters;
                row.kkt_residual = est.kkt_residual;
                row.converged = est.converged;
                let theta_hat = est.theta_pd()?;
                row.metrics = Some(MetricReport::evaluate(
                    theta_true,
                    &theta_hat,
                    Some(row.baseline_entropy_loss),
                    cfg.edge_tol,
                )?);
                row.covariance = Some(CovarianceReport::evaluate(sigma_true, &theta_hat)?);
                let p = est.dim();
                support = Some((0..p * p).map(|k| est.theta[(k / p, k % p)].abs() > cfg.edge_tol).collect());
                Ok(())
            })();
            if let Err(e) = result {
                row.error = Some(e.to_string());
            }
            out.push(Outcome { row, support });
        }
    }
    out
}

/// Runs every replication with `workers` threads (0 = all available).
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResults> {
    cfg.validate()?;
    let levels = cfg.levels()?;
    let scenario = Scenario {
        seed: cfg.master_seed,
        ..cfg.scenario.clone()
    };
    let theta_true = scenario.theta_true(derive_seed(cfg.master_seed, 0, stage::THETA))?;
    let sigma_true = theta_true.inverse()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let mut outcomes: Vec<Outcome> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .flat_map_iter(|rep| run_replication(cfg, &theta_true, &sigma_true, &levels, rep))
            .collect()
    });
    outcomes.sort_by_key(|o| (o.row.pipeline_index, o.row.level_index, o.row.replication));
    Ok(ExperimentResults { outcomes, theta_true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
[scenario]
family = "banded"
p = 4
n = 40

[experiment]
replications = 3
master_seed = 5
sweep = [0, 4]

[lambda_grid]
min = 0.05
max = 0.5
points = 4

[[pipeline]]
classical = true
lambda = "oracle"

[[pipeline]]
scale = "qn"
psd = "npd"
lambda = 0.1
"#,
        )
        .unwrap()
    }

    #[test]
    fn row_count_and_order() {
        let cfg = tiny();
        let res = run_experiment(&cfg, 2).unwrap();
        let rows: Vec<_> = res.rows().collect();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let keys: Vec<_> = rows.iter().map(|r| (r.pipeline_index, r.level_index, r.replication)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn clean_classical_row_matches_baseline() {
        let res = run_experiment(&tiny(), 1).unwrap();
        let row = res.rows().next().unwrap();
        assert_eq!(row.contamination, 0.0);
        let m = row.metrics.unwrap();
        assert!((m.entropy_loss - row.baseline_entropy_loss).abs() < 1e-12);
        assert!(m.prial.abs() < 1e-9);
    }
}
