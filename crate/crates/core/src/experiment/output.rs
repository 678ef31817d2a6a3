//! CSV emission for experiment results, PRIAL summaries and support counts.
//!
//! Floats are written with the shortest round-trip representation, so a
//! rerun with the same seed produces byte-identical files.

use std::io::Write;

use super::{ExperimentConfig, ExperimentResults, ResultRow};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const RESULTS_HEADER: [&str; 37] = [
    "schema_version",
    "family",
    "p",
    "n",
    "contamination",
    "outlier_scale",
    "pipeline",
    "identity",
    "lambda",
    "replication",
    "seed",
    "baseline_entropy_loss",
    "entropy_loss",
    "prial",
    "norm_frobenius",
    "norm_one",
    "norm_infinity",
    "norm_spectral",
    "log_det",
    "log_cond",
    "quadratic_loss",
    "mcc",
    "tp",
    "fp",
    "tn",
    "fn",
    "cov_entropy_loss",
    "cov_norm_frobenius",
    "cov_norm_one",
    "cov_norm_infinity",
    "cov_norm_spectral",
    "cov_log_det",
    "cov_quadratic_loss",
    "outer_iters",
    "kkt_residual",
    "converged",
    "error",
];

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv write failed: {e}"))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record(row: &ResultRow) -> Vec<String> {
    let m = row.metrics.as_ref();
    let c = row.covariance.as_ref();
    vec![
        SCHEMA_VERSION.to_string(),
        row.family.to_string(),
        row.p.to_string(),
        row.n.to_string(),
        row.contamination.to_string(),
        row.outlier_scale.to_string(),
        row.pipeline.clone(),
        row.identity.clone(),
        row.lambda.to_string(),
        row.replication.to_string(),
        row.seed.to_string(),
        row.baseline_entropy_loss.to_string(),
        opt(m.map(|m| m.entropy_loss)),
        opt(m.map(|m| m.prial)),
        opt(m.map(|m| m.norm_frobenius)),
        opt(m.map(|m| m.norm_one)),
        opt(m.map(|m| m.norm_infinity)),
        opt(m.map(|m| m.norm_spectral)),
        opt(m.map(|m| m.log_det)),
        opt(m.map(|m| m.log_cond)),
        opt(m.map(|m| m.quadratic_loss)),
        opt(m.map(|m| m.mcc)),
        opt(m.map(|m| m.tp)),
        opt(m.map(|m| m.fp)),
        opt(m.map(|m| m.tn)),
        opt(m.map(|m| m.fn_)),
        opt(c.map(|c| c.entropy_loss)),
        opt(c.map(|c| c.norm_frobenius)),
        opt(c.map(|c| c.norm_one)),
        opt(c.map(|c| c.norm_infinity)),
        opt(c.map(|c| c.norm_spectral)),
        opt(c.map(|c| c.log_det)),
        opt(c.map(|c| c.quadratic_loss)),
        row.outer_iters.to_string(),
        row.kkt_residual.to_string(),
        row.converged.to_string(),
        row.error.clone().unwrap_or_default(),
    ]
}

pub fn write_results_csv<W: Write>(results: &ExperimentResults, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for row in results.rows() {
        w.write_record(record(row)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Averages over the successful replications of one (pipeline, level) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub pipeline: String,
    pub identity: String,
    pub contamination: f64,
    pub replications: usize,
    pub errors: usize,
    pub mean_lambda: f64,
    pub mean_entropy_loss: f64,
    pub sd_entropy_loss: f64,
    pub mean_baseline_loss: f64,
    /// PRIAL of the average loss against the average clean classical loss.
    pub prial: f64,
    pub mean_mcc: f64,
    pub mean_cov_entropy_loss: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn summarize(results: &ExperimentResults) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let rows: Vec<&ResultRow> = results.rows().collect();
    for group in rows.chunk_by(|a, b| (a.pipeline_index, a.level_index) == (b.pipeline_index, b.level_index)) {
        let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.metrics.is_some()).collect();
        let pick = |f: &dyn Fn(&ResultRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let losses = pick(&|r| r.metrics.unwrap().entropy_loss);
        let baselines = pick(&|r| r.baseline_entropy_loss);
        let (mean_loss, mean_base) = (mean(&losses), mean(&baselines));
        out.push(SummaryRow {
            pipeline: group[0].pipeline.clone(),
            identity: group[0].identity.clone(),
            contamination: group[0].contamination,
            replications: ok.len(),
            errors: group.len() - ok.len(),
            mean_lambda: mean(&pick(&|r| r.lambda)),
            mean_entropy_loss: mean_loss,
            sd_entropy_loss: sd(&losses),
            mean_baseline_loss: mean_base,
            prial: crate::metrics::prial(mean_base, mean_loss).unwrap_or(f64::NAN),
            mean_mcc: mean(&pick(&|r| r.metrics.unwrap().mcc)),
            mean_cov_entropy_loss: mean(&pick(&|r| r.covariance.unwrap().entropy_loss)),
        });
    }
    out
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "schema_version",
        "pipeline",
        "identity",
        "contamination",
        "replications",
        "errors",
        "mean_lambda",
        "mean_entropy_loss",
        "sd_entropy_loss",
        "mean_baseline_loss",
        "prial",
        "mean_mcc",
        "mean_cov_entropy_loss",
    ])
    .map_err(csv_err)?;
    for s in summary {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            s.pipeline.clone(),
            s.identity.clone(),
            s.contamination.to_string(),
            s.replications.to_string(),
            s.errors.to_string(),
            s.mean_lambda.to_string(),
            s.mean_entropy_loss.to_string(),
            s.sd_entropy_loss.to_string(),
            s.mean_baseline_loss.to_string(),
            s.prial.to_string(),
            s.mean_mcc.to_string(),
            s.mean_cov_entropy_loss.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// One line per matrix row: `pipeline, contamination, row, c0..c{p-1}`.
pub fn write_support_csv<W: Write>(cfg: &ExperimentConfig, results: &ExperimentResults, out: W) -> Result<()> {
    let p = results.theta_true.dim();
    let levels = cfg.sweep.len();
    let counts = results.support_counts(cfg.pipelines.len(), levels);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["schema_version".to_string(), "pipeline".into(), "contamination".into(), "row".into()];
    header.extend((0..p).map(|j| format!("c{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (pi, spec) in cfg.pipelines.iter().enumerate() {
        for (li, level) in cfg.sweep.iter().enumerate() {
            let slot = &counts[pi * levels + li];
            for i in 0..p {
                let mut rec = vec![SCHEMA_VERSION.to_string(), spec.name.clone(), level.to_string(), i.to_string()];
                rec.extend(slot[i * p..(i + 1) * p].iter().map(|c| c.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}
