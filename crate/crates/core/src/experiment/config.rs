//! TOML experiment configuration.
//!
//! ```toml
//! [scenario]
//! family = "banded"          # banded | scattered | dense
//! p = 15
//! n = 100
//! outlier_scale = 10.0       # or outlier_k = 50 for scale sqrt(k)
//! df = 10.0
//! contamination = "fixed"    # fixed (cells per column) | bernoulli (cell probability)
//! condition_target = 60.0    # scattered only, defaults to p
//!
//! [experiment]
//! replications = 50
//! master_seed = 20140101
//! sweep = [0, 5, 10]
//! edge_tol = 1e-8
//! tuning = "pipeline"        # oracle fits: pipeline (own estimate) | classical
//!
//! [lambda_grid]               # oracle grid, log-spaced
//! min = 0.01
//! max = 1.0
//! points = 20
//!
//! [[pipeline]]
//! name = "classical"
//! classical = true
//! lambda = "oracle"
//!
//! [[pipeline]]
//! name = "qn-npd"
//! scale = "qn"               # mad | iqr | qn | qn-corrected | tau | pn | pn-trimmed
//! psd = "npd"                # npd | ogk | ogkw
//! lambda = 0.2               # or "oracle"
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pipeline::{LambdaPolicy, PipelineSpec};
use crate::psd::PsdMethod;
use crate::regularize::{log_grid, GlassoConfig};
use crate::scale::ScaleKind;
use crate::simlab::{Contamination, Family, Scenario, DEFAULT_DF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationMode {
    Fixed,
    Bernoulli,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    experiment: RawExperiment,
    #[serde(default)]
    lambda_grid: Option<RawGrid>,
    #[serde(default)]
    pipeline: Vec<RawPipeline>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    family: Family,
    p: usize,
    n: usize,
    #[serde(default)]
    outlier_scale: Option<f64>,
    #[serde(default)]
    outlier_k: Option<f64>,
    #[serde(default)]
    df: Option<f64>,
    #[serde(default)]
    condition_target: Option<f64>,
    #[serde(default = "default_mode")]
    contamination: ContaminationMode,
}

/// Which training-sample covariance the oracle penalty is tuned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuningTarget {
    /// Each pipeline's own estimate of the clean training sample.
    #[default]
    Pipeline,
    /// The classical covariance of the training sample, shared by all pipelines.
    Classical,
}

fn default_mode() -> ContaminationMode {
    ContaminationMode::Fixed
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    replications: usize,
    master_seed: u64,
    sweep: Vec<f64>,
    #[serde(default)]
    edge_tol: Option<f64>,
    #[serde(default)]
    tuning: TuningTarget,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min: f64,
    max: f64,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawLambda {
    Value(f64),
    Policy(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    name: Option<String>,
    #[serde(default)]
    classical: bool,
    scale: Option<String>,
    psd: Option<String>,
    delta: Option<f64>,
    ogk_iterations: Option<usize>,
    reweight_quantile: Option<f64>,
    trim_d: Option<f64>,
    lambda: RawLambda,
    penalize_diagonal: Option<bool>,
    max_outer_iters: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Template scenario; its contamination is replaced by each sweep level.
    pub scenario: Scenario,
    pub mode: ContaminationMode,
    pub sweep: Vec<f64>,
    pub pipelines: Vec<PipelineSpec>,
    pub replications: usize,
    pub master_seed: u64,
    pub edge_tol: f64,
    pub tuning: TuningTarget,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let s = raw.scenario;
        let outlier_scale = match (s.outlier_scale, s.outlier_k) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "set only one of outlier_scale and outlier_k".into(),
                ))
            }
            (Some(v), None) => v,
            (None, Some(k)) => k.sqrt(),
            (None, None) => 10.0,
        };
        let scenario = Scenario {
            family: s.family,
            p: s.p,
            n: s.n,
            contamination: Contamination::Fixed(0),
            outlier_scale,
            df: s.df.unwrap_or(DEFAULT_DF),
            condition_target: s.condition_target,
            seed: raw.experiment.master_seed,
        };
        scenario.validate()?;

        let grid = match raw.lambda_grid {
            Some(g) => {
                if !(g.min > 0.0 && g.max >= g.min && g.points >= 1) {
                    return Err(Error::InvalidInput("lambda_grid needs 0 < min <= max and points >= 1".into()));
                }
                log_grid(g.min, g.max, g.points)
            }
            None => crate::regularize::default_lambda_grid(),
        };

        let pipelines = raw
            .pipeline
            .into_iter()
            .map(|p| pipeline_from_raw(p, &grid))
            .collect::<Result<Vec<_>>>()?;

        let cfg = Self {
            scenario,
            mode: s.contamination,
            sweep: raw.experiment.sweep,
            pipelines,
            replications: raw.experiment.replications,
            master_seed: raw.experiment.master_seed,
            edge_tol: raw.experiment.edge_tol.unwrap_or(crate::metrics::DEFAULT_EDGE_TOL),
            tuning: raw.experiment.tuning,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be >= 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(Error::InvalidInput("contamination sweep is empty".into()));
        }
        if self.pipelines.is_empty() {
            return Err(Error::InvalidInput("at least one [[pipeline]] is required".into()));
        }
        let mut names: Vec<&str> = self.pipelines.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("pipeline names must be unique".into()));
        }
        for level in self.levels()? {
            Scenario {
                contamination: level,
                ..self.scenario.clone()
            }
            .validate()?;
        }
        for p in &self.pipelines {
            p.validate()?;
            if let crate::pipeline::LambdaPolicy::Fixed(l) = p.lambda {
                if l <= 0.0 && self.scenario.p >= self.scenario.n {
                    return Err(Error::InvalidInput(format!(
                        "pipeline '{}' needs lambda > 0 because p >= n",
                        p.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> Result<Vec<Contamination>> {
        self.sweep
            .iter()
            .map(|&v| match self.mode {
                ContaminationMode::Fixed => {
                    if v < 0.0 || v.fract() != 0.0 {
                        Err(Error::InvalidInput(format!(
                            "fixed contamination counts must be nonnegative integers, got {v}"
                        )))
                    } else {
                        Ok(Contamination::Fixed(v as usize))
                    }
                }
                ContaminationMode::Bernoulli => Ok(Contamination::Bernoulli(v)),
            })
            .collect()
    }
}

fn pipeline_from_raw(raw: RawPipeline, grid: &[f64]) -> Result<PipelineSpec> {
    let lambda = match raw.lambda {
        RawLambda::Value(v) => LambdaPolicy::Fixed(v),
        RawLambda::Policy(s) if s.eq_ignore_ascii_case("oracle") => LambdaPolicy::Oracle(grid.to_vec()),
        RawLambda::Policy(s) => {
            return Err(Error::InvalidInput(format!(
                "lambda must be a number or \"oracle\", got \"{s}\""
            )))
        }
    };
    let mut glasso = GlassoConfig::default();
    if let Some(v) = raw.penalize_diagonal {
        glasso.penalize_diagonal = v;
    }
    if let Some(v) = raw.max_outer_iters {
        glasso.max_outer_iters = v;
    }
    if let Some(v) = raw.tol {
        glasso.tol = v;
    }

    let mut spec = if raw.classical {
        PipelineSpec::classical(lambda)
    } else {
        let mut scale = ScaleKind::from_name(raw.scale.as_deref().unwrap_or("qn"))?;
        if let (ScaleKind::PnTrimmed { d }, Some(v)) = (&mut scale, raw.trim_d) {
            *d = v;
        }
        let mut psd = PsdMethod::from_name(raw.psd.as_deref().unwrap_or("npd"))?;
        match &mut psd {
            PsdMethod::Npd { delta } => {
                if let Some(v) = raw.delta {
                    *delta = v;
                }
            }
            PsdMethod::Ogk { iterations } => {
                if let Some(v) = raw.ogk_iterations {
                    *iterations = v;
                }
            }
            PsdMethod::OgkReweighted { iterations, quantile } => {
                if let Some(v) = raw.ogk_iterations {
                    *iterations = v;
                }
                if let Some(v) = raw.reweight_quantile {
                    *quantile = v;
                }
            }
        }
        PipelineSpec::robust(scale, psd, lambda)
    };
    spec.glasso = glasso;
    if let Some(name) = raw.name {
        spec.name = name;
    }
    spec.validate()?;
    Ok(spec)
}
