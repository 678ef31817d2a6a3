//! Covariance estimate -> PD repair -> graphical lasso.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, PdMatrix, SymMatrix};
use crate::psd::{repair, PsdMethod};
use crate::regularize::{default_lambda_grid, glasso, GlassoConfig, PrecisionEstimate};
use crate::scale::ScaleKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaPolicy {
    Fixed(f64),
    /// Tuned per replication against the known truth over this grid.
    Oracle(Vec<f64>),
}

impl LambdaPolicy {
    pub fn oracle_default() -> Self {
        LambdaPolicy::Oracle(default_lambda_grid())
    }
}

/// One way of turning data into a regularized precision matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    pub scale: ScaleKind,
    pub psd: PsdMethod,
    pub glasso: GlassoConfig,
    pub lambda: LambdaPolicy,
    /// Use the classical sample covariance instead of a robust estimate.
    pub classical: bool,
}

impl PipelineSpec {
    pub fn classical(lambda: LambdaPolicy) -> Self {
        Self {
            name: "classical".into(),
            scale: ScaleKind::Qn,
            psd: PsdMethod::npd(),
            glasso: GlassoConfig::default(),
            lambda,
            classical: true,
        }
    }

    pub fn robust(scale: ScaleKind, psd: PsdMethod, lambda: LambdaPolicy) -> Self {
        Self {
            name: format!("{}-{}", scale.name(), psd.name()),
            scale,
            psd,
            glasso: GlassoConfig::default(),
            lambda,
            classical: false,
        }
    }

    /// Short identity string: `scale/psd/glasso`.
    pub fn identity(&self) -> String {
        if self.classical {
            "classical/none/glasso".into()
        } else {
            format!("{}/{}/glasso", self.scale.name(), self.psd.name())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.classical {
            self.scale.validate()?;
            self.psd.validate()?;
        }
        match &self.lambda {
            LambdaPolicy::Fixed(l) if !(*l >= 0.0 && l.is_finite()) => {
                Err(Error::InvalidInput(format!("fixed lambda must be >= 0, got {l}")))
            }
            LambdaPolicy::Oracle(g) if g.is_empty() || g.iter().any(|&l| !(l > 0.0)) => Err(
                Error::InvalidInput("oracle lambda grid must be nonempty and positive".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Input covariance for the regularizer.
    pub fn covariance(&self, x: &DataMatrix) -> Result<SymMatrix> {
        if self.classical {
            Ok(x.classical_covariance())
        } else {
            Ok(repair(x, &self.scale, self.psd)?.to_sym())
        }
    }

    /// PD-repaired covariance; fails for the classical arm when singular.
    pub fn repaired_covariance(&self, x: &DataMatrix) -> Result<PdMatrix> {
        if self.classical {
            PdMatrix::new(x.classical_covariance().into_matrix())
        } else {
            repair(x, &self.scale, self.psd)
        }
    }

    /// Full pipeline with the given penalty.
    pub fn estimate(&self, x: &DataMatrix, lambda: f64) -> Result<PrecisionEstimate> {
        self.validate()?;
        if lambda <= 0.0 && x.nrows() <= x.ncols() {
            return Err(Error::InvalidInput(format!(
                "lambda must be > 0 when p >= n (n={}, p={})",
                x.nrows(),
                x.ncols()
            )));
        }
        let s = self.covariance(x)?;
        glasso(&s, &GlassoConfig { lambda, ..self.glasso })
    }
}
