//! Robust sparse precision matrix estimation under cellwise contamination.
//!
//! A pipeline estimates each pairwise covariance from a robust scale
//! estimator, repairs the assembled matrix to be positive definite, and
//! passes it to the graphical lasso:
//!
//! ```
//! use robprec::{DataMatrix, PipelineSpec, LambdaPolicy, PsdMethod, ScaleKind};
//!
//! let x = DataMatrix::from_row_major(4, 2, &[1.0, 2.0, 2.0, 1.0, 3.0, 5.0, 4.0, 3.0]).unwrap();
//! let spec = PipelineSpec::robust(ScaleKind::Qn, PsdMethod::npd(), LambdaPolicy::Fixed(0.1));
//! let est = spec.estimate(&x, 0.1).unwrap();
//! assert_eq!(est.dim(), 2);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod error;
pub mod experiment;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod paircov;
pub mod pipeline;
pub mod psd;
pub mod regularize;
pub mod scale;
pub mod simlab;

pub use error::{Error, Result};
pub use matrix::{DataMatrix, PdMatrix, SymMatrix};
pub use metrics::MetricReport;
pub use pipeline::{LambdaPolicy, PipelineSpec};
pub use psd::PsdMethod;
pub use regularize::{glasso, GlassoConfig, PrecisionEstimate};
pub use scale::{ScaleEstimator, ScaleKind};
pub use simlab::{Contamination, Family, Scenario};
