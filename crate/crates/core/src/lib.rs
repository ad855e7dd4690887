//! Bayesian model averaging for linear regression under Zellner's g prior,
//! with a robust null-mixture rule for tuning the prior mean and scale.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! simulation and cross-validation harnesses work in `f64`.

// NaN must fail these comparisons, so `!(a < b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contamination;
pub mod cv;
pub mod error;
pub mod gprior;
pub mod linalg;
pub mod methods;
pub mod model_space;
pub mod null_mixture;
pub mod optim;
pub mod quadrature;
pub mod regression;
pub mod scalar;
pub mod special;
pub mod strategies;

pub use error::{BmaError, Result};
pub use gprior::{EnsemblePosterior, GPriorSetting, StrategyTag};
pub use linalg::Matrix;
pub use methods::{fit_method, LinearPredictor, Method, MethodFit, MethodOptions};
pub use model_space::{enumerate_models, ModelIndex, ModelPrior, ModelPriorKind};
pub use null_mixture::{NullMixFit, NullMixOptions};
pub use regression::{Dataset, OlsFit};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Matrix64 = Matrix<f64>;
pub type OlsFit64 = OlsFit<f64>;
pub type GPriorSetting64 = GPriorSetting<f64>;
pub type EnsemblePosterior64 = EnsemblePosterior<f64>;
pub type NullMixFit64 = NullMixFit<f64>;
pub type LinearPredictor64 = LinearPredictor<f64>;
