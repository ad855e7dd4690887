//! Named fitting methods that turn a training set into a prediction plane.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::BmaError;
use crate::gprior::{
    assemble_ensemble, ensemble_from_fits, fit_models, predict_plane, EnsemblePosterior,
    GPriorSetting,
};
use crate::linalg::Matrix;
use crate::model_space::{enumerate_models, ModelIndex, ModelPrior, ModelPriorKind};
use crate::null_mixture::{fit_null_mixture_ensemble, NullMixOptions, DEFAULT_TRIM};
use crate::regression::{robust_beta, Dataset};
use crate::scalar::Scalar;
use crate::strategies::{
    eb_global_g, eb_global_settings, eb_local_settings, fixed_g_settings, fixed_value_settings,
    hyper_gn_components, StrategyConfig, DEFAULT_HYPER_A,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedG,
    EbLocal,
    EbGlobal,
    HyperGn,
    NullMixture,
    /// Trimmed least squares on the full model.
    RobustFull,
    /// Intercept only: predicts the training mean everywhere.
    Mean,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::FixedG,
        Method::EbLocal,
        Method::EbGlobal,
        Method::HyperGn,
        Method::NullMixture,
        Method::RobustFull,
        Method::Mean,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::FixedG => "fixed-g",
            Method::EbLocal => "eb-local",
            Method::EbGlobal => "eb-global",
            Method::HyperGn => "hyper-gn",
            Method::NullMixture => "null-mixture",
            Method::RobustFull => "robust-full",
            Method::Mean => "mean",
        }
    }

    /// Whether the method averages over the model space.
    pub fn is_ensemble(&self) -> bool {
        !matches!(self, Method::RobustFull | Method::Mean)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = BmaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.tag() == s)
            .ok_or_else(|| BmaError::InvalidInput(format!("unknown method tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MethodOptions {
    pub model_prior: ModelPriorKind,
    pub k_max: Option<usize>,
    pub trim_frac: f64,
    pub hyper_a: f64,
    /// Overrides `g = n` for the fixed-g method.
    pub fixed_g: Option<f64>,
    pub null_mix: NullMixOptions,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            model_prior: ModelPriorKind::BetaBinomial,
            k_max: None,
            trim_frac: DEFAULT_TRIM,
            hyper_a: DEFAULT_HYPER_A,
            fixed_g: None,
            null_mix: NullMixOptions::default(),
        }
    }
}

/// `ŷ(x) = ȳ + (x - means)ᵀ β`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor<T> {
    pub ybar: T,
    pub col_means: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> LinearPredictor<T> {
    pub fn predict(&self, x_raw: &Matrix<T>) -> Result<Vec<T>, BmaError> {
        predict_plane(self.ybar, &self.col_means, &self.beta, x_raw)
    }
}

impl<T: Scalar> From<&EnsemblePosterior<T>> for LinearPredictor<T> {
    fn from(post: &EnsemblePosterior<T>) -> Self {
        Self {
            ybar: post.ybar_train,
            col_means: post.col_means.clone(),
            beta: post.beta_bma.clone(),
        }
    }
}

/// Per-model hyperparameters chosen by a method.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparamRow<T> {
    pub model: ModelIndex,
    pub theta: Vec<T>,
    pub g: T,
    /// Achieved squared distance for null-mixture fits.
    pub objective: Option<T>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MethodFit<T> {
    pub method: Method,
    pub predictor: LinearPredictor<T>,
    pub ensemble: Option<EnsemblePosterior<T>>,
    pub hyperparams: Vec<HyperparamRow<T>>,
    pub warnings: Vec<String>,
}

fn rows_from_settings<T: Scalar>(settings: &[GPriorSetting<T>]) -> Vec<HyperparamRow<T>> {
    settings
        .iter()
        .map(|s| HyperparamRow {
            model: s.model,
            theta: s.theta.clone(),
            g: s.g,
            objective: None,
            converged: true,
        })
        .collect()
}

/// Fits `method` to a training set.
pub fn fit_method<T: Scalar>(data: &Dataset<T>, method: Method, opts: &MethodOptions) -> Result<MethodFit<T>, BmaError> {
    let p = data.p();
    let mean_only = || LinearPredictor {
        ybar: data.y_mean(),
        col_means: data.col_means.clone(),
        beta: vec![T::zero(); p],
    };
    match method {
        Method::Mean => {
            return Ok(MethodFit {
                method,
                predictor: mean_only(),
                ensemble: None,
                hyperparams: Vec::new(),
                warnings: Vec::new(),
            })
        }
        Method::RobustFull => {
            let beta = robust_beta(data, &ModelIndex::full(p), opts.trim_frac)?;
            return Ok(MethodFit {
                method,
                predictor: LinearPredictor { beta, ..mean_only() },
                ensemble: None,
                hyperparams: Vec::new(),
                warnings: Vec::new(),
            });
        }
        _ => {}
    }

    let models = enumerate_models(p, opts.k_max)?;
    let prior = ModelPrior { kind: opts.model_prior, p, k_max: opts.k_max };
    let mut warnings = Vec::new();
    let (ensemble, hyperparams) = match method {
        Method::FixedG | Method::EbLocal | Method::EbGlobal => {
            let fits = fit_models(data, &models)?;
            let settings = match method {
                Method::FixedG => match opts.fixed_g {
                    Some(g) => {
                        StrategyConfig::FixedG { value: g }.validate()?;
                        fixed_value_settings(&models, T::lit(g))
                    }
                    None => fixed_g_settings(&models, data.n()),
                },
                Method::EbLocal => eb_local_settings(&fits)?,
                _ => {
                    let glob = eb_global_g(&fits, &prior)?;
                    if glob.multimodal {
                        warnings.push("global EB objective appears multimodal".to_string());
                    }
                    eb_global_settings(&fits, glob.g)
                }
            };
            let post = ensemble_from_fits(data, &fits, &settings, &prior)?;
            (post, rows_from_settings(&settings))
        }
        Method::HyperGn => {
            let fits = fit_models(data, &models)?;
            let components = hyper_gn_components(&fits, T::lit(opts.hyper_a))?;
            (assemble_ensemble(data, components, &prior)?, Vec::new())
        }
        Method::NullMixture => {
            let nm_opts = NullMixOptions { trim_frac: opts.trim_frac, ..opts.null_mix };
            let e = fit_null_mixture_ensemble(data, &models, &prior, &nm_opts)?;
            if !e.unconverged.is_empty() {
                warnings.push(format!(
                    "optimizer did not converge for models {}",
                    e.unconverged.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ")
                ));
            }
            let rows = e
                .fits
                .iter()
                .map(|f| HyperparamRow {
                    model: f.model,
                    theta: f.theta_hat.clone(),
                    g: f.g_hat,
                    objective: Some(f.objective),
                    converged: f.converged,
                })
                .collect();
            (e.posterior, rows)
        }
        Method::RobustFull | Method::Mean => unreachable!("handled above"),
    };
    Ok(MethodFit {
        method,
        predictor: LinearPredictor::from(&ensemble),
        ensemble: Some(ensemble),
        hyperparams,
        warnings,
    })
}
