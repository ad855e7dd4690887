//! Closed-form quantities under Zellner's g prior with an optional non-zero
//! prior mean: marginal likelihoods, Bayes factors against the null model,
//! posterior means, and the model-averaged ensemble built from them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::BmaError;
use crate::linalg::Matrix;
use crate::model_space::{log_model_prior, ModelIndex, ModelPrior};
use crate::regression::{ols_fit, quad_distance, Dataset, OlsFit};
use crate::scalar::{log_sum_exp, logistic, Scalar};
use crate::special::ln_gamma;

/// Smallest and largest admissible `g`.
pub const G_MIN: f64 = 1e-8;
pub const G_MAX: f64 = 1e12;

pub fn clamp_g<T: Scalar>(g: T) -> T {
    g.max(T::lit(G_MIN)).min(T::lit(G_MAX))
}

/// Which treatment produced a hyperparameter setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyTag {
    FixedG,
    EbLocal,
    EbGlobal,
    HyperGn,
    NullMixture,
}

/// Per-model prior hyperparameters `{θ_γ, g_γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GPriorSetting<T> {
    pub model: ModelIndex,
    pub theta: Vec<T>,
    pub g: T,
    pub strategy: StrategyTag,
}

impl<T: Scalar> GPriorSetting<T> {
    pub fn zero_mean(model: ModelIndex, g: T, strategy: StrategyTag) -> Self {
        Self {
            model,
            theta: vec![T::zero(); model.size()],
            g,
            strategy,
        }
    }

    /// Shrinkage factor `ρ = g / (1 + g)`.
    pub fn rho(&self) -> T {
        self.g / (T::one() + self.g)
    }

    fn validate(&self, fit: &OlsFit<T>) -> Result<(), BmaError> {
        if self.model != fit.model {
            return Err(BmaError::InvalidInput(format!(
                "setting for model {} paired with fit of model {}",
                self.model, fit.model
            )));
        }
        if !(self.g > T::zero() && self.g.is_finite()) {
            return Err(BmaError::InvalidPrior(format!("g = {} must be positive and finite", self.g)));
        }
        if self.theta.len() != fit.k() || self.theta.iter().any(|t| !t.is_finite()) {
            return Err(BmaError::InvalidPrior(format!(
                "prior mean must be {} finite values",
                fit.k()
            )));
        }
        Ok(())
    }
}

/// The `g`-free part of every log marginal:
/// `log Γ((n-1)/2) - ((n-1)/2) log π - ½ log n - ((n-1)/2) log ||Y - Ȳ||²`.
/// This is exactly the log marginal of the null model.
pub fn log_normalizer<T: Scalar>(n: usize, sst: T) -> Result<T, BmaError> {
    if !(sst > T::zero()) {
        return Err(BmaError::InvalidInput("response has zero variance".into()));
    }
    let half = T::lit(0.5);
    let nm1 = T::from_usize_lossy(n - 1);
    Ok(ln_gamma(half * nm1) - half * nm1 * T::PI().ln() - half * T::from_usize_lossy(n).ln()
        - half * nm1 * sst.ln())
}

/// The bracketed term of the non-zero-mean marginal,
/// `1 + g(1-R²) + (||Y - X_γθ||² - ||Y||²)/||Y - Ȳ||²`, evaluated through the
/// equivalent non-negative form `((1+g)·SSE + ||X_γ(β̂ - θ)||²) / SST`.
pub fn marginal_bracket<T: Scalar>(fit: &OlsFit<T>, theta: &[T], g: T) -> T {
    let dist = if fit.k() == 0 {
        T::zero()
    } else {
        quad_distance(&fit.gram, &fit.beta_ls, theta)
    };
    ((T::one() + g) * fit.sse + dist) / fit.sst
}

/// Log Bayes factor of `M_γ` against the intercept-only model:
/// `((n-k-1)/2) log(1+g) - ((n-1)/2) log(bracket)`.
pub fn log_bayes_factor_vs_null<T: Scalar>(
    fit: &OlsFit<T>,
    setting: &GPriorSetting<T>,
) -> Result<T, BmaError> {
    if fit.k() == 0 {
        return Ok(T::zero());
    }
    setting.validate(fit)?;
    raw_log_bayes_factor(fit, &setting.theta, setting.g)
}

pub(crate) fn raw_log_bayes_factor<T: Scalar>(fit: &OlsFit<T>, theta: &[T], g: T) -> Result<T, BmaError> {
    if !(fit.sst > T::zero()) {
        return Err(BmaError::InvalidInput("response has zero variance".into()));
    }
    let bracket = marginal_bracket(fit, theta, g);
    if !(bracket > T::zero() && bracket.is_finite()) {
        return Err(BmaError::InvalidPrior(format!(
            "marginal likelihood bracket evaluated to {bracket}"
        )));
    }
    let half = T::lit(0.5);
    let n = fit.n;
    let k = fit.k();
    Ok(half * T::from_usize_lossy(n - k - 1) * g.ln_1p() - half * T::from_usize_lossy(n - 1) * bracket.ln())
}

/// Absolute log marginal likelihood of a model under its setting. The null
/// model ignores `setting` (pass any setting with `k = 0`).
pub fn log_marginal<T: Scalar>(fit: &OlsFit<T>, setting: &GPriorSetting<T>) -> Result<T, BmaError> {
    Ok(log_normalizer(fit.n, fit.sst)? + log_bayes_factor_vs_null(fit, setting)?)
}

/// Zero-mean marginal in terms of `R²` only.
pub fn zero_mean_log_marginal<T: Scalar>(fit: &OlsFit<T>, g: T) -> Result<T, BmaError> {
    let base = log_normalizer(fit.n, fit.sst)?;
    if fit.k() == 0 {
        return Ok(base);
    }
    Ok(base + zero_mean_log_bf(fit.n, fit.k(), fit.r_squared, g))
}

/// `((n-k-1)/2) log(1+g) - ((n-1)/2) log(1 + g(1-R²))`.
pub fn zero_mean_log_bf<T: Scalar>(n: usize, k: usize, r_squared: T, g: T) -> T {
    let half = T::lit(0.5);
    half * T::from_usize_lossy(n - k - 1) * g.ln_1p()
        - half * T::from_usize_lossy(n - 1) * (g * (T::one() - r_squared)).ln_1p()
}

/// Posterior mean `θ/(1+g) + g β̂/(1+g)`.
pub fn posterior_mean_beta<T: Scalar>(fit: &OlsFit<T>, setting: &GPriorSetting<T>) -> Vec<T> {
    shrink_toward(&fit.beta_ls, &setting.theta, setting.g)
}

pub(crate) fn shrink_toward<T: Scalar>(beta_ls: &[T], theta: &[T], g: T) -> Vec<T> {
    let w_prior = T::one() / (T::one() + g);
    let w_data = g / (T::one() + g);
    beta_ls
        .iter()
        .zip(theta)
        .map(|(&b, &t)| w_prior * t + w_data * b)
        .collect()
}

/// Per-model ingredients of a model-averaged fit.
#[derive(Debug, Clone)]
pub struct ModelComponent<T> {
    pub model: ModelIndex,
    pub log_marginal: T,
    /// Posterior mean of the model's `k` slopes.
    pub post_mean: Vec<T>,
}

/// Posterior over the enumerated model space and the model-averaged plane.
#[derive(Debug, Clone)]
pub struct EnsemblePosterior<T> {
    pub models: Vec<ModelIndex>,
    pub log_marginals: Vec<T>,
    pub post_probs: Vec<T>,
    pub inclusion_probs: Vec<T>,
    pub beta_bma: Vec<T>,
    pub ybar_train: T,
    pub col_means: Vec<T>,
}

/// Normalizes `log m(Y|M) + log π(M)` with log-sum-exp and averages the
/// posterior means.
pub fn assemble_ensemble<T: Scalar>(
    data: &Dataset<T>,
    components: Vec<ModelComponent<T>>,
    prior: &ModelPrior,
) -> Result<EnsemblePosterior<T>, BmaError> {
    let p = data.p();
    let log_post: Vec<T> = components
        .iter()
        .map(|c| c.log_marginal + T::lit(log_model_prior(&c.model, prior)))
        .collect();
    let norm = log_sum_exp(&log_post);
    if !norm.is_finite() {
        return Err(BmaError::DegenerateEnsemble);
    }
    let post_probs: Vec<T> = log_post.iter().map(|&l| (l - norm).exp()).collect();
    let mut inclusion_probs = vec![T::zero(); p];
    let mut beta_bma = vec![T::zero(); p];
    for (c, &w) in components.iter().zip(&post_probs) {
        for (slot, &j) in c.model.columns().iter().enumerate() {
            inclusion_probs[j] += w;
            beta_bma[j] += w * c.post_mean[slot];
        }
    }
    for v in &mut inclusion_probs {
        *v = v.min(T::one());
    }
    Ok(EnsemblePosterior {
        models: components.iter().map(|c| c.model).collect(),
        log_marginals: components.iter().map(|c| c.log_marginal).collect(),
        post_probs,
        inclusion_probs,
        beta_bma,
        ybar_train: data.y_mean(),
        col_means: data.col_means.clone(),
    })
}

/// Least-squares fits for every model in `models`.
pub fn fit_models<T: Scalar>(data: &Dataset<T>, models: &[ModelIndex]) -> Result<Vec<OlsFit<T>>, BmaError> {
    models.iter().map(|m| ols_fit(data, m)).collect()
}

/// Ensemble from per-model fixed settings. `fits` must include the null
/// model; every non-null fit needs a setting.
pub fn ensemble_from_fits<T: Scalar>(
    data: &Dataset<T>,
    fits: &[OlsFit<T>],
    settings: &[GPriorSetting<T>],
    prior: &ModelPrior,
) -> Result<EnsemblePosterior<T>, BmaError> {
    let by_model: HashMap<ModelIndex, &GPriorSetting<T>> =
        settings.iter().map(|s| (s.model, s)).collect();
    let normalizer = log_normalizer(data.n(), data.sst())?;
    let components = fits
        .iter()
        .map(|fit| {
            if fit.k() == 0 {
                return Ok(ModelComponent {
                    model: fit.model,
                    log_marginal: normalizer,
                    post_mean: Vec::new(),
                });
            }
            let setting = by_model.get(&fit.model).ok_or_else(|| {
                BmaError::InvalidInput(format!("no prior setting for model {}", fit.model))
            })?;
            Ok(ModelComponent {
                model: fit.model,
                log_marginal: normalizer + log_bayes_factor_vs_null(fit, setting)?,
                post_mean: posterior_mean_beta(fit, setting),
            })
        })
        .collect::<Result<Vec<_>, BmaError>>()?;
    assemble_ensemble(data, components, prior)
}

/// Ensemble over the null model plus the models named by `settings`.
pub fn ensemble_posterior<T: Scalar>(
    data: &Dataset<T>,
    settings: &[GPriorSetting<T>],
    prior: &ModelPrior,
) -> Result<EnsemblePosterior<T>, BmaError> {
    let mut models = vec![ModelIndex::null(data.p())];
    models.extend(settings.iter().map(|s| s.model).filter(|m| !m.is_null()));
    let fits = fit_models(data, &models)?;
    ensemble_from_fits(data, &fits, settings, prior)
}

/// Prediction plane `ȳ + (x - means)ᵀ β`.
pub fn predict_plane<T: Scalar>(
    ybar: T,
    col_means: &[T],
    beta: &[T],
    x_test_raw: &Matrix<T>,
) -> Result<Vec<T>, BmaError> {
    if x_test_raw.ncols() != col_means.len() {
        return Err(BmaError::InvalidInput(format!(
            "test design has {} columns, model expects {}",
            x_test_raw.ncols(),
            col_means.len()
        )));
    }
    Ok((0..x_test_raw.nrows())
        .map(|i| {
            x_test_raw
                .row(i)
                .iter()
                .zip(col_means)
                .zip(beta)
                .fold(ybar, |acc, ((&x, &m), &b)| acc + (x - m) * b)
        })
        .collect())
}

/// Model-averaged point predictions at raw test rows.
pub fn predict<T: Scalar>(post: &EnsemblePosterior<T>, x_test_raw: &Matrix<T>) -> Result<Vec<T>, BmaError> {
    predict_plane(post.ybar_train, &post.col_means, &post.beta_bma, x_test_raw)
}

/// Two-model (`M_γ` vs null, equal prior odds) weight `w(g, Y)` for the
/// zero-mean prior.
pub fn two_model_weight<T: Scalar>(fit: &OlsFit<T>, g: T) -> T {
    logistic(zero_mean_log_bf(fit.n, fit.k(), fit.r_squared, g))
}

/// Expected mean squared prediction error of the model-averaged line
/// `s β̂ x̃ + ȳ` for a single predictor when the training response carries a
/// single shift of `-k_shift` and the test responses follow `β x̃ + ε`:
///
/// `(1/n)[(β - sβ̂)² Σx̃² + 2 (K/n)(β - sβ̂) Σx̃] + K²/n² + σ²`.
#[derive(Debug, Clone)]
pub struct ShiftedLineMspe<T> {
    pub beta_true: T,
    pub k_shift: T,
    pub sigma2: T,
    pub x_test: Vec<T>,
}

impl<T: Scalar> ShiftedLineMspe<T> {
    pub fn evaluate(&self, shrinkage: T, beta_ls: T) -> T {
        let n = T::from_usize_lossy(self.x_test.len());
        let sx: T = self.x_test.iter().copied().sum();
        let sxx: T = self.x_test.iter().map(|&v| v * v).sum();
        let gap = self.beta_true - shrinkage * beta_ls;
        let two = T::lit(2.0);
        (gap * gap * sxx + two * (self.k_shift / n) * gap * sx) / n
            + self.k_shift * self.k_shift / (n * n)
            + self.sigma2
    }

    /// The shrinkage `s` at which the model-averaged line is parallel to the
    /// optimal line: `s β̂ = β + Σx̃ (K/n) / Σx̃²`.
    pub fn optimal_shrinkage(&self, beta_ls: T) -> T {
        let n = T::from_usize_lossy(self.x_test.len());
        let sx: T = self.x_test.iter().copied().sum();
        let sxx: T = self.x_test.iter().map(|&v| v * v).sum();
        (self.beta_true + sx * (self.k_shift / n) / sxx) / beta_ls
    }
}
