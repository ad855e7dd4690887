//! Local null-mixture tuning: for each model, choose `(θ, g)` so that the
//! two-model (`M_γ` vs null) averaged coefficients match a trimmed robust
//! estimate, then average over the full model space.

use rayon::prelude::*;

use crate::error::BmaError;
use crate::gprior::{
    ensemble_from_fits, fit_models, raw_log_bayes_factor, shrink_toward, EnsemblePosterior,
    GPriorSetting, StrategyTag, G_MAX, G_MIN,
};
use crate::model_space::{ModelIndex, ModelPrior};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::regression::{ols_fit, robust_beta_from_fit, Dataset, OlsFit};
use crate::scalar::{logistic, Scalar};

pub const DEFAULT_TRIM: f64 = 0.10;

#[derive(Debug, Clone, Copy)]
pub struct NullMixOptions {
    pub trim_frac: f64,
    /// Prior odds of `M_γ` against the null inside the two-model mixture.
    pub prior_odds: f64,
    pub optimizer: NelderMeadOptions,
}

impl Default for NullMixOptions {
    fn default() -> Self {
        Self {
            trim_frac: DEFAULT_TRIM,
            prior_odds: 1.0,
            optimizer: NelderMeadOptions::default(),
        }
    }
}

/// Which start produced the reported optimum and how much work each start did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerTrace {
    pub best_restart: usize,
    pub evaluations: Vec<usize>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct NullMixFit<T> {
    pub model: ModelIndex,
    pub theta_hat: Vec<T>,
    pub g_hat: T,
    /// Achieved squared distance to the robust target.
    pub objective: T,
    pub beta_robust: Vec<T>,
    pub converged: bool,
    pub trace: OptimizerTrace,
}

impl<T: Scalar> NullMixFit<T> {
    pub fn rho(&self) -> T {
        self.g_hat / (T::one() + self.g_hat)
    }

    pub fn setting(&self) -> GPriorSetting<T> {
        GPriorSetting {
            model: self.model,
            theta: self.theta_hat.clone(),
            g: self.g_hat,
            strategy: StrategyTag::NullMixture,
        }
    }
}

/// Posterior probability of `M_γ` when it competes only with the null:
/// `(1 + e^(-log_bf) / odds)^-1`.
pub fn two_model_posterior<T: Scalar>(log_bf: T, prior_odds: T) -> T {
    logistic(log_bf + prior_odds.ln())
}

/// Two-model averaged coefficients `π*(M_γ|Y) · (θ + g β̂) / (1 + g)`.
pub fn local_bma_beta<T: Scalar>(fit: &OlsFit<T>, theta: &[T], g: T, prior_odds: T) -> Result<Vec<T>, BmaError> {
    if !(g > T::zero()) {
        return Err(BmaError::InvalidPrior(format!("g must be positive, got {g}")));
    }
    if theta.len() != fit.k() {
        return Err(BmaError::InvalidPrior(format!(
            "theta has length {}, model has {} slopes",
            theta.len(),
            fit.k()
        )));
    }
    let w = two_model_posterior(raw_log_bayes_factor(fit, theta, g)?, prior_odds);
    Ok(shrink_toward(&fit.beta_ls, theta, g).into_iter().map(|b| w * b).collect())
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `||local_bma_beta(θ, g) - target||²`, or `+∞` where the marginal is
/// undefined.
pub fn null_mix_objective<T: Scalar>(fit: &OlsFit<T>, theta: &[T], g: T, target: &[T], prior_odds: T) -> T {
    match local_bma_beta(fit, theta, g, prior_odds) {
        Ok(b) => squared_distance(&b, target),
        Err(_) => T::infinity(),
    }
}

/// Fits `(θ, g)` for one non-null model against its trimmed robust target.
pub fn fit_null_mixture_model<T: Scalar>(
    data: &Dataset<T>,
    model: &ModelIndex,
    opts: &NullMixOptions,
) -> Result<NullMixFit<T>, BmaError> {
    if model.is_null() {
        return Err(BmaError::InvalidInput("null-mixture tuning needs a non-null model".into()));
    }
    let fit = ols_fit(data, model)?;
    let target = robust_beta_from_fit(data, &fit, opts.trim_frac)?;
    fit_null_mixture_to_target(&fit, &target, opts)
}

/// Minimizes the squared distance to an explicit `target` over
/// `(θ, log g)` with three Nelder–Mead starts and a final polish.
pub fn fit_null_mixture_to_target<T: Scalar>(
    fit: &OlsFit<T>,
    target: &[T],
    opts: &NullMixOptions,
) -> Result<NullMixFit<T>, BmaError> {
    let k = fit.k();
    if k == 0 || target.len() != k {
        return Err(BmaError::InvalidInput(format!(
            "target of length {} for a model with {k} slopes",
            target.len()
        )));
    }
    if !(opts.prior_odds > 0.0) {
        return Err(BmaError::InvalidPrior("prior odds must be positive".into()));
    }
    let odds = T::lit(opts.prior_odds);
    let (lg_min, lg_max) = (T::lit(G_MIN.ln()), T::lit(G_MAX.ln()));
    let objective = |x: &[T]| {
        let lg = x[k].max(lg_min).min(lg_max);
        null_mix_objective(fit, &x[..k], lg.exp(), target, odds)
    };

    let ln_n = T::from_usize_lossy(fit.n).ln();
    let mut steps: Vec<T> = (0..k)
        .map(|j| {
            let scale = target[j].abs().max(fit.beta_ls[j].abs());
            if scale > T::zero() { T::lit(0.1) * scale } else { T::lit(0.1) }
        })
        .collect();
    steps.push(T::one());

    let mut starts: Vec<Vec<T>> = Vec::with_capacity(3);
    let with_lg = |theta: &[T], lg: T| theta.iter().copied().chain(std::iter::once(lg)).collect::<Vec<T>>();
    starts.push(with_lg(&vec![T::zero(); k], ln_n));
    starts.push(with_lg(target, ln_n));
    starts.push(with_lg(target, T::zero()));

    let mut trace = OptimizerTrace::default();
    let mut results = Vec::with_capacity(starts.len() + 1);
    for x0 in &starts {
        results.push(nelder_mead(objective, x0, &steps, &opts.optimizer));
    }
    let pick = |results: &[crate::optim::NelderMeadResult<T>]| {
        (0..results.len())
            .reduce(|a, b| if results[b].f < results[a].f { b } else { a })
            .expect("at least one start")
    };
    // Polish from the best point with a fresh, smaller simplex.
    let small: Vec<T> = steps.iter().map(|&s| s * T::lit(0.1)).collect();
    let polish = nelder_mead(objective, &results[pick(&results)].x, &small, &opts.optimizer);
    let polish_converged = polish.converged;
    results.push(polish);
    for r in &results {
        trace.evaluations.push(r.evaluations);
        trace.iterations.push(r.iterations);
    }
    trace.best_restart = pick(&results);
    let best = &results[trace.best_restart];
    let (x, f, converged) = (best.x.clone(), best.f, best.converged);
    if !f.is_finite() {
        return Err(BmaError::InvalidPrior(format!(
            "null-mixture objective is undefined everywhere visited for model {}",
            fit.model
        )));
    }
    let lg = x[k].max(lg_min).min(lg_max);
    Ok(NullMixFit {
        model: fit.model,
        theta_hat: x[..k].to_vec(),
        g_hat: lg.exp(),
        objective: f,
        beta_robust: target.to_vec(),
        converged: converged || polish_converged,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct NullMixEnsemble<T> {
    pub posterior: EnsemblePosterior<T>,
    /// One entry per non-null model, in enumeration order.
    pub fits: Vec<NullMixFit<T>>,
    /// Models whose optimizer hit its budget before converging.
    pub unconverged: Vec<ModelIndex>,
}

/// Tunes every non-null model and averages over the whole space with the
/// fitted hyperparameters and the original model prior.
pub fn fit_null_mixture_ensemble<T: Scalar>(
    data: &Dataset<T>,
    models: &[ModelIndex],
    prior: &ModelPrior,
    opts: &NullMixOptions,
) -> Result<NullMixEnsemble<T>, BmaError> {
    let mut all = models.to_vec();
    if !all.iter().any(ModelIndex::is_null) {
        all.insert(0, ModelIndex::null(data.p()));
    }
    let fits = fit_models(data, &all)?;
    let tuned: Vec<NullMixFit<T>> = fits
        .par_iter()
        .filter(|f| f.k() > 0)
        .map(|f| {
            let target = robust_beta_from_fit(data, f, opts.trim_frac)?;
            fit_null_mixture_to_target(f, &target, opts)
        })
        .collect::<Result<_, BmaError>>()?;
    let settings: Vec<GPriorSetting<T>> = tuned.iter().map(NullMixFit::setting).collect();
    let posterior = ensemble_from_fits(data, &fits, &settings, prior)?;
    let unconverged: Vec<ModelIndex> = tuned.iter().filter(|f| !f.converged).map(|f| f.model).collect();
    if !unconverged.is_empty() {
        log::warn!("null-mixture optimizer did not converge for {} model(s)", unconverged.len());
    }
    Ok(NullMixEnsemble { posterior, fits: tuned, unconverged })
}
