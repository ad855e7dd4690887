//! Baseline treatments of `g`: fixed unit-information, local and global
//! empirical Bayes, and the hyper-g/n mixture.

use serde::{Deserialize, Serialize};

use crate::error::BmaError;
use crate::gprior::{
    clamp_g, log_normalizer, zero_mean_log_bf, GPriorSetting, ModelComponent, StrategyTag,
};
use crate::model_space::{log_model_prior, ModelIndex, ModelPrior};
use crate::optim::golden_section_max;
use crate::quadrature::{integrate, QuadOptions};
use crate::regression::OlsFit;
use crate::scalar::{log_sum_exp, Scalar};

/// Default hyper-g/n shape.
pub const DEFAULT_HYPER_A: f64 = 3.0;

/// Search bracket for the global empirical Bayes `log g`.
pub const EB_GLOBAL_LOG_G_RANGE: (f64, f64) = (-10.0, 25.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyConfig {
    FixedG { value: f64 },
    EbLocal,
    EbGlobal,
    HyperGn { a: f64 },
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), BmaError> {
        match *self {
            Self::FixedG { value } if !(value > 0.0 && value.is_finite()) => {
                Err(BmaError::InvalidInput(format!("fixed g must be positive, got {value}")))
            }
            Self::HyperGn { a } if !(a > 2.0) => {
                Err(BmaError::InvalidInput(format!("hyper-g/n requires a > 2, got {a}")))
            }
            _ => Ok(()),
        }
    }
}

/// Unit-information settings: `θ = 0`, `g = n` for every non-null model.
pub fn fixed_g_settings<T: Scalar>(models: &[ModelIndex], n: usize) -> Vec<GPriorSetting<T>> {
    fixed_value_settings(models, T::from_usize_lossy(n))
}

pub fn fixed_value_settings<T: Scalar>(models: &[ModelIndex], g: T) -> Vec<GPriorSetting<T>> {
    models
        .iter()
        .filter(|m| !m.is_null())
        .map(|m| GPriorSetting::zero_mean(*m, g, StrategyTag::FixedG))
        .collect()
}

/// Unclamped maximizer of the zero-mean marginal over `g ≥ 0`:
/// `max{R²(n-1-k) / ((1-R²)k) - 1, 0}`.
pub fn eb_local_g_unclamped<T: Scalar>(fit: &OlsFit<T>) -> Result<T, BmaError> {
    let k = fit.k();
    if k == 0 {
        return Err(BmaError::InvalidInput("local EB needs at least one predictor".into()));
    }
    let r2 = fit.r_squared;
    if r2 >= T::one() {
        return Err(BmaError::UnboundedMarginal);
    }
    let f = r2 * T::from_usize_lossy(fit.n - 1 - k) / ((T::one() - r2) * T::from_usize_lossy(k));
    Ok((f - T::one()).max(T::zero()))
}

/// Local empirical Bayes `g`, clamped into `[1e-8, 1e12]`.
pub fn eb_local_g<T: Scalar>(fit: &OlsFit<T>) -> Result<T, BmaError> {
    Ok(clamp_g(eb_local_g_unclamped(fit)?))
}

pub fn eb_local_settings<T: Scalar>(fits: &[OlsFit<T>]) -> Result<Vec<GPriorSetting<T>>, BmaError> {
    fits.iter()
        .filter(|f| f.k() > 0)
        .map(|f| Ok(GPriorSetting::zero_mean(f.model, eb_local_g(f)?, StrategyTag::EbLocal)))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct EbGlobalFit<T> {
    pub g: T,
    pub log_objective: T,
    /// Set when independent searches over sub-brackets found distinct
    /// interior maxima.
    pub multimodal: bool,
}

/// `log Σ_γ m(Y | M_γ, g) π(M_γ)` for a shared zero-mean `g`, up to the
/// common normalizer.
pub fn eb_global_log_objective<T: Scalar>(fits: &[OlsFit<T>], prior: &ModelPrior, g: T) -> T {
    let terms: Vec<T> = fits
        .iter()
        .map(|f| {
            let lbf = if f.k() == 0 {
                T::zero()
            } else {
                zero_mean_log_bf(f.n, f.k(), f.r_squared, g)
            };
            lbf + T::lit(log_model_prior(&f.model, prior))
        })
        .collect();
    log_sum_exp(&terms)
}

/// Global empirical Bayes: one `g` maximizing the model-averaged marginal,
/// found by golden-section search in `log g`.
pub fn eb_global_g<T: Scalar>(fits: &[OlsFit<T>], prior: &ModelPrior) -> Result<EbGlobalFit<T>, BmaError> {
    if fits.iter().any(|f| f.k() > 0 && f.r_squared >= T::one()) {
        return Err(BmaError::UnboundedMarginal);
    }
    let (lo, hi) = (T::lit(EB_GLOBAL_LOG_G_RANGE.0), T::lit(EB_GLOBAL_LOG_G_RANGE.1));
    let tol = T::lit(1e-6);
    let objective = |lg: T| eb_global_log_objective(fits, prior, lg.exp());

    const PIECES: usize = 3;
    let width = (hi - lo) / T::from_usize_lossy(PIECES);
    let mut best = (lo, objective(lo));
    let mut interior = Vec::new();
    for i in 0..PIECES {
        let a = lo + width * T::from_usize_lossy(i);
        let b = if i + 1 == PIECES { hi } else { a + width };
        let (x, fx) = golden_section_max(objective, a, b, tol);
        if x - a > tol * T::lit(10.0) && b - x > tol * T::lit(10.0) {
            interior.push(x);
        }
        if fx > best.1 {
            best = (x, fx);
        }
    }
    let multimodal = interior
        .iter()
        .any(|&x| interior.iter().any(|&y| (x - y).abs() > T::lit(1e-3)));
    if multimodal {
        log::warn!("global EB objective appears multimodal; using the best of the searched maxima");
    }
    Ok(EbGlobalFit {
        g: clamp_g(best.0.exp()),
        log_objective: best.1,
        multimodal,
    })
}

pub fn eb_global_settings<T: Scalar>(fits: &[OlsFit<T>], g: T) -> Vec<GPriorSetting<T>> {
    fits.iter()
        .filter(|f| f.k() > 0)
        .map(|f| GPriorSetting::zero_mean(f.model, g, StrategyTag::EbGlobal))
        .collect()
}

/// Hyper-g/n prior density `(a-2)/(2n) · (1 + g/n)^(-a/2)`.
pub fn hyper_gn_density<T: Scalar>(g: T, n: usize, a: T) -> T {
    let nt = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    (a - two) / (two * nt) * (T::one() + g / nt).powf(-a / two)
}

#[derive(Debug, Clone, Copy)]
pub struct HyperGnQuantities<T> {
    pub log_marginal: T,
    /// `E[g/(1+g) | Y, M_γ]`.
    pub expected_shrinkage: T,
}

/// Maps `s ∈ (0, 1]` to `g = n(1 - s²)/s²`. With `u = g/(n+g)`, `s = √(1-u)`;
/// the prior mass element becomes `(a-2) s^(a-3) ds`, which is bounded for
/// `a ≥ 3`.
fn g_of_s<T: Scalar>(s: T, n: T) -> T {
    n * (T::one() - s * s) / (s * s)
}

/// Marginal likelihood and posterior expected shrinkage with `g` integrated
/// against the hyper-g/n prior.
pub fn hyper_gn_quantities<T: Scalar>(fit: &OlsFit<T>, a: T) -> Result<HyperGnQuantities<T>, BmaError> {
    if !(a > T::lit(2.0)) {
        return Err(BmaError::InvalidInput("hyper-g/n requires a > 2".into()));
    }
    let normalizer = log_normalizer(fit.n, fit.sst)?;
    let k = fit.k();
    if k == 0 {
        return Ok(HyperGnQuantities { log_marginal: normalizer, expected_shrinkage: T::zero() });
    }
    if fit.r_squared >= T::one() {
        return Err(BmaError::UnboundedMarginal);
    }
    let n = fit.n;
    let nt = T::from_usize_lossy(n);
    let r2 = fit.r_squared;
    let log_bf = |g: T| zero_mean_log_bf(n, k, r2, g);
    let peak = log_bf(eb_local_g_unclamped(fit)?);
    let a_minus_2 = a - T::lit(2.0);
    let a_minus_3 = a - T::lit(3.0);
    let weight = |s: T| {
        let g = g_of_s(s, nt);
        if !g.is_finite() {
            return T::zero();
        }
        (log_bf(g) - peak).exp() * a_minus_2 * s.powf(a_minus_3)
    };
    let opts = QuadOptions::for_scalar::<T>();
    let mass = integrate(weight, T::zero(), T::one(), &opts)?;
    let first = integrate(
        |s: T| {
            let g = g_of_s(s, nt);
            if !g.is_finite() {
                return T::zero();
            }
            weight(s) * g / (T::one() + g)
        },
        T::zero(),
        T::one(),
        &opts,
    )?;
    if !(mass.value > T::zero()) {
        return Err(BmaError::Integration("hyper-g/n marginal integrated to zero".into()));
    }
    Ok(HyperGnQuantities {
        log_marginal: normalizer + peak + mass.value.ln(),
        expected_shrinkage: first.value / mass.value,
    })
}

/// Per-model ensemble ingredients under the hyper-g/n prior.
pub fn hyper_gn_components<T: Scalar>(fits: &[OlsFit<T>], a: T) -> Result<Vec<ModelComponent<T>>, BmaError> {
    fits.iter()
        .map(|f| {
            let q = hyper_gn_quantities(f, a)?;
            Ok(ModelComponent {
                model: f.model,
                log_marginal: q.log_marginal,
                post_mean: f.beta_ls.iter().map(|&b| q.expected_shrinkage * b).collect(),
            })
        })
        .collect()
}
