//! Candidate model enumeration and prior probabilities over the model space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::BmaError;
use crate::special::ln_binomial;

/// Largest number of candidate predictors for which the full model space is
/// enumerated.
pub const MAX_PREDICTORS: usize = 20;

/// Inclusion vector over `p` candidate predictors. Bit `j` set means
/// predictor `j` (0-based) is in the model; the null model has no bits set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelIndex {
    bits: u32,
    p: usize,
}

impl ModelIndex {
    pub fn null(p: usize) -> Self {
        Self { bits: 0, p }
    }

    pub fn full(p: usize) -> Self {
        Self {
            bits: if p == 32 { u32::MAX } else { (1u32 << p) - 1 },
            p,
        }
    }

    pub fn from_columns(p: usize, columns: &[usize]) -> Result<Self, BmaError> {
        let mut bits = 0u32;
        for &j in columns {
            if j >= p {
                return Err(BmaError::InvalidInput(format!("column {j} out of range for p = {p}")));
            }
            bits |= 1 << j;
        }
        Ok(Self { bits, p })
    }

    /// Parses a bitstring such as `"101"` whose first character is predictor 0.
    pub fn parse(s: &str) -> Result<Self, BmaError> {
        let p = s.len();
        if p > MAX_PREDICTORS {
            return Err(BmaError::Capacity { p, cap: MAX_PREDICTORS });
        }
        let mut bits = 0u32;
        for (j, c) in s.chars().enumerate() {
            match c {
                '1' => bits |= 1 << j,
                '0' => {}
                _ => return Err(BmaError::InvalidInput(format!("bad model bitstring {s:?}"))),
            }
        }
        Ok(Self { bits, p })
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of included predictors, `k`.
    #[inline]
    pub fn size(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_null(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        j < self.p && self.bits & (1 << j) != 0
    }

    /// Included predictor indices in increasing order.
    pub fn columns(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.contains(j)).collect()
    }

    pub fn bitstring(&self) -> String {
        (0..self.p).map(|j| if self.contains(j) { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for ModelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}

/// All models with at most `k_max` predictors, ordered by size and then
/// lexicographically by their sorted column lists (`{0} < {1}`,
/// `{0,1} < {0,2} < {1,2}`). The null model comes first.
pub fn enumerate_models(p: usize, k_max: Option<usize>) -> Result<Vec<ModelIndex>, BmaError> {
    if p == 0 {
        return Err(BmaError::InvalidInput("need at least one candidate predictor".into()));
    }
    if p > MAX_PREDICTORS {
        return Err(BmaError::Capacity { p, cap: MAX_PREDICTORS });
    }
    let k_max = match k_max {
        Some(k) if k > p => {
            return Err(BmaError::InvalidInput(format!("k_max = {k} exceeds p = {p}")));
        }
        Some(k) => k,
        None => p,
    };
    let mut out = Vec::new();
    for size in 0..=k_max {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(ModelIndex::from_columns(p, &combo)?);
            // Advance to the next combination in lexicographic order.
            match (0..size).rev().find(|&i| combo[i] < p - size + i) {
                None => break,
                Some(i) => {
                    combo[i] += 1;
                    for l in i + 1..size {
                        combo[l] = combo[l - 1] + 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPriorKind {
    Uniform,
    #[serde(alias = "betabinomial")]
    BetaBinomial,
}

/// Prior over the model space. With `k_max` set, the prior is renormalized
/// over the truncated space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPrior {
    pub kind: ModelPriorKind,
    pub p: usize,
    pub k_max: Option<usize>,
}

impl ModelPrior {
    pub fn beta_binomial(p: usize) -> Self {
        Self { kind: ModelPriorKind::BetaBinomial, p, k_max: None }
    }

    pub fn uniform(p: usize) -> Self {
        Self { kind: ModelPriorKind::Uniform, p, k_max: None }
    }

    pub fn with_k_max(mut self, k_max: Option<usize>) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn log_prob(&self, model: &ModelIndex) -> f64 {
        log_model_prior(model, self)
    }
}

/// Log prior probability of `model`.
///
/// Uniform gives `2^-p`; Beta-Binomial(1,1) gives `(p+1)^-1 C(p,k)^-1`, i.e.
/// equal mass per model size split evenly within a size.
pub fn log_model_prior(model: &ModelIndex, prior: &ModelPrior) -> f64 {
    debug_assert_eq!(model.p(), prior.p);
    let p = prior.p;
    let k = model.size();
    match (prior.kind, prior.k_max) {
        (ModelPriorKind::Uniform, None) => -(p as f64) * std::f64::consts::LN_2,
        (ModelPriorKind::Uniform, Some(k_max)) => {
            let count: f64 = (0..=k_max).map(|s| ln_binomial(p, s).exp()).sum();
            -count.ln()
        }
        (ModelPriorKind::BetaBinomial, None) => -((p + 1) as f64).ln() - ln_binomial(p, k),
        (ModelPriorKind::BetaBinomial, Some(k_max)) => {
            -((k_max.min(p) + 1) as f64).ln() - ln_binomial(p, k)
        }
    }
}
