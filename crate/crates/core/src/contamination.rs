//! Simulation harness: correlated designs, contaminated responses, and
//! out-of-sample MSPE comparisons across methods.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::BmaError;
use crate::linalg::Matrix;
use crate::methods::{fit_method, LinearPredictor, Method, MethodOptions};
use crate::model_space::{ModelIndex, ModelPriorKind, MAX_PREDICTORS};
use crate::null_mixture::{NullMixOptions, DEFAULT_TRIM};
use crate::regression::{robust_beta, Dataset};
use crate::strategies::DEFAULT_HYPER_A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    None,
    MeanShift,
    VarianceInflation,
}

/// How contaminated cases are picked: exactly `floor(π n)` cases drawn
/// without replacement, or each case independently with probability `π`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    #[default]
    FixedCount,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationScheme {
    pub kind: SchemeKind,
    /// Shift `K` for mean-shift, variance factor `K` for variance inflation.
    #[serde(default)]
    pub k_value: f64,
    #[serde(default)]
    pub pi: f64,
    #[serde(default)]
    pub selection: SelectionMode,
}

impl ContaminationScheme {
    pub fn none() -> Self {
        Self { kind: SchemeKind::None, k_value: 0.0, pi: 0.0, selection: SelectionMode::FixedCount }
    }

    pub fn mean_shift(k_value: f64, pi: f64) -> Self {
        Self { kind: SchemeKind::MeanShift, k_value, pi, selection: SelectionMode::FixedCount }
    }

    pub fn variance_inflation(k_value: f64, pi: f64) -> Self {
        Self { kind: SchemeKind::VarianceInflation, k_value, pi, selection: SelectionMode::FixedCount }
    }

    pub fn with_selection(mut self, selection: SelectionMode) -> Self {
        self.selection = selection;
        self
    }

    fn problems(&self, field: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.kind == SchemeKind::None {
            return out;
        }
        if !(0.0..=1.0).contains(&self.pi) {
            out.push(format!("{field}.pi must lie in [0, 1], got {}", self.pi));
        }
        if !self.k_value.is_finite() {
            out.push(format!("{field}.k_value must be finite"));
        }
        if self.kind == SchemeKind::VarianceInflation && !(self.k_value > 0.0) {
            out.push(format!("{field}.k_value must be positive for variance inflation, got {}", self.k_value));
        }
        out
    }
}

/// Rows i.i.d. normal with unit variances and common correlation `corr`.
///
/// For `corr ≥ 0` each row is `√(1-corr) z + √corr w 1` with a shared
/// scalar `w`; negative correlations use the symmetric square root of the
/// covariance instead.
pub fn gen_design<R: Rng + ?Sized>(n: usize, p: usize, corr: f64, rng: &mut R) -> Result<Matrix<f64>, BmaError> {
    check_corr(p, corr).map_err(|m| BmaError::InvalidConfig(vec![m]))?;
    let mut x = Matrix::zeros(n, p);
    let a = (1.0 - corr).sqrt();
    for i in 0..n {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        if corr >= 0.0 {
            let w: f64 = rng.sample(StandardNormal);
            let b = corr.sqrt() * w;
            for j in 0..p {
                x[(i, j)] = a * z[j] + b;
            }
        } else {
            let zbar = z.iter().sum::<f64>() / p as f64;
            let c = (1.0 + (p as f64 - 1.0) * corr).sqrt();
            for j in 0..p {
                x[(i, j)] = a * (z[j] - zbar) + c * zbar;
            }
        }
    }
    Ok(x)
}

fn check_corr(p: usize, corr: f64) -> Result<(), String> {
    let lower = if p > 1 { -1.0 / (p as f64 - 1.0) } else { -1.0 };
    if corr > lower && corr < 1.0 || (p == 1 && corr == 0.0) {
        Ok(())
    } else {
        Err(format!("corr = {corr} must lie in ({lower}, 1) for p = {p}"))
    }
}

/// `y = α + Xβ + ε`, `ε ~ N(0, σ²)`, then contamination. Returns the
/// response and a mask of contaminated rows.
pub fn gen_response<R: Rng + ?Sized>(
    x: &Matrix<f64>,
    beta_true: &[f64],
    alpha: f64,
    sigma: f64,
    scheme: &ContaminationScheme,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<bool>), BmaError> {
    if beta_true.len() != x.ncols() {
        return Err(BmaError::InvalidInput(format!(
            "beta has length {}, design has {} columns",
            beta_true.len(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    let mut eps: Vec<f64> = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut mask = vec![false; n];
    if scheme.kind != SchemeKind::None {
        match scheme.selection {
            SelectionMode::FixedCount => {
                let count = ((scheme.pi * n as f64) + 1e-9).floor() as usize;
                for i in sample(rng, n, count.min(n)).iter() {
                    mask[i] = true;
                }
            }
            SelectionMode::Bernoulli => {
                for m in &mut mask {
                    *m = rng.random::<f64>() < scheme.pi;
                }
            }
        }
    }
    let mut shift = vec![0.0; n];
    for i in (0..n).filter(|&i| mask[i]) {
        match scheme.kind {
            SchemeKind::MeanShift => shift[i] = scheme.k_value,
            SchemeKind::VarianceInflation => eps[i] *= scheme.k_value.sqrt(),
            SchemeKind::None => {}
        }
    }
    let plane = x.mat_vec(beta_true);
    let y = (0..n).map(|i| alpha + plane[i] + eps[i] + shift[i]).collect();
    Ok((y, mask))
}

/// Coefficients for the standard complexity grid: for `p = 5`,
/// `β_j = j` for the first `complexity` predictors; for `p = 10`,
/// `β_j = j/2` for the first `complexity ∈ {1, 5, 10}` predictors.
pub fn complexity_beta(p: usize, complexity: usize) -> Result<Vec<f64>, BmaError> {
    let step = match (p, complexity) {
        (5, 1..=5) => 1.0,
        (10, 1 | 5 | 10) => 0.5,
        _ => {
            return Err(BmaError::InvalidInput(format!(
                "no complexity setting {complexity} for p = {p}"
            )))
        }
    };
    Ok((1..=p).map(|j| if j <= complexity { step * j as f64 } else { 0.0 }).collect())
}

/// The five train/test contamination pairs: M-S/no, M-S/M-S, V-I/no,
/// V-I/V-I, no/no, each with `K = 10` on 5% of cases.
pub fn contamination_patterns() -> Vec<(&'static str, ContaminationScheme, ContaminationScheme)> {
    let ms = ContaminationScheme::mean_shift(10.0, 0.05);
    let vi = ContaminationScheme::variance_inflation(10.0, 0.05);
    let no = ContaminationScheme::none();
    vec![
        ("ms-no", ms, no),
        ("ms-ms", ms, ms),
        ("vi-no", vi, no),
        ("vi-vi", vi, vi),
        ("no-no", no, no),
    ]
}

fn default_corr() -> f64 {
    0.6
}
fn default_sigma() -> f64 {
    1.0
}
fn default_trim() -> f64 {
    DEFAULT_TRIM
}
fn default_hyper_a() -> f64 {
    DEFAULT_HYPER_A
}
fn default_prior() -> ModelPriorKind {
    ModelPriorKind::BetaBinomial
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub p: usize,
    #[serde(default = "default_corr")]
    pub corr: f64,
    pub beta_true: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub alpha: f64,
    pub train_scheme: ContaminationScheme,
    pub test_scheme: ContaminationScheme,
    pub n_reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub reference_method: Method,
    #[serde(default = "default_trim")]
    pub trim_frac: f64,
    #[serde(default = "default_prior")]
    pub model_prior: ModelPriorKind,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default = "default_hyper_a")]
    pub hyper_a: f64,
}

impl SimConfig {
    /// `n = 100` train and test cases, equicorrelation 0.6, `σ = 1`, `α = 0`.
    pub fn standard(
        p: usize,
        complexity: usize,
        train_scheme: ContaminationScheme,
        test_scheme: ContaminationScheme,
        n_reps: usize,
        seed: u64,
    ) -> Result<Self, BmaError> {
        Ok(Self {
            n_train: 100,
            n_test: 100,
            p,
            corr: default_corr(),
            beta_true: complexity_beta(p, complexity)?,
            sigma: 1.0,
            alpha: 0.0,
            train_scheme,
            test_scheme,
            n_reps,
            seed,
            methods: vec![
                Method::FixedG,
                Method::EbLocal,
                Method::EbGlobal,
                Method::HyperGn,
                Method::NullMixture,
                Method::RobustFull,
            ],
            reference_method: Method::HyperGn,
            trim_frac: DEFAULT_TRIM,
            model_prior: ModelPriorKind::BetaBinomial,
            k_max: None,
            hyper_a: DEFAULT_HYPER_A,
        })
    }

    /// Collects every invalid field rather than stopping at the first.
    pub fn validate(&self) -> Result<(), BmaError> {
        let mut bad = Vec::new();
        if self.p == 0 || self.p > MAX_PREDICTORS {
            bad.push(format!("p must lie in 1..={MAX_PREDICTORS}, got {}", self.p));
        }
        if self.n_train < self.p + 3 {
            bad.push(format!("n_train = {} too small for p = {}", self.n_train, self.p));
        }
        if self.n_test == 0 {
            bad.push("n_test must be positive".into());
        }
        if let Err(m) = check_corr(self.p, self.corr) {
            bad.push(m);
        }
        if self.beta_true.len() != self.p {
            bad.push(format!("beta_true has length {}, expected p = {}", self.beta_true.len(), self.p));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            bad.push("beta_true must be finite".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            bad.push(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if !self.alpha.is_finite() {
            bad.push("alpha must be finite".into());
        }
        bad.extend(self.train_scheme.problems("train_scheme"));
        bad.extend(self.test_scheme.problems("test_scheme"));
        if self.n_reps == 0 {
            bad.push("n_reps must be positive".into());
        }
        if self.methods.is_empty() {
            bad.push("methods must not be empty".into());
        }
        if !self.methods.contains(&self.reference_method) {
            bad.push(format!("reference_method {} is not among methods", self.reference_method));
        }
        if !(0.0..0.5).contains(&self.trim_frac) {
            bad.push(format!("trim_frac must lie in [0, 0.5), got {}", self.trim_frac));
        }
        if !(self.hyper_a > 2.0) {
            bad.push(format!("hyper_a must exceed 2, got {}", self.hyper_a));
        }
        if matches!(self.k_max, Some(k) if k > self.p) {
            bad.push("k_max exceeds p".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(BmaError::InvalidConfig(bad))
        }
    }

    pub fn method_options(&self) -> MethodOptions {
        MethodOptions {
            model_prior: self.model_prior,
            k_max: self.k_max,
            trim_frac: self.trim_frac,
            hyper_a: self.hyper_a,
            fixed_g: None,
            null_mix: NullMixOptions { trim_frac: self.trim_frac, ..Default::default() },
        }
    }
}

/// Independent generator for replication `rep`: same seed, stream `rep`.
pub fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct RepData {
    pub train: Dataset<f64>,
    pub x_test: Matrix<f64>,
    pub y_test: Vec<f64>,
    pub train_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

/// Training and test data for one replication.
pub fn gen_replication(config: &SimConfig, rep: usize) -> Result<RepData, BmaError> {
    let mut rng = rep_rng(config.seed, rep);
    let x_train = gen_design(config.n_train, config.p, config.corr, &mut rng)?;
    let (y_train, train_mask) = gen_response(
        &x_train,
        &config.beta_true,
        config.alpha,
        config.sigma,
        &config.train_scheme,
        &mut rng,
    )?;
    let x_test = gen_design(config.n_test, config.p, config.corr, &mut rng)?;
    let (y_test, test_mask) = gen_response(
        &x_test,
        &config.beta_true,
        config.alpha,
        config.sigma,
        &config.test_scheme,
        &mut rng,
    )?;
    Ok(RepData {
        train: Dataset::new(x_train, y_train)?,
        x_test,
        y_test,
        train_mask,
        test_mask,
    })
}

pub fn mspe(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Percent reduction of `mspe` relative to `reference`.
pub fn relative_reduction(mspe: f64, reference: f64) -> f64 {
    100.0 * (reference - mspe) / reference
}

/// Trimmed least squares on the full model, predicting with the full
/// training mean and column means.
pub fn robust_full_model_predictor(data: &Dataset<f64>, trim_frac: f64) -> Result<LinearPredictor<f64>, BmaError> {
    Ok(LinearPredictor {
        ybar: data.y_mean(),
        col_means: data.col_means.clone(),
        beta: robust_beta(data, &ModelIndex::full(data.p()), trim_frac)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub rep: usize,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub methods: Vec<Method>,
    pub reference: Method,
    /// `mspe[rep][m]`; `None` marks a failed fit.
    pub mspe: Vec<Vec<Option<f64>>>,
    pub rr: Vec<Vec<Option<f64>>>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

impl SimReport {
    fn column(&self, table: &[Vec<Option<f64>>], method: Method) -> Vec<f64> {
        match self.methods.iter().position(|&m| m == method) {
            Some(j) => table.iter().filter_map(|row| row[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn mspe_of(&self, method: Method) -> Vec<f64> {
        self.column(&self.mspe, method)
    }

    pub fn rr_of(&self, method: Method) -> Vec<f64> {
        self.column(&self.rr, method)
    }

    /// Relative reductions of `method` against an arbitrary `reference`
    /// over replications where both succeeded.
    pub fn rr_between(&self, method: Method, reference: Method) -> Vec<f64> {
        let (Some(a), Some(b)) = (
            self.methods.iter().position(|&m| m == method),
            self.methods.iter().position(|&m| m == reference),
        ) else {
            return Vec::new();
        };
        self.mspe
            .iter()
            .filter_map(|row| Some(relative_reduction(row[a]?, row[b]?)))
            .collect()
    }

    pub fn summary(&self) -> Vec<Summary> {
        let mut out = Vec::new();
        for (metric, table) in [("mspe", &self.mspe), ("rr", &self.rr)] {
            for &m in &self.methods {
                let mut v = self.column(table, m);
                v.sort_by(f64::total_cmp);
                let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
                out.push(Summary {
                    method: m,
                    metric,
                    count: v.len(),
                    mean,
                    min: v.first().copied().unwrap_or(f64::NAN),
                    q25: quantile_sorted(&v, 0.25),
                    median: quantile_sorted(&v, 0.5),
                    q75: quantile_sorted(&v, 0.75),
                    max: v.last().copied().unwrap_or(f64::NAN),
                });
            }
        }
        out
    }
}

type RepOutcome = (Vec<Option<f64>>, Vec<Failure>);

fn run_rep(config: &SimConfig, opts: &MethodOptions, rep: usize) -> RepOutcome {
    let fail_all = |e: BmaError| {
        let failures = config
            .methods
            .iter()
            .map(|&method| Failure { rep, method, message: e.to_string() })
            .collect();
        (vec![None; config.methods.len()], failures)
    };
    let data = match gen_replication(config, rep) {
        Ok(d) => d,
        Err(e) => return fail_all(e),
    };
    let mut failures = Vec::new();
    let row = config
        .methods
        .iter()
        .map(|&method| {
            let result = fit_method(&data.train, method, opts).and_then(|f| f.predictor.predict(&data.x_test));
            match result {
                Ok(pred) => Some(mspe(&pred, &data.y_test)),
                Err(e) => {
                    failures.push(Failure { rep, method, message: e.to_string() });
                    None
                }
            }
        })
        .collect();
    (row, failures)
}

/// Runs every replication, in parallel when `threads` allows, and scores
/// each method by test-set MSPE and its reduction against the reference.
/// The result does not depend on the thread count.
pub fn run_simulation(config: &SimConfig, threads: Option<usize>) -> Result<SimReport, BmaError> {
    config.validate()?;
    let opts = config.method_options();
    let job = || -> Vec<RepOutcome> {
        (0..config.n_reps)
            .into_par_iter()
            .map(|rep| run_rep(config, &opts, rep))
            .collect()
    };
    let outcomes = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| BmaError::InvalidConfig(vec![format!("threads: {e}")]))?
            .install(job),
        None => job(),
    };
    let ref_idx = config
        .methods
        .iter()
        .position(|&m| m == config.reference_method)
        .expect("validated");
    let mut mspe_table = Vec::with_capacity(outcomes.len());
    let mut rr_table = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (row, f) in outcomes {
        let rr = row
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if j == ref_idx {
                    return v.map(|_| 0.0);
                }
                Some(relative_reduction((*v)?, row[ref_idx]?))
            })
            .collect();
        mspe_table.push(row);
        rr_table.push(rr);
        failures.extend(f);
    }
    Ok(SimReport {
        methods: config.methods.clone(),
        reference: config.reference_method,
        mspe: mspe_table,
        rr: rr_table,
        failures,
    })
}
