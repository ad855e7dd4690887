//! Batch front end: `fit`, `predict`, `simulate`, and `cv`.

// NaN must fail these comparisons, so `!(a < b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod io;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nullmix::contamination::{run_simulation, SimConfig};
use nullmix::cv::ecve_estimate;
use nullmix::{fit_method, Matrix, Method, MethodOptions, ModelPriorKind};
use serde::Serialize;

use crate::io::{fmt_num, file_digest, header_value, read_dataset, read_table, write_csv, ArtifactHeader};

#[derive(Debug, Parser)]
#[command(name = "nullmix", version, about = "Bayesian model averaging under g priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one method to a CSV dataset and write the ensemble summaries.
    Fit(FitArgs),
    /// Predict new rows from a saved fit.
    Predict(PredictArgs),
    /// Run a contamination simulation described by a JSON config.
    Simulate(SimulateArgs),
    /// Estimate expected K-fold cross-validation error for several methods.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorArg {
    #[value(name = "betabinomial", alias = "beta-binomial")]
    BetaBinomial,
    Uniform,
}

impl From<PriorArg> for ModelPriorKind {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::BetaBinomial => ModelPriorKind::BetaBinomial,
            PriorArg::Uniform => ModelPriorKind::Uniform,
        }
    }
}

/// Options shared by commands that fit methods to a dataset.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "betabinomial")]
    pub model_prior: PriorArg,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Fraction of most influential cases trimmed for robust targets.
    #[arg(long = "trim", default_value_t = 0.10)]
    pub trim: f64,
    /// Shape of the hyper-g/n prior.
    #[arg(long, default_value_t = 3.0)]
    pub hyper_a: f64,
}

impl ModelArgs {
    fn options(&self) -> MethodOptions {
        let mut o = MethodOptions {
            model_prior: self.model_prior.into(),
            k_max: self.k_max,
            trim_frac: self.trim,
            hyper_a: self.hyper_a,
            ..MethodOptions::default()
        };
        o.null_mix.trim_frac = self.trim;
        o
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fixed g for the fixed-g method (default: the sample size).
    #[arg(long)]
    pub g: Option<f64>,
    /// Recorded in the artifact headers; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Comma-separated method tags.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, required = true)]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub t: usize,
    #[arg(long, value_parser = parse_method)]
    pub reference: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit on the logarithm of the response.
    #[arg(long)]
    pub log_response: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Cv(a) => cmd_cv(&a),
    }
}

#[derive(Serialize)]
struct FitManifest<'a> {
    command: &'static str,
    data_sha256: String,
    response: &'a str,
    method: Method,
    model: &'a ModelArgs,
    g: Option<f64>,
    seed: u64,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let (data, names) = read_dataset(&a.data, &a.response, false)?;
    let manifest = FitManifest {
        command: "fit",
        data_sha256: file_digest(&a.data)?,
        response: &a.response,
        method: a.method,
        model: &a.model,
        g: a.g,
        seed: a.seed,
    };
    let header = ArtifactHeader::new("fit", a.seed, &manifest)?.with("method", a.method);
    let mut opts = a.model.options();
    opts.fixed_g = a.g;
    let fit = fit_method(&data, a.method, &opts).map_err(|e| name_columns(e, &names))?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    ensure_dir(&a.out)?;

    let mut coef = vec![vec!["(intercept)".to_string(), String::new(), fmt_num(fit.predictor.ybar)]];
    for (j, name) in names.iter().enumerate() {
        coef.push(vec![name.clone(), fmt_num(fit.predictor.col_means[j]), fmt_num(fit.predictor.beta[j])]);
    }
    write_csv(&a.out.join("coefficients.csv"), &header, &["term", "col_mean", "coefficient"], &coef)?;

    if let Some(post) = &fit.ensemble {
        let rows: Vec<Vec<String>> = post
            .models
            .iter()
            .zip(&post.log_marginals)
            .zip(&post.post_probs)
            .map(|((m, &lm), &pp)| vec![m.bitstring(), fmt_num(lm), fmt_num(pp)])
            .collect();
        write_csv(&a.out.join("models.csv"), &header, &["model", "log_marginal", "post_prob"], &rows)?;
        let rows: Vec<Vec<String>> = names
            .iter()
            .zip(&post.inclusion_probs)
            .map(|(n, &p)| vec![n.clone(), fmt_num(p)])
            .collect();
        write_csv(&a.out.join("inclusion.csv"), &header, &["term", "inclusion_prob"], &rows)?;
    }
    if !fit.hyperparams.is_empty() {
        let rows: Vec<Vec<String>> = fit
            .hyperparams
            .iter()
            .map(|h| {
                vec![
                    h.model.bitstring(),
                    h.theta.iter().map(|&t| fmt_num(t)).collect::<Vec<_>>().join(";"),
                    fmt_num(h.g),
                    fmt_num(h.g / (1.0 + h.g)),
                    h.objective.map(fmt_num).unwrap_or_default(),
                    h.converged.to_string(),
                ]
            })
            .collect();
        write_csv(
            &a.out.join("hyperparams.csv"),
            &header,
            &["model", "theta", "g", "rho", "objective", "converged"],
            &rows,
        )?;
    }
    Ok(())
}

/// Rewrites the column indices in a singular-design error as column names.
fn name_columns(err: nullmix::BmaError, names: &[String]) -> anyhow::Error {
    let msg = err.to_string();
    if !matches!(err, nullmix::BmaError::SingularDesign(_)) {
        return anyhow!(msg);
    }
    let (Some(lo), Some(hi)) = (msg.find('['), msg.find(']')) else {
        return anyhow!(msg);
    };
    let named: Option<Vec<String>> = msg[lo + 1..hi]
        .split(',')
        .map(|t| t.trim().parse::<usize>().ok().and_then(|j| names.get(j)).map(|n| format!("{n:?}")))
        .collect();
    match named {
        Some(v) => anyhow!("{}[{}]{}", &msg[..lo], v.join(", "), &msg[hi + 1..]),
        None => anyhow!(msg),
    }
}

/// Intercept, column means and coefficients stored by `fit`.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedFit {
    pub header: String,
    pub ybar: f64,
    pub terms: Vec<String>,
    pub col_means: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn read_saved_fit(dir: &Path) -> Result<SavedFit> {
    let path = dir.join("coefficients.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default().to_string();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut ybar = None;
    let (mut terms, mut col_means, mut beta) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| anyhow!("{}: bad number in row {:?}", path.display(), rec))
        };
        if &rec[0] == "(intercept)" {
            ybar = Some(num(2)?);
        } else {
            terms.push(rec[0].to_string());
            col_means.push(num(1)?);
            beta.push(num(2)?);
        }
    }
    let ybar = ybar.ok_or_else(|| anyhow!("{}: no (intercept) row", path.display()))?;
    Ok(SavedFit { header, ybar, terms, col_means, beta })
}

#[derive(Serialize)]
struct PredictManifest {
    command: &'static str,
    fit_sha256: String,
    test_sha256: String,
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let saved = read_saved_fit(&a.fit)?;
    let table = read_table(&a.test)?;
    let idx: Vec<usize> = saved
        .terms
        .iter()
        .map(|t| {
            table.column_index(t).ok_or_else(|| {
                anyhow!(
                    "schema mismatch: test data {} lacks column {t:?} (has {:?})",
                    a.test.display(),
                    table.names
                )
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = table.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
    let x = Matrix::from_rows(&rows)?;
    let predictor = nullmix::LinearPredictor { ybar: saved.ybar, col_means: saved.col_means.clone(), beta: saved.beta.clone() };
    let pred = predictor.predict(&x)?;
    let seed = header_value(&saved.header, "seed").and_then(|s| s.parse().ok()).unwrap_or(0);
    let manifest = PredictManifest {
        command: "predict",
        fit_sha256: file_digest(&a.fit.join("coefficients.csv"))?,
        test_sha256: file_digest(&a.test)?,
    };
    let header = ArtifactHeader::new("predict", seed, &manifest)?;
    let out: Vec<Vec<String>> = pred.iter().enumerate().map(|(i, &v)| vec![(i + 1).to_string(), fmt_num(v)]).collect();
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_csv(&a.out, &header, &["row", "prediction"], &out)
}

pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: SimConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(config)
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    command: &'static str,
    config: &'a SimConfig,
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let config = load_sim_config(&a.config)?;
    let report = run_simulation(&config, a.threads)?;
    let header = ArtifactHeader::new("simulate", config.seed, &SimulateManifest { command: "simulate", config: &config })?;
    ensure_dir(&a.out)?;
    let cell = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    let mut rows = Vec::new();
    for (rep, (m_row, r_row)) in report.mspe.iter().zip(&report.rr).enumerate() {
        for (j, method) in report.methods.iter().enumerate() {
            rows.push(vec![rep.to_string(), method.to_string(), cell(m_row[j]), cell(r_row[j])]);
        }
    }
    write_csv(&a.out.join("per_rep.csv"), &header, &["rep", "method", "mspe", "rr"], &rows)?;
    let rows: Vec<Vec<String>> = report
        .summary()
        .iter()
        .map(|s| {
            vec![
                s.method.to_string(),
                s.metric.to_string(),
                s.count.to_string(),
                fmt_num(s.mean),
                fmt_num(s.min),
                fmt_num(s.q25),
                fmt_num(s.median),
                fmt_num(s.q75),
                fmt_num(s.max),
            ]
        })
        .collect();
    write_csv(
        &a.out.join("summary.csv"),
        &header,
        &["method", "metric", "count", "mean", "min", "q25", "median", "q75", "max"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = report
        .failures
        .iter()
        .map(|f| vec![f.rep.to_string(), f.method.to_string(), f.message.clone()])
        .collect();
    write_csv(&a.out.join("failures.csv"), &header, &["rep", "method", "message"], &rows)?;
    if !report.failures.is_empty() {
        eprintln!("warning: {} method fit(s) failed; see failures.csv", report.failures.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct CvManifest<'a> {
    command: &'static str,
    data_sha256: String,
    response: &'a str,
    methods: &'a [Method],
    k: usize,
    t: usize,
    reference: Method,
    seed: u64,
    log_response: bool,
    model: &'a ModelArgs,
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| anyhow!("building thread pool: {e}"))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

pub fn cmd_cv(a: &CvArgs) -> Result<()> {
    if !a.methods.contains(&a.reference) {
        bail!("reference method {} is not among --methods", a.reference);
    }
    let (data, _) = read_dataset(&a.data, &a.response, a.log_response)?;
    if a.k > data.n() {
        bail!("invalid input: K = {} exceeds the number of cases n = {}", a.k, data.n());
    }
    let opts = a.model.options();
    let results = with_threads(a.threads, || {
        a.methods
            .iter()
            .map(|&m| ecve_estimate(&data, m, &opts, a.k, a.t, a.seed).map_err(|e| anyhow!("{m}: {e}")))
            .collect::<Result<Vec<_>>>()
    })??;
    let ref_idx = a.methods.iter().position(|&m| m == a.reference).expect("checked above");
    let reference = results[ref_idx].ecve;
    let manifest = CvManifest {
        command: "cv",
        data_sha256: file_digest(&a.data)?,
        response: &a.response,
        methods: &a.methods,
        k: a.k,
        t: a.t,
        reference: a.reference,
        seed: a.seed,
        log_response: a.log_response,
        model: &a.model,
    };
    let header = ArtifactHeader::new("cv", a.seed, &manifest)?
        .with("log_response", a.log_response)
        .with("reference", a.reference);
    let rows: Vec<Vec<String>> = a
        .methods
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (m, r))| {
            let reduction = if i == ref_idx { 0.0 } else { 100.0 * (reference - r.ecve) / reference };
            vec![m.to_string(), a.k.to_string(), r.t_used.to_string(), fmt_num(r.ecve), fmt_num(reduction)]
        })
        .collect();
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_csv(&a.out, &header, &["method", "K", "T", "ecve", "percent_reduction"], &rows)
}
