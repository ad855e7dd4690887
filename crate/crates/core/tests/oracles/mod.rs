//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls the closed forms under test.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use nullmix::quadrature::{integrate, QuadOptions};
use nullmix::{Dataset64, Matrix, Method, MethodOptions, OlsFit64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `x_i = i - 5`, `y_i = β x_i` except the last case, which is shifted by `-K`.
pub fn shifted_line(beta: f64, k: f64) -> Dataset64 {
    let x: Vec<f64> = (0..11).map(|i| i as f64 - 5.0).collect();
    let mut y: Vec<f64> = x.iter().map(|v| beta * v).collect();
    y[10] -= k;
    Dataset64::new(Matrix::from_columns(&[x]).unwrap(), y).unwrap()
}

pub fn random_dataset(n: usize, p: usize, signal: f64, seed: u64) -> Dataset64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            let mean: f64 = cols.iter().enumerate().map(|(j, c)| signal * (j + 1) as f64 * c[i]).sum();
            mean + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset64::new(Matrix::from_columns(&cols).unwrap(), y).unwrap()
}

/// Linear signal `0.7 Σ x_j` with unit noise; each case is shifted by `+6`
/// with probability 0.1.
pub fn shifted_dataset(n: usize, p: usize, seed: u64) -> Dataset64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let y = (0..n)
        .map(|i| {
            let shift = if rng.random::<f64>() < 0.1 { 6.0 } else { 0.0 };
            cols.iter().map(|c| 0.7 * c[i]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal) + shift
        })
        .collect();
    Dataset64::new(Matrix::from_columns(&cols).unwrap(), y).unwrap()
}

/// Maps `t ∈ (-1, 1)` onto the real line around `center` with width `scale`.
fn real_line(center: f64, scale: f64, t: f64) -> (f64, f64) {
    let d = 1.0 - t * t;
    (center + scale * t / d, scale * (1.0 + t * t) / (d * d))
}

/// `log ∫∫∫ N(y | α + βx, σ²) N(β | θ, gσ²/Σx̃²) σ⁻² dα dβ dσ²` for one
/// predictor, by three nested adaptive quadratures.
pub fn nested_quadrature_log_marginal(x: &[f64], y: &[f64], theta: f64, g: f64) -> f64 {
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let xc: Vec<f64> = x.iter().map(|v| v - xbar).collect();
    let sxx: f64 = xc.iter().map(|v| v * v).sum();
    let ybar = y.iter().sum::<f64>() / n;
    let sxy: f64 = xc.iter().zip(y).map(|(a, b)| a * (b - ybar)).sum();
    let b_ls = sxy / sxx;
    let sse: f64 = xc.iter().zip(y).map(|(a, b)| (b - ybar - b_ls * a).powi(2)).sum();
    // Log-likelihood at its maximum; only used as a scaling constant.
    let offset = -0.5 * n * (2.0 * std::f64::consts::PI * sse / n).ln() - 0.5 * n;

    // Integrands are scaled to be O(1) near the mode, so an absolute floor on
    // the inner integrals only discards negligible tails.
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-15, max_depth: 30, max_intervals: 20_000 };
    let outer = |u: f64| -> f64 {
        let (ls2, dls2) = real_line((sse / n).ln(), 1.0, u);
        let s2 = ls2.exp();
        let s = s2.sqrt();
        let prior_var = g * s2 / sxx;
        let post_mean = (theta + g * b_ls) / (1.0 + g);
        let post_sd = (s2 * g / ((1.0 + g) * sxx)).sqrt();
        let middle = |v: f64| -> f64 {
            let (beta, dbeta) = real_line(post_mean, post_sd, v);
            let log_prior = -0.5 * (2.0 * std::f64::consts::PI * prior_var).ln()
                - 0.5 * (beta - theta).powi(2) / prior_var;
            let inner = |w: f64| -> f64 {
                let (alpha, dalpha) = real_line(ybar, s / n.sqrt(), w);
                let rss: f64 = xc.iter().zip(y).map(|(a, b)| (b - alpha - beta * a).powi(2)).sum();
                let ll = -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - 0.5 * rss / s2;
                let v = (ll + log_prior - offset + dalpha.ln()).exp();
                if v.is_finite() { v } else { 0.0 }
            };
            let v = integrate(inner, -1.0, 1.0, &opts).unwrap().value * dbeta;
            if v.is_finite() { v } else { 0.0 }
        };
        // σ⁻² dσ² = d log σ².
        let v = integrate(middle, -1.0, 1.0, &opts).unwrap().value * dls2;
        if v.is_finite() { v } else { 0.0 }
    };
    integrate(outer, -1.0, 1.0, &opts).unwrap().value.ln() + offset
}

/// Monte Carlo estimate of `∫ BF(g) π(g) dg` and `E[g/(1+g) | Y]` under the
/// hyper-g/n prior, drawing `g` by inverting its CDF
/// `1 - (1 + g/n)^(1 - a/2)`.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    /// Mean of `exp(log BF(g) - scale)` and its standard error.
    pub mean: f64,
    pub mean_se: f64,
    pub scale: f64,
    pub shrinkage: f64,
    pub shrinkage_se: f64,
}

pub fn hyper_gn_monte_carlo(n: usize, k: usize, r2: f64, a: f64, draws: usize, seed: u64) -> MonteCarlo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let log_bf = |g: f64| {
        0.5 * (n - k - 1) as f64 * g.ln_1p() - 0.5 * (n - 1) as f64 * (1.0 + g * (1.0 - r2)).ln()
    };
    // Any fixed constant works; use the value at g = n.
    let scale = log_bf(nf);
    let (mut s1, mut s2, mut t1, mut t2, mut c12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let u: f64 = rng.random();
        let g = nf * ((1.0 - u).powf(1.0 / (1.0 - a / 2.0)) - 1.0);
        let b = (log_bf(g) - scale).exp();
        let r = b * g / (1.0 + g);
        s1 += b;
        s2 += b * b;
        t1 += r;
        t2 += r * r;
        c12 += b * r;
    }
    let m = draws as f64;
    let (mb, mr) = (s1 / m, t1 / m);
    let var_b = s2 / m - mb * mb;
    let var_r = t2 / m - mr * mr;
    let cov = c12 / m - mb * mr;
    let ratio = mr / mb;
    // Delta method for a ratio of means.
    let var_ratio = (var_r - 2.0 * ratio * cov + ratio * ratio * var_b) / (mb * mb);
    MonteCarlo {
        mean: mb,
        mean_se: (var_b / m).sqrt(),
        scale,
        shrinkage: ratio,
        shrinkage_se: (var_ratio / m).sqrt(),
    }
}

/// Two-model (`M_γ` vs null, odds 1) averaged coefficients written from the
/// raw-response form of the Bayes factor.
pub fn literal_local_bma(data: &Dataset64, fit: &OlsFit64, theta: &[f64], g: f64) -> Option<Vec<f64>> {
    let cols = fit.model.columns();
    let xg = data.x_centered.select_columns(&cols);
    let n = data.n();
    let k = cols.len();
    let ybar = data.y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = data.y.iter().map(|v| v - ybar).collect();
    let xt = xg.mat_vec(theta);
    let resid: f64 = yc.iter().zip(&xt).map(|(a, b)| (a - b).powi(2)).sum();
    let yy: f64 = yc.iter().map(|v| v * v).sum();
    let r2 = fit.r_squared;
    let bracket = 1.0 + g * (1.0 - r2) + (resid - yy) / yy;
    if !(bracket > 0.0) {
        return None;
    }
    let lbf = 0.5 * (n - k - 1) as f64 * g.ln_1p() - 0.5 * (n - 1) as f64 * bracket.ln();
    let w = 1.0 / (1.0 + (-lbf).exp());
    Some(
        theta
            .iter()
            .zip(&fit.beta_ls)
            .map(|(&t, &b)| w * (t + g * b) / (1.0 + g))
            .collect(),
    )
}

/// Minimum of the null-mixture objective over a regular grid in
/// `(θ, log g)`, with a slack equal to the largest change between the
/// minimizing cell and its neighbors.
pub fn grid_min_null_mix(
    data: &Dataset64,
    fit: &OlsFit64,
    target: &[f64],
    theta_lo: &[f64],
    theta_hi: &[f64],
    points: usize,
) -> (f64, f64) {
    let k = target.len();
    let (lg_lo, lg_hi) = (1e-8f64.ln(), 1e12f64.ln());
    let dims = k + 1;
    let axis = |d: usize, i: usize| -> f64 {
        let t = i as f64 / (points - 1) as f64;
        if d < k {
            theta_lo[d] + t * (theta_hi[d] - theta_lo[d])
        } else {
            lg_lo + t * (lg_hi - lg_lo)
        }
    };
    let eval = |idx: &[usize]| -> f64 {
        let theta: Vec<f64> = (0..k).map(|d| axis(d, idx[d])).collect();
        let g = axis(k, idx[k]).exp();
        match literal_local_bma(data, fit, &theta, g) {
            Some(b) => b.iter().zip(target).map(|(a, t)| (a - t).powi(2)).sum(),
            None => f64::INFINITY,
        }
    };
    let total = points.pow(dims as u32);
    let unflatten = |mut f: usize| -> Vec<usize> {
        let mut idx = vec![0; dims];
        for slot in idx.iter_mut() {
            *slot = f % points;
            f /= points;
        }
        idx
    };
    let (mut best, mut best_idx) = (f64::INFINITY, vec![0; dims]);
    for f in 0..total {
        let idx = unflatten(f);
        let v = eval(&idx);
        if v < best {
            best = v;
            best_idx = idx;
        }
    }
    let mut slack: f64 = 0.0;
    for d in 0..dims {
        for step in [-1i64, 1] {
            let j = best_idx[d] as i64 + step;
            if j < 0 || j >= points as i64 {
                continue;
            }
            let mut idx = best_idx.clone();
            idx[d] = j as usize;
            let v = eval(&idx);
            if v.is_finite() {
                slack = slack.max((v - best).abs());
            }
        }
    }
    (best, slack)
}

/// Leave-one-out mean squared error, refitting from scratch for every case.
pub fn leave_one_out(data: &Dataset64, method: Method, opts: &MethodOptions) -> f64 {
    let n = data.n();
    let p = data.p();
    let mut total = 0.0;
    for i in 0..n {
        let rows: Vec<Vec<f64>> = (0..n).filter(|&r| r != i).map(|r| data.x_raw.row(r).to_vec()).collect();
        let y: Vec<f64> = (0..n).filter(|&r| r != i).map(|r| data.y[r]).collect();
        let train = Dataset64::new(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let fit = nullmix::fit_method(&train, method, opts).unwrap();
        let mut pred = fit.predictor.ybar;
        for j in 0..p {
            pred += (data.x_raw[(i, j)] - fit.predictor.col_means[j]) * fit.predictor.beta[j];
        }
        total += (data.y[i] - pred).powi(2);
    }
    total / n as f64
}
