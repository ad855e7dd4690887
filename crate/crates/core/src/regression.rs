//! Centering, ordinary least squares, influence diagnostics and the
//! Cook's-distance-trimmed robust estimator.

use crate::error::BmaError;
use crate::linalg::{dot, norm_sq, Matrix, ThinQr};
use crate::model_space::ModelIndex;
use crate::scalar::Scalar;

/// Response plus raw and column-centered design.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub y: Vec<T>,
    pub x_raw: Matrix<T>,
    pub x_centered: Matrix<T>,
    pub col_means: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x_raw: Matrix<T>, y: Vec<T>) -> Result<Self, BmaError> {
        if x_raw.nrows() != y.len() {
            return Err(BmaError::InvalidInput(format!(
                "design has {} rows but response has {} entries",
                x_raw.nrows(),
                y.len()
            )));
        }
        if y.iter().chain(x_raw.as_slice()).any(|v| !v.is_finite()) {
            return Err(BmaError::InvalidInput("data contain non-finite values".into()));
        }
        let (x_centered, col_means) = center_columns(&x_raw)?;
        Ok(Self { y, x_raw, x_centered, col_means })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x_raw.ncols()
    }

    pub fn y_mean(&self) -> T {
        mean(&self.y)
    }

    /// `||Y - Ȳ||²`.
    pub fn sst(&self) -> T {
        let m = self.y_mean();
        self.y.iter().map(|&v| (v - m) * (v - m)).sum()
    }

    /// Rows `rows` of the raw data, re-centered within the subset.
    pub fn subset(&self, rows: &[usize]) -> Result<Self, BmaError> {
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Self::new(self.x_raw.select_rows(rows), y)
    }
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

/// Subtracts each column's mean. Returns the centered matrix and the means.
pub fn center_columns<T: Scalar>(x_raw: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>), BmaError> {
    let (n, p) = (x_raw.nrows(), x_raw.ncols());
    if x_raw.is_empty() {
        return Err(BmaError::InvalidInput("cannot center an empty matrix".into()));
    }
    let nt = T::from_usize_lossy(n);
    let means: Vec<T> = (0..p)
        .map(|j| (0..n).map(|i| x_raw[(i, j)]).sum::<T>() / nt)
        .collect();
    let mut centered = x_raw.clone();
    for i in 0..n {
        for j in 0..p {
            centered[(i, j)] = x_raw[(i, j)] - means[j];
        }
    }
    Ok((centered, means))
}

/// Least-squares summary for one model (intercept always included).
#[derive(Debug, Clone)]
pub struct OlsFit<T> {
    pub model: ModelIndex,
    /// Intercept on the centered scale, the sample mean of `y`.
    pub alpha_hat: T,
    pub beta_ls: Vec<T>,
    pub residuals: Vec<T>,
    pub sse: T,
    pub sst: T,
    pub r_squared: T,
    pub leverages: Vec<T>,
    pub cooks_d: Vec<T>,
    pub sigma2_hat: T,
    /// `X_γᵀ X_γ` of the centered selected columns.
    pub gram: Matrix<T>,
    pub n: usize,
}

impl<T: Scalar> OlsFit<T> {
    #[inline]
    pub fn k(&self) -> usize {
        self.beta_ls.len()
    }
}

/// Fits `y = α + X_γ β + ε` on the centered design with a Householder QR.
pub fn ols_fit<T: Scalar>(data: &Dataset<T>, model: &ModelIndex) -> Result<OlsFit<T>, BmaError> {
    let n = data.n();
    let k = model.size();
    if model.p() != data.p() {
        return Err(BmaError::InvalidInput(format!(
            "model over {} predictors applied to data with {}",
            model.p(),
            data.p()
        )));
    }
    if n <= k + 1 {
        return Err(BmaError::InvalidInput(format!(
            "n = {n} observations cannot fit {k} slopes plus an intercept"
        )));
    }
    let nt = T::from_usize_lossy(n);
    let alpha_hat = data.y_mean();
    let yc: Vec<T> = data.y.iter().map(|&v| v - alpha_hat).collect();
    let sst = norm_sq(&yc);
    let cols = model.columns();
    let xg = data.x_centered.select_columns(&cols);

    let (beta_ls, fitted, leverages) = if k == 0 {
        (Vec::new(), vec![T::zero(); n], vec![T::one() / nt; n])
    } else {
        let qr = ThinQr::factor(&xg).map_err(|e| match e {
            BmaError::SingularDesign(_) => BmaError::SingularDesign(format!(
                "columns {:?} of model {} are linearly dependent",
                cols, model
            )),
            other => other,
        })?;
        let beta = qr.solve(&yc);
        let fitted = xg.mat_vec(&beta);
        let lev = (0..n)
            .map(|i| T::one() / nt + norm_sq(qr.q.row(i)))
            .collect();
        (beta, fitted, lev)
    };
    let residuals: Vec<T> = yc.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let sse = norm_sq(&residuals);
    let r_squared = if sst > T::zero() {
        (T::one() - sse / sst).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let sigma2_hat = sse / T::from_usize_lossy(n - k - 1);
    let mut fit = OlsFit {
        model: *model,
        alpha_hat,
        beta_ls,
        residuals,
        sse,
        sst,
        r_squared,
        leverages,
        cooks_d: Vec::new(),
        sigma2_hat,
        gram: xg.gram(),
        n,
    };
    fit.cooks_d = cooks_distance(&fit);
    Ok(fit)
}

/// Cook's distances with `k + 1` parameters (slopes plus intercept):
/// `D_i = e_i² h_i / ((k+1) σ̂² (1 - h_i)²)`.
///
/// Cases with zero residual get `D_i = 0`; cases with leverage 1 get `+∞`.
pub fn cooks_distance<T: Scalar>(fit: &OlsFit<T>) -> Vec<T> {
    let params = T::from_usize_lossy(fit.k() + 1);
    let lev_one = T::one() - T::epsilon() * T::lit(64.0);
    fit.residuals
        .iter()
        .zip(&fit.leverages)
        .map(|(&e, &h)| {
            if h >= lev_one {
                T::infinity()
            } else if e == T::zero() {
                T::zero()
            } else {
                let one_minus = T::one() - h;
                e * e * h / (params * fit.sigma2_hat * one_minus * one_minus)
            }
        })
        .collect()
}

/// Number of cases removed for a trimming fraction: `ceil(trim_frac · n)`.
pub fn trim_count(n: usize, trim_frac: f64) -> usize {
    // Shave rounding noise so that e.g. 0.1 · 30 trims 3 cases, not 4.
    let raw = trim_frac * n as f64;
    (raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize
}

/// Row indices kept after dropping the `trim_count` cases with the largest
/// Cook's distance. Ties are resolved by keeping the lower row index.
pub fn retained_rows<T: Scalar>(cooks_d: &[T], trim_frac: f64) -> Vec<usize> {
    let n = cooks_d.len();
    let m = trim_count(n, trim_frac);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cooks_d[b]
            .partial_cmp(&cooks_d[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.cmp(&a))
    });
    let mut kept: Vec<usize> = order[m..].to_vec();
    kept.sort_unstable();
    kept
}

/// OLS coefficients for `model` after trimming the most influential cases
/// and re-centering the retained rows.
pub fn robust_beta<T: Scalar>(
    data: &Dataset<T>,
    model: &ModelIndex,
    trim_frac: f64,
) -> Result<Vec<T>, BmaError> {
    if !(0.0..0.5).contains(&trim_frac) {
        return Err(BmaError::InvalidInput(format!(
            "trim fraction {trim_frac} outside [0, 0.5)"
        )));
    }
    let fit = ols_fit(data, model)?;
    robust_beta_from_fit(data, &fit, trim_frac)
}

/// As [`robust_beta`], reusing an existing full-data fit for the ranking.
pub fn robust_beta_from_fit<T: Scalar>(
    data: &Dataset<T>,
    fit: &OlsFit<T>,
    trim_frac: f64,
) -> Result<Vec<T>, BmaError> {
    let n = data.n();
    let k = fit.k();
    let removed = trim_count(n, trim_frac);
    if removed == 0 {
        return Ok(fit.beta_ls.clone());
    }
    if n - removed <= k + 1 {
        return Err(BmaError::InvalidInput(format!(
            "trimming {removed} of {n} cases leaves too few to fit {k} slopes"
        )));
    }
    let kept = retained_rows(&fit.cooks_d, trim_frac);
    let sub = data.subset(&kept)?;
    Ok(ols_fit(&sub, &fit.model)?.beta_ls)
}

/// `(a - b)ᵀ G (a - b)`, i.e. `||X_γ (a - b)||²` when `G = X_γᵀ X_γ`.
pub(crate) fn quad_distance<T: Scalar>(gram: &Matrix<T>, a: &[T], b: &[T]) -> T {
    let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    dot(&d, &gram.mat_vec(&d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Shifted-line data: X = -5..5, y = βX except the last case shifted
    /// by -K.
    fn shifted_line(beta: f64, k: f64) -> Dataset<f64> {
        let x: Vec<f64> = (0..11).map(|i| i as f64 - 5.0).collect();
        let mut y: Vec<f64> = x.iter().map(|v| beta * v).collect();
        y[10] -= k;
        Dataset::new(Matrix::from_columns(&[x]).unwrap(), y).unwrap()
    }

    #[test]
    fn centering_examples() {
        let (c, m) = center_columns(&Matrix::from_columns(&[vec![3.0, 3.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(c.column(0), vec![0.0; 3]);
        assert_eq!(m, vec![3.0]);
        let (c, m) = center_columns(&Matrix::from_columns(&[vec![1.0, 2.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(c.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(m, vec![2.0]);
        let d = shifted_line(0.5, 5.0);
        assert_eq!(d.col_means, vec![0.0]);
        assert_eq!(d.x_centered, d.x_raw);
        assert!(center_columns(&Matrix::<f64>::zeros(0, 0)).is_err());
    }

    #[test]
    fn shifted_line_slopes() {
        let full = ModelIndex::full(1);
        let b = ols_fit(&shifted_line(0.5, 5.0), &full).unwrap().beta_ls[0];
        assert!((b - 0.272_727_272_727_272_7).abs() < 1e-12);
        let b = ols_fit(&shifted_line(0.5, -5.0), &full).unwrap().beta_ls[0];
        assert!((b - (0.5 + 5.0 / 22.0)).abs() < 1e-12);
        let b = ols_fit(&shifted_line(2.0, 5.0), &full).unwrap().beta_ls[0];
        assert!((b - (2.0 - 5.0 / 22.0)).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_design_fails() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v + 1.0).collect();
        let d = Dataset::new(Matrix::from_columns(&[x1, x2]).unwrap(), vec![1.0, 0.0, 2.0, 1.0, 3.0]).unwrap();
        let err = ols_fit(&d, &ModelIndex::full(2)).unwrap_err();
        assert!(matches!(err, BmaError::SingularDesign(_)));
    }

    #[test]
    fn null_model_fit() {
        let d = shifted_line(0.5, 5.0);
        let fit = ols_fit(&d, &ModelIndex::null(1)).unwrap();
        assert_eq!(fit.k(), 0);
        assert_eq!(fit.r_squared, 0.0);
        assert!((fit.sse - fit.sst).abs() < 1e-12);
        assert!(fit.leverages.iter().all(|&h| (h - 1.0 / 11.0).abs() < 1e-15));
    }

    #[test]
    fn zero_residuals_give_zero_cooks_distance() {
        let x = vec![1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let d = Dataset::new(Matrix::from_columns(&[x]).unwrap(), y).unwrap();
        let fit = ols_fit(&d, &ModelIndex::full(1)).unwrap();
        // Residuals are zero up to rounding; force the exact case.
        let mut exact = fit.clone();
        exact.residuals = vec![0.0; 4];
        assert_eq!(cooks_distance(&exact), vec![0.0; 4]);
        let b = robust_beta(&d, &ModelIndex::full(1), 0.2).unwrap();
        assert!((b[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_line_outlier_is_most_influential_and_trimmed() {
        let d = shifted_line(0.5, -5.0);
        let fit = ols_fit(&d, &ModelIndex::full(1)).unwrap();
        let imax = (0..11)
            .max_by(|&a, &b| fit.cooks_d[a].partial_cmp(&fit.cooks_d[b]).unwrap())
            .unwrap();
        assert_eq!(imax, 10);
        assert_eq!(trim_count(11, 0.10), 2);
        let kept = retained_rows(&fit.cooks_d, 0.10);
        assert!(!kept.contains(&10));
        let b = robust_beta(&d, &ModelIndex::full(1), 0.10).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-12);
        let b0 = robust_beta(&d, &ModelIndex::full(1), 0.0).unwrap();
        assert_eq!(b0, fit.beta_ls);
    }

    #[test]
    fn trim_count_rounding() {
        assert_eq!(trim_count(100, 0.10), 10);
        assert_eq!(trim_count(30, 0.10), 3);
        assert_eq!(trim_count(31, 0.10), 4);
        assert_eq!(trim_count(50, 0.0), 0);
        assert_eq!(trim_count(5, 0.01), 1);
    }

    #[test]
    fn ties_keep_lower_index() {
        let d = vec![1.0, 5.0, 5.0, 0.5, 5.0];
        // Two removals among three tied maxima: rows 4 and 2 go.
        assert_eq!(retained_rows(&d, 0.4), vec![0, 1, 3]);
    }

    #[test]
    fn invalid_trim_fraction() {
        let d = shifted_line(0.5, 5.0);
        assert!(robust_beta(&d, &ModelIndex::full(1), 0.5).is_err());
        assert!(robust_beta(&d, &ModelIndex::full(1), -0.1).is_err());
    }

    #[test]
    fn single_precision_fit() {
        let x: Vec<f32> = (0..11).map(|i| i as f32 - 5.0).collect();
        let mut y: Vec<f32> = x.iter().map(|v| 0.5 * v).collect();
        y[10] -= 5.0;
        let d = Dataset::new(Matrix::from_columns(&[x]).unwrap(), y).unwrap();
        let b = ols_fit(&d, &ModelIndex::full(1)).unwrap().beta_ls[0];
        assert!((b - 0.272_727).abs() < 1e-5);
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (5usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn simple_regression_closed_form((x, y) in arb_instance()) {
            let xm = x.iter().sum::<f64>() / x.len() as f64;
            let ym = y.iter().sum::<f64>() / y.len() as f64;
            let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
            prop_assume!(sxx > 1e-3);
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
            let want = sxy / sxx;
            let d = Dataset::new(Matrix::from_columns(&[x]).unwrap(), y).unwrap();
            let fit = ols_fit(&d, &ModelIndex::full(1)).unwrap();
            prop_assert!((fit.beta_ls[0] - want).abs() <= 1e-10 * want.abs().max(1e-2));
            let rsum: f64 = fit.residuals.iter().sum();
            prop_assert!(rsum.abs() < 1e-8 * d.n() as f64 * 5.0);
            let hsum: f64 = fit.leverages.iter().sum();
            prop_assert!((hsum - 2.0).abs() < 1e-10);
            for &h in &fit.leverages {
                prop_assert!(h >= 1.0 / d.n() as f64 - 1e-12 && h <= 1.0 + 1e-12);
            }
            prop_assert!((fit.r_squared - (1.0 - fit.sse / fit.sst)).abs() < 1e-12);
        }

        #[test]
        fn r_squared_shift_invariant((x, y) in arb_instance(), shift in -100.0f64..100.0, scale in 0.1f64..10.0) {
            let d = Dataset::new(Matrix::from_columns(std::slice::from_ref(&x)).unwrap(), y.clone()).unwrap();
            prop_assume!(d.sst() > 1e-6);
            let base = ols_fit(&d, &ModelIndex::full(1));
            prop_assume!(base.is_ok());
            let r0 = base.unwrap().r_squared;
            let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let r1 = ols_fit(&Dataset::new(Matrix::from_columns(std::slice::from_ref(&x)).unwrap(), ys).unwrap(), &ModelIndex::full(1)).unwrap().r_squared;
            prop_assert!((r0 - r1).abs() < 1e-9);
            let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let r2 = ols_fit(&Dataset::new(Matrix::from_columns(&[x]).unwrap(), ys).unwrap(), &ModelIndex::full(1)).unwrap().r_squared;
            prop_assert!((0.0..=1.0).contains(&r2));
        }
    }
}
