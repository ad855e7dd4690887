//! Small dense linear algebra: a row-major matrix and a Householder QR
//! factorization used for least squares.

use crate::error::BmaError;
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, BmaError> {
        if data.len() != rows * cols {
            return Err(BmaError::InvalidInput(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, BmaError> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(BmaError::InvalidInput(format!(
                    "row {i} has {} entries, expected {p}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, cols: p, data })
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self, BmaError> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n, p);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(BmaError::InvalidInput(format!(
                    "column {j} has {} entries, expected {n}",
                    c.len()
                )));
            }
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Submatrix with the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`.
    pub fn tr_mat_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                for b in a..self.cols {
                    g[(a, b)] += r[a] * r[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// Quadratic form `vᵀ A v` for square `A`.
    pub fn quad_form(&self, v: &[T]) -> T {
        dot(v, &self.mat_vec(v))
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// Thin QR factorization `A = Q R` of a tall matrix (`n ≥ k`) computed with
/// Householder reflections. `Q` is `n × k` with orthonormal columns and `R`
/// is `k × k` upper triangular.
#[derive(Debug, Clone)]
pub struct ThinQr<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
}

impl<T: Scalar> ThinQr<T> {
    /// Factorizes `a`, failing with [`BmaError::SingularDesign`] when a
    /// diagonal entry of `R` is negligible relative to its column norm.
    pub fn factor(a: &Matrix<T>) -> Result<Self, BmaError> {
        let n = a.nrows();
        let k = a.ncols();
        if n < k {
            return Err(BmaError::SingularDesign(format!(
                "{n} rows cannot determine {k} coefficients"
            )));
        }
        let col_norms: Vec<T> = (0..k)
            .map(|j| norm_sq(&a.column(j)).sqrt())
            .collect();
        let tol = T::epsilon().sqrt() * T::lit(1e-2);

        // Work column-major for the reflections.
        let mut w: Vec<Vec<T>> = (0..k).map(|j| a.column(j)).collect();
        let mut vs: Vec<Vec<T>> = Vec::with_capacity(k);
        for j in 0..k {
            let x = &w[j][j..];
            let alpha = norm_sq(x).sqrt();
            if alpha <= tol * col_norms[j] || alpha == T::zero() {
                return Err(BmaError::SingularDesign(format!(
                    "column {j} is (numerically) a linear combination of earlier columns"
                )));
            }
            let sign = if x[0] >= T::zero() { T::one() } else { -T::one() };
            let mut v: Vec<T> = x.to_vec();
            v[0] += sign * alpha;
            let vnorm = norm_sq(&v).sqrt();
            for e in &mut v {
                *e /= vnorm;
            }
            for col in w.iter_mut().skip(j) {
                let tail = &mut col[j..];
                let d = dot(&v, tail);
                let two_d = d + d;
                for (t, &vi) in tail.iter_mut().zip(&v) {
                    *t -= two_d * vi;
                }
            }
            vs.push(v);
        }

        let mut r = Matrix::zeros(k, k);
        for (j, col) in w.iter().enumerate() {
            for i in 0..=j {
                r[(i, j)] = col[i];
            }
        }

        // Q = H_0 H_1 ... H_{k-1} applied to the first k unit vectors.
        let mut q = Matrix::zeros(n, k);
        for c in 0..k {
            let mut e = vec![T::zero(); n];
            e[c] = T::one();
            for j in (0..k).rev() {
                let v = &vs[j];
                let tail = &mut e[j..];
                let d = dot(v, tail);
                let two_d = d + d;
                for (t, &vi) in tail.iter_mut().zip(v) {
                    *t -= two_d * vi;
                }
            }
            for i in 0..n {
                q[(i, c)] = e[i];
            }
        }
        Ok(Self { q, r })
    }

    /// Least-squares solution of `A x ≈ b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let qtb = self.q.tr_mat_vec(b);
        back_substitute(&self.r, &qtb)
    }
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn back_substitute<T: Scalar>(r: &Matrix<T>, b: &[T]) -> Vec<T> {
    let k = r.nrows();
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in i + 1..k {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}
