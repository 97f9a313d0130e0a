//! Small dense row-major matrix type and the factorizations the estimators need.

use std::ops::{Index, IndexMut, Mul};

use crate::error::{PanelError, Result};
use crate::scalar::Scalar;

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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows. An empty slice gives a 0×0 matrix.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Horizontal concatenation.
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hcat needs equal row counts");
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + x * vi;
            }
        }
        out
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Self {
        let k = self.cols;
        let mut g = Self::zeros(k, k);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..k {
                for b in a..k {
                    g[(a, b)] = g[(a, b)] + r[a] * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let half = T::of(0.5);
        for a in 0..self.rows {
            for b in 0..a {
                let v = (self[(a, b)] + self[(b, a)]) * half;
                self[(a, b)] = v;
                self[(b, a)] = v;
            }
        }
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    /// Inverse of a symmetric positive definite matrix through its Cholesky factor.
    pub fn inverse_spd(&self) -> Result<Self> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
                return Err(PanelError::RankDeficient { column: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        let l_inv = lower_triangular_inverse(&l);
        Ok(&l_inv.transpose() * &l_inv)
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut a = self.clone();
        a.symmetrize();
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            let mut total = T::zero();
            for p in 0..n {
                for q in 0..n {
                    let v = a[(p, q)] * a[(p, q)];
                    total = total + v;
                    if p != q {
                        off = off + v;
                    }
                }
            }
            if off <= eps * eps * total || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev = a.diagonal();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

fn lower_triangular_inverse<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    let n = l.nrows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = T::one() / l[(j, j)];
        for i in j + 1..n {
            let mut s = T::zero();
            for k in j..i {
                s = s + l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

fn upper_triangular_inverse<T: Scalar>(r: &Matrix<T>) -> Matrix<T> {
    lower_triangular_inverse(&r.transpose()).transpose()
}

/// Householder QR factorization of a tall matrix, `A = Q R`.
///
/// `Q` is kept implicitly as the sequence of reflectors.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    /// Householder vectors below the diagonal, `R` on and above it.
    packed: Matrix<T>,
    tau: Vec<T>,
    r_diag: Vec<T>,
}

impl<T: Scalar> Qr<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let mut qr = a.clone();
        let mut tau = vec![T::zero(); n];
        let mut r_diag = vec![T::zero(); n];
        for k in 0..n.min(m) {
            let mut norm = T::zero();
            for i in k..m {
                norm = norm.hypot(qr[(i, k)]);
            }
            if norm == T::zero() {
                continue;
            }
            let alpha = if qr[(k, k)] > T::zero() { -norm } else { norm };
            // v = x - alpha e1, stored with v[k] normalized to 1
            let v0 = qr[(k, k)] - alpha;
            for i in k + 1..m {
                qr[(i, k)] = qr[(i, k)] / v0;
            }
            tau[k] = -v0 / alpha;
            r_diag[k] = alpha;
            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s = s + qr[(i, k)] * qr[(i, j)];
                }
                s = s * tau[k];
                qr[(k, j)] = qr[(k, j)] - s;
                for i in k + 1..m {
                    qr[(i, j)] = qr[(i, j)] - s * qr[(i, k)];
                }
            }
            qr[(k, k)] = alpha;
        }
        Self {
            packed: qr,
            tau,
            r_diag,
        }
    }

    pub fn r_diagonal(&self) -> &[T] {
        &self.r_diag
    }

    /// First column whose triangular diagonal falls below `tol` times the
    /// largest diagonal magnitude.
    pub fn rank_deficient_column(&self, tol: T) -> Option<usize> {
        let largest = self
            .r_diag
            .iter()
            .fold(T::zero(), |acc, &d| acc.max(d.abs()));
        if largest == T::zero() {
            return if self.r_diag.is_empty() { None } else { Some(0) };
        }
        self.r_diag.iter().position(|&d| d.abs() < tol * largest)
    }

    /// `Qᵀ b`.
    pub fn qt_mul(&self, b: &[T]) -> Vec<T> {
        let (m, n) = (self.packed.nrows(), self.packed.ncols());
        assert_eq!(b.len(), m);
        let mut y = b.to_vec();
        for k in 0..n.min(m) {
            if self.tau[k] == T::zero() {
                continue;
            }
            let mut s = y[k];
            for i in k + 1..m {
                s = s + self.packed[(i, k)] * y[i];
            }
            s = s * self.tau[k];
            y[k] = y[k] - s;
            for i in k + 1..m {
                y[i] = y[i] - s * self.packed[(i, k)];
            }
        }
        y
    }

    pub fn r(&self) -> Matrix<T> {
        let n = self.packed.ncols();
        let mut r = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] = self.packed[(i, j)];
            }
        }
        r
    }

    /// Least-squares solution of `A x = b`; assumes full column rank.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.packed.ncols();
        let qtb = self.qt_mul(b);
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = qtb[i];
            for j in i + 1..n {
                s = s - self.packed[(i, j)] * x[j];
            }
            x[i] = s / self.packed[(i, i)];
        }
        x
    }

    /// `(AᵀA)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn normal_inverse(&self) -> Matrix<T> {
        let r_inv = upper_triangular_inverse(&self.r());
        let mut out = &r_inv * &r_inv.transpose();
        out.symmetrize();
        out
    }
}
