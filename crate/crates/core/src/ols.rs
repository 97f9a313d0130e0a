//! Ordinary least squares through a Householder QR factorization.

use crate::error::{PanelError, Result};
use crate::linalg::{Matrix, Qr};
use crate::panel::Period;
use crate::scalar::Scalar;

/// `(unit index, period)` of one regression row.
pub type RowKey = (usize, Period);

/// Regressor matrix plus the panel key of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub x: Matrix<T>,
    pub keys: Vec<RowKey>,
}

impl<T: Scalar> Design<T> {
    pub fn new(x: Matrix<T>, keys: Vec<RowKey>) -> Self {
        assert_eq!(x.nrows(), keys.len(), "one key per design row");
        Self { x, keys }
    }

    /// Design without meaningful keys; every row gets its own unit index.
    pub fn unkeyed(x: Matrix<T>) -> Self {
        let keys = (0..x.nrows()).map(|i| (i, 0)).collect();
        Self { x, keys }
    }

    pub fn units(&self) -> Vec<usize> {
        self.keys.iter().map(|k| k.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    /// Intercept first when the fit has one.
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    pub fitted: Vec<T>,
    /// `(XᵀX)⁻¹` of the full design, intercept column included.
    pub normal_inverse: Matrix<T>,
    pub df_residual: usize,
    pub row_keys: Vec<RowKey>,
    /// The design actually used, intercept column included.
    pub design: Matrix<T>,
    pub intercept: bool,
}

impl<T: Scalar> OlsFit<T> {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn ssr(&self) -> T {
        self.residuals.iter().map(|&e| e * e).sum()
    }
}

/// Least-squares fit of `y` on the columns of `design` (and an intercept when asked).
///
/// `df_adjust` is subtracted from the residual degrees of freedom on top of
/// the column count; within fits pass the number of absorbed unit means.
pub fn ols_fit<T: Scalar>(design: &Design<T>, y: &[T], intercept: bool, df_adjust: usize) -> Result<OlsFit<T>> {
    let n = design.x.nrows();
    assert_eq!(n, y.len(), "design rows and dependent length differ");
    let x = if intercept {
        Matrix::from_columns(&[vec![T::one(); n]]).hcat(&design.x)
    } else {
        design.x.clone()
    };
    let k = x.ncols();
    if k == 0 || n <= k + df_adjust {
        return Err(PanelError::InsufficientRows {
            rows: n,
            needed: k + df_adjust,
        });
    }
    let qr = Qr::new(&x);
    if let Some(column) = qr.rank_deficient_column(T::rank_tolerance()) {
        return Err(PanelError::RankDeficient { column });
    }
    let coefficients = qr.solve(y);
    let fitted = x.mul_vec(&coefficients);
    let residuals = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    Ok(OlsFit {
        coefficients,
        residuals,
        fitted,
        normal_inverse: qr.normal_inverse(),
        df_residual: n - k - df_adjust,
        row_keys: design.keys.clone(),
        design: x,
        intercept,
    })
}

/// Centered (`1 − SSR/Σ(y−ȳ)²`) or uncentered (`1 − SSR/Σy²`) coefficient of determination.
pub fn r_squared<T: Scalar>(fit: &OlsFit<T>, y: &[T], centered: bool) -> Result<T> {
    let tss: T = if centered {
        let mean = y.iter().copied().sum::<T>() / T::of_usize(y.len());
        y.iter().map(|&v| (v - mean) * (v - mean)).sum()
    } else {
        y.iter().map(|&v| v * v).sum()
    };
    if tss == T::zero() {
        return Err(PanelError::ZeroTotalVariation);
    }
    Ok(T::one() - fit.ssr() / tss)
}
