//! Coefficient covariance estimators and the inference built on them.

use std::collections::BTreeMap;

use crate::dist::student_t_two_sided;
use crate::error::{PanelError, Result};
use crate::linalg::Matrix;
use crate::ols::OlsFit;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceKind {
    /// `s² (XᵀX)⁻¹`.
    Classical,
    /// Cluster-by-unit sandwich.
    Arellano,
}

impl CovarianceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceKind::Classical => "classical",
            CovarianceKind::Arellano => "arellano",
        }
    }
}

impl std::str::FromStr for CovarianceKind {
    type Err = PanelError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Self::Classical),
            "arellano" => Ok(Self::Arellano),
            other => Err(PanelError::Config(format!("unknown vcov `{other}`"))),
        }
    }
}

/// Small-sample scaling applied to the cluster sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterCorrection {
    /// Plain sandwich (HC0 flavour).
    #[default]
    None,
    /// `G/(G−1) · (n−1)/(n−k)`.
    FiniteCluster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate<T> {
    pub matrix: Matrix<T>,
    pub kind: CovarianceKind,
    /// Number of clusters; `None` for the classical estimator.
    pub cluster_count: Option<usize>,
}

impl<T: Scalar> CovarianceEstimate<T> {
    pub fn standard_errors(&self) -> Vec<T> {
        self.matrix.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect()
    }

    /// Fails when the smallest eigenvalue is below `−1e-10 · trace`.
    pub fn check_psd(&self) -> Result<()> {
        let ev = self.matrix.symmetric_eigenvalues();
        let min = ev.first().copied().unwrap_or_else(T::zero);
        let trace = self.matrix.trace().abs();
        if min < -T::of(1e-10) * trace {
            return Err(PanelError::NotPositiveSemidefinite {
                min_eigenvalue: min.as_f64(),
            });
        }
        Ok(())
    }
}

pub fn vcov_classical<T: Scalar>(fit: &OlsFit<T>) -> Result<CovarianceEstimate<T>> {
    if fit.df_residual == 0 {
        return Err(PanelError::ZeroDf);
    }
    let s2 = fit.ssr() / T::of_usize(fit.df_residual);
    Ok(CovarianceEstimate {
        matrix: fit.normal_inverse.scale(s2),
        kind: CovarianceKind::Classical,
        cluster_count: None,
    })
}

/// Cluster-robust sandwich `(XᵀX)⁻¹ [Σ_g X_gᵀ ê_g ê_gᵀ X_g] (XᵀX)⁻¹` with one
/// cluster per distinct label in `groups`.
pub fn vcov_arellano<T: Scalar>(
    fit: &OlsFit<T>,
    groups: &[usize],
    correction: ClusterCorrection,
) -> Result<CovarianceEstimate<T>> {
    let n = fit.n_obs();
    if groups.len() != n {
        return Err(PanelError::MisalignedGroups {
            groups: groups.len(),
            rows: n,
        });
    }
    let k = fit.design.ncols();
    // BTreeMap keeps the summation order independent of hashing
    let mut scores: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        let s = scores.entry(g).or_insert_with(|| vec![T::zero(); k]);
        let e = fit.residuals[i];
        for (acc, &x) in s.iter_mut().zip(fit.design.row(i)) {
            *acc = *acc + x * e;
        }
    }
    let clusters = scores.len();
    if clusters < 2 {
        return Err(PanelError::SingleCluster);
    }
    let mut meat = Matrix::zeros(k, k);
    for s in scores.values() {
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] = meat[(a, b)] + s[a] * s[b];
            }
        }
    }
    let bread = &fit.normal_inverse;
    let mut matrix = &(bread * &meat) * bread;
    if correction == ClusterCorrection::FiniteCluster {
        let g = T::of_usize(clusters);
        let c = g / (g - T::one()) * T::of_usize(n - 1) / T::of_usize(n - k);
        matrix = matrix.scale(c);
    }
    matrix.symmetrize();
    Ok(CovarianceEstimate {
        matrix,
        kind: CovarianceKind::Arellano,
        cluster_count: Some(clusters),
    })
}

/// Standard error, t-statistic and two-sided p-value of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefInference<T> {
    pub se: T,
    pub t: T,
    pub p: T,
    /// Set when the standard error is zero; `p` then follows the 0/1 convention.
    pub zero_se: bool,
}

pub fn coef_inference<T: Scalar>(
    coefs: &[T],
    cov: &CovarianceEstimate<T>,
    df: usize,
) -> Result<Vec<CoefInference<T>>> {
    if cov.matrix.nrows() != coefs.len() {
        return Err(PanelError::InvalidArgument(format!(
            "{} coefficients but a {}x{} covariance",
            coefs.len(),
            cov.matrix.nrows(),
            cov.matrix.ncols()
        )));
    }
    if df == 0 {
        return Err(PanelError::ZeroDf);
    }
    Ok(coefs
        .iter()
        .zip(cov.standard_errors())
        .map(|(&b, se)| {
            if se == T::zero() {
                let (t, p) = if b == T::zero() {
                    (T::zero(), T::one())
                } else {
                    (T::infinity() * b.signum(), T::zero())
                };
                CoefInference { se, t, p, zero_se: true }
            } else {
                let t = b / se;
                let p = T::of(student_t_two_sided(t.as_f64(), df as f64));
                CoefInference { se, t, p, zero_se: false }
            }
        })
        .collect())
}
