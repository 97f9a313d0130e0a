//! Specification tests: Honda effects test, Breusch-Pagan, the first-difference
//! serial-correlation test, and the auxiliary-regression Hausman test.
//!
//! Every auxiliary regression goes through [`ols_fit`]; test statistics are
//! reported in `f64` whatever the scalar type of the fit.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::dist::{chi_squared_upper, normal_upper, student_t_two_sided};
use crate::error::{PanelError, Result};
use crate::estimators::{quasi_demean, ModelSpec, RegressionResult};
use crate::linalg::Matrix;
use crate::ols::{ols_fit, r_squared, Design, RowKey};
use crate::panel::PanelDataset;
use crate::scalar::Scalar;
use crate::vcov::vcov_arellano;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullDistribution {
    /// Upper tail of N(0, 1).
    StandardNormalOneSided,
    ChiSquared(usize),
    StudentT(usize),
}

impl fmt::Display for NullDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullDistribution::StandardNormalOneSided => write!(f, "N(0,1) upper"),
            NullDistribution::ChiSquared(df) => write!(f, "chi2({df})"),
            NullDistribution::StudentT(df) => write!(f, "t({df})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: &'static str,
    pub statistic: f64,
    pub distribution: NullDistribution,
    pub p_value: f64,
    pub variant: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Individual,
    Time,
}

impl Effect {
    fn as_str(self) -> &'static str {
        match self {
            Effect::Individual => "individual",
            Effect::Time => "time",
        }
    }
}

/// Honda LM test of individual or time effects from pooled residuals.
pub fn honda_lm<T: Scalar>(pooled: &RegressionResult<T>, effect: Effect) -> Result<TestResult> {
    let residuals: Vec<(RowKey, T)> = pooled.residuals().collect();
    honda_from_residuals(&residuals, effect)
}

/// Honda statistic on keyed residuals, grouping by unit or by period.
///
/// For unbalanced groups the scaling is `(Σ T_g)² / (2 Σ T_g (T_g − 1))`,
/// which reduces to `NT / (2(T − 1))` on a balanced panel.
pub fn honda_from_residuals<T: Scalar>(residuals: &[(RowKey, T)], effect: Effect) -> Result<TestResult> {
    let mut groups: BTreeMap<i64, (T, usize)> = BTreeMap::new();
    let mut ssr = T::zero();
    for &((u, t), e) in residuals {
        let g = match effect {
            Effect::Individual => u as i64,
            Effect::Time => t as i64,
        };
        let entry = groups.entry(g).or_insert((T::zero(), 0));
        entry.0 = entry.0 + e;
        entry.1 += 1;
        ssr = ssr + e * e;
    }
    if groups.len() < 2 {
        return Err(PanelError::TooFewGroups(groups.len()));
    }
    let pairs: usize = groups.values().map(|&(_, n)| n * (n - 1)).sum();
    if pairs == 0 {
        return Err(PanelError::TooFewGroups(0));
    }
    let between: T = groups.values().map(|&(s, _)| s * s).sum();
    let a = between / ssr - T::one();
    let total = residuals.len() as f64;
    let scale = (total * total / (2.0 * pairs as f64)).sqrt();
    let statistic = scale * a.as_f64();
    Ok(TestResult {
        name: "honda",
        statistic,
        distribution: NullDistribution::StandardNormalOneSided,
        p_value: normal_upper(statistic),
        variant: effect.as_str(),
    })
}

/// Studentized Breusch-Pagan test: `n R²` of squared residuals on `design`
/// plus an intercept, referred to chi-squared with `design.ncols()` df.
pub fn breusch_pagan_het<T: Scalar>(fit: &RegressionResult<T>, design: &Matrix<T>) -> Result<TestResult> {
    let e2: Vec<T> = fit.fit.residuals.iter().map(|&e| e * e).collect();
    let df = design.ncols();
    let aux = ols_fit(&Design::unkeyed(design.clone()), &e2, true, 0)?;
    let statistic = match r_squared(&aux, &e2, true) {
        Ok(r2) => (T::of_usize(e2.len()) * r2.max(T::zero())).as_f64(),
        Err(PanelError::ZeroTotalVariation) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(TestResult {
        name: "breusch-pagan",
        statistic,
        distribution: NullDistribution::ChiSquared(df),
        p_value: chi_squared_upper(statistic, df as f64),
        variant: fit.spec.estimator.as_str(),
    })
}

/// [`breusch_pagan_het`] on the fit's own transformed regressors.
pub fn breusch_pagan<T: Scalar>(fit: &RegressionResult<T>) -> Result<TestResult> {
    breusch_pagan_het(fit, &fit.regressor_matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerialNull {
    /// Differenced errors uncorrelated: `ρ = 0`.
    FdUncorrelated,
    /// Level errors uncorrelated, so differenced errors have `ρ = −0.5`.
    LevelsUncorrelated,
}

impl SerialNull {
    pub fn rho(self) -> f64 {
        match self {
            SerialNull::FdUncorrelated => 0.0,
            SerialNull::LevelsUncorrelated => -0.5,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SerialNull::FdUncorrelated => "fd-null",
            SerialNull::LevelsUncorrelated => "levels-null",
        }
    }
}

/// Serial-correlation test on first-difference residuals.
///
/// Regresses `ê_{i,t}` on `ê_{i,t−1}` (same unit, adjacent periods, no
/// intercept) and tests the slope against the null value with a
/// cluster-by-unit standard error.
pub fn wooldridge_fd_serial<T: Scalar>(fd_fit: &RegressionResult<T>, null: SerialNull) -> Result<TestResult> {
    let lookup: HashMap<RowKey, T> = fd_fit.residuals().collect();
    let mut current = Vec::new();
    let mut previous = Vec::new();
    let mut keys = Vec::new();
    for ((u, t), e) in fd_fit.residuals() {
        if let Some(&prev) = lookup.get(&(u, t - 1)) {
            current.push(e);
            previous.push(prev);
            keys.push((u, t));
        }
    }
    if current.len() < 2 {
        return Err(PanelError::NoConsecutivePairs);
    }
    let groups: Vec<usize> = keys.iter().map(|k| k.0).collect();
    let design = Design::new(Matrix::from_columns(&[previous]), keys);
    let aux = ols_fit(&design, &current, false, 0)?;
    let cov = vcov_arellano(&aux, &groups, fd_fit.spec.correction)?;
    let clusters = cov.cluster_count.unwrap_or(2);
    let df = clusters - 1;
    let rho = aux.coefficients[0].as_f64();
    let se = cov.standard_errors()[0].as_f64();
    let diff = rho - null.rho();
    // an exact auxiliary fit leaves only rounding noise in the residuals
    let scale: T = current.iter().map(|&e| e * e).sum();
    let exact = aux.ssr() <= T::epsilon() * T::epsilon() * scale;
    let (statistic, p_value) = if exact || se == 0.0 {
        if diff.abs() <= 1e-10 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY * diff.signum(), 0.0)
        }
    } else {
        let t = diff / se;
        (t, student_t_two_sided(t, df as f64))
    };
    Ok(TestResult {
        name: "wooldridge-fd",
        statistic,
        distribution: NullDistribution::StudentT(df),
        p_value,
        variant: null.as_str(),
    })
}

/// Auxiliary-regression Hausman test of random against fixed effects.
///
/// Quasi-demeaned `y` is regressed on the quasi-demeaned constant and
/// regressors together with the unit-demeaned regressors; the demeaned block
/// is tested jointly with a cluster-robust Wald statistic.
pub fn hausman_aux<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<TestResult> {
    let q = quasi_demean(ds, spec)?;
    let m = q.x_within.ncols();
    let design = Design::new(q.x.hcat(&q.x_within), q.keys.clone());
    let aux = ols_fit(&design, &q.y, false, 0)?;
    let groups: Vec<usize> = q.keys.iter().map(|k| k.0).collect();
    let cov = vcov_arellano(&aux, &groups, spec.correction)?;
    let idx: Vec<usize> = (q.x.ncols()..q.x.ncols() + m).collect();
    let block = cov.matrix.submatrix(&idx);
    let inv = block.inverse_spd()?;
    let gamma: Vec<T> = idx.iter().map(|&i| aux.coefficients[i]).collect();
    let inv_gamma = inv.mul_vec(&gamma);
    let statistic = gamma.iter().zip(&inv_gamma).map(|(&a, &b)| a * b).sum::<T>().as_f64();
    Ok(TestResult {
        name: "hausman",
        statistic,
        distribution: NullDistribution::ChiSquared(m),
        p_value: chi_squared_upper(statistic, m as f64),
        variant: "auxiliary",
    })
}
