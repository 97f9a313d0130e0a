//! Panel estimators: pooled levels, first differences, within, and the
//! random-effects quasi-demeaning used by the auxiliary Hausman regression.

use std::collections::{BTreeMap, HashMap};

use crate::error::{PanelError, Result};
use crate::linalg::Matrix;
use crate::ols::{ols_fit, r_squared, Design, OlsFit, RowKey};
use crate::panel::{within_demean, KeyedRows, PanelDataset, SeriesView};
use crate::scalar::Scalar;
use crate::vcov::{coef_inference, vcov_arellano, vcov_classical, ClusterCorrection, CovarianceEstimate, CovarianceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Pooled,
    FirstDifferences,
    Within,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Pooled => "pooled",
            Estimator::FirstDifferences => "fd",
            Estimator::Within => "within",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub dependent: String,
    pub regressors: Vec<String>,
    /// Lag applied to every regressor; the study uses one year.
    pub lag: usize,
    pub estimator: Estimator,
    pub vcov: CovarianceKind,
    pub correction: ClusterCorrection,
}

impl ModelSpec {
    pub fn new(dependent: &str, regressors: &[&str], lag: usize, estimator: Estimator) -> Self {
        Self {
            dependent: dependent.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            lag,
            estimator,
            vcov: CovarianceKind::Arellano,
            correction: ClusterCorrection::None,
        }
    }

    pub fn with_vcov(mut self, vcov: CovarianceKind) -> Self {
        self.vcov = vcov;
        self
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(PanelError::InvalidArgument("model needs at least one regressor".into()));
        }
        if self.regressors.contains(&self.dependent) {
            return Err(PanelError::InvalidArgument(format!(
                "dependent `{}` is also a regressor",
                self.dependent
            )));
        }
        Ok(())
    }
}

/// Transformed dependent vector and regressor matrix, one row per surviving key.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFrame<T> {
    pub y: Vec<T>,
    pub x: Matrix<T>,
    pub keys: Vec<RowKey>,
}

impl<T: Scalar> ModelFrame<T> {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn design(&self) -> Design<T> {
        Design::new(self.x.clone(), self.keys.clone())
    }

    /// Number of rows per unit index, in unit order.
    pub fn unit_sizes(&self) -> BTreeMap<usize, usize> {
        let mut sizes = BTreeMap::new();
        for &(u, _) in &self.keys {
            *sizes.entry(u).or_insert(0) += 1;
        }
        sizes
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            x: self.x.select_rows(idx),
            keys: idx.iter().map(|&i| self.keys[i]).collect(),
        }
    }

    /// Drops units that contribute a single row.
    fn without_singletons(&self) -> Self {
        let sizes = self.unit_sizes();
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| sizes[&self.keys[i].0] >= 2).collect();
        self.select(&idx)
    }

    /// Unit-demeaned copy of the dependent and every regressor.
    pub fn demeaned(&self) -> Self {
        let rows = KeyedRows {
            units: self.keys.iter().map(|k| k.0).collect(),
            values: (0..self.n_rows())
                .map(|i| std::iter::once(self.y[i]).chain(self.x.row(i).iter().copied()).collect())
                .collect(),
        };
        let out = within_demean(&rows);
        let k = self.x.ncols();
        Self {
            y: out.values.iter().map(|r| r[0]).collect(),
            x: Matrix::from_row_major(
                self.n_rows(),
                k,
                out.values.iter().flat_map(|r| r[1..].iter().copied()).collect(),
            ),
            keys: self.keys.clone(),
        }
    }
}

/// Inner join on `(unit, period)`: rows of `y` for which every regressor view
/// has a value. Listwise deletion happens here, after all transforms.
fn join<T: Scalar>(y: SeriesView<T>, xs: &[SeriesView<T>]) -> ModelFrame<T> {
    let maps: Vec<HashMap<RowKey, T>> = xs.iter().map(SeriesView::to_map).collect();
    let mut ys = Vec::new();
    let mut data = Vec::new();
    let mut keys = Vec::new();
    for (u, t, v) in y.rows {
        let row: Option<Vec<T>> = maps.iter().map(|m| m.get(&(u, t)).copied()).collect();
        if let Some(row) = row {
            ys.push(v);
            data.extend(row);
            keys.push((u, t));
        }
    }
    ModelFrame {
        x: Matrix::from_row_major(ys.len(), xs.len(), data),
        y: ys,
        keys,
    }
}

fn lagged<T: Scalar>(ds: &PanelDataset<T>, var: &str, lag: usize) -> Result<SeriesView<T>> {
    let s = ds.series(var)?;
    Ok(if lag == 0 { s } else { ds.lag_view(&s, lag) })
}

/// Dependent in levels at `t`, regressors at `t − lag`.
pub fn levels_frame<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<ModelFrame<T>> {
    spec.validate()?;
    let y = ds.series(&spec.dependent)?;
    let xs = spec
        .regressors
        .iter()
        .map(|r| lagged(ds, r, spec.lag))
        .collect::<Result<Vec<_>>>()?;
    Ok(join(y, &xs))
}

/// `y_t − y_{t−1}` on `x_{t−lag} − x_{t−lag−1}`.
pub fn first_difference_frame<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<ModelFrame<T>> {
    spec.validate()?;
    let y = ds.difference_series(&spec.dependent)?;
    let xs = spec
        .regressors
        .iter()
        .map(|r| Ok(ds.difference_view(&lagged(ds, r, spec.lag)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(join(y, &xs))
}

/// Levels frame restricted to units with at least two rows, then unit-demeaned.
/// Returns the demeaned frame and the number of retained units.
pub fn within_frame<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<(ModelFrame<T>, usize)> {
    let levels = levels_frame(ds, spec)?;
    if levels.n_rows() == 0 {
        return Err(PanelError::EmptyAfterTransforms);
    }
    let kept = levels.without_singletons();
    if kept.n_rows() == 0 {
        return Err(PanelError::UnitTooShort);
    }
    let units = kept.unit_sizes().len();
    Ok((kept.demeaned(), units))
}

/// Fitted panel model with inference under the requested covariance.
#[derive(Debug, Clone)]
pub struct RegressionResult<T> {
    pub spec: ModelSpec,
    /// `intercept` first when present, then the regressor names.
    pub names: Vec<String>,
    pub coefficients: Vec<T>,
    pub covariance: CovarianceEstimate<T>,
    pub standard_errors: Vec<T>,
    pub t_stats: Vec<T>,
    pub p_values: Vec<T>,
    pub r_squared: T,
    pub n_obs: usize,
    pub n_units: usize,
    pub df_residual: usize,
    pub fit: OlsFit<T>,
    /// Dependent vector the fit was computed on (after transforms).
    pub y: Vec<T>,
}

impl<T: Scalar> RegressionResult<T> {
    /// Residuals keyed by `(unit index, period)`.
    pub fn residuals(&self) -> impl Iterator<Item = (RowKey, T)> + '_ {
        self.fit.row_keys.iter().copied().zip(self.fit.residuals.iter().copied())
    }

    pub fn units(&self) -> Vec<usize> {
        self.fit.row_keys.iter().map(|k| k.0).collect()
    }

    /// Covariance of the given kind, recomputed from the stored fit.
    pub fn covariance_of(&self, kind: CovarianceKind) -> Result<CovarianceEstimate<T>> {
        match kind {
            CovarianceKind::Classical => vcov_classical(&self.fit),
            CovarianceKind::Arellano => vcov_arellano(&self.fit, &self.units(), self.spec.correction),
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    /// Transformed regressors without the intercept column.
    pub fn regressor_matrix(&self) -> Matrix<T> {
        if self.fit.intercept {
            let cols: Vec<Vec<T>> = (1..self.fit.design.ncols()).map(|j| self.fit.design.column(j)).collect();
            Matrix::from_columns(&cols)
        } else {
            self.fit.design.clone()
        }
    }
}

fn finish<T: Scalar>(
    spec: &ModelSpec,
    frame: &ModelFrame<T>,
    intercept: bool,
    df_adjust: usize,
    n_units: usize,
) -> Result<RegressionResult<T>> {
    let fit = ols_fit(&frame.design(), &frame.y, intercept, df_adjust)?;
    let r2 = r_squared(&fit, &frame.y, true)?;
    let units: Vec<usize> = frame.keys.iter().map(|k| k.0).collect();
    let covariance = match spec.vcov {
        CovarianceKind::Classical => vcov_classical(&fit)?,
        CovarianceKind::Arellano => vcov_arellano(&fit, &units, spec.correction)?,
    };
    let inference = coef_inference(&fit.coefficients, &covariance, fit.df_residual)?;
    let mut names = Vec::new();
    if intercept {
        names.push("intercept".to_string());
    }
    names.extend(spec.regressors.iter().cloned());
    Ok(RegressionResult {
        spec: spec.clone(),
        names,
        coefficients: fit.coefficients.clone(),
        standard_errors: inference.iter().map(|c| c.se).collect(),
        t_stats: inference.iter().map(|c| c.t).collect(),
        p_values: inference.iter().map(|c| c.p).collect(),
        covariance,
        r_squared: r2,
        n_obs: fit.n_obs(),
        n_units,
        df_residual: fit.df_residual,
        y: frame.y.clone(),
        fit,
    })
}

fn require_rows<T: Scalar>(frame: &ModelFrame<T>, spec: &ModelSpec) -> Result<()> {
    if frame.n_rows() == 0 {
        return Err(PanelError::EmptyAfterTransforms);
    }
    let needed = spec.regressors.len() + 1;
    if frame.n_rows() <= needed {
        return Err(PanelError::InsufficientRows {
            rows: frame.n_rows(),
            needed,
        });
    }
    Ok(())
}

/// Levels OLS with intercept, ignoring the panel structure.
pub fn fit_pooled<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<RegressionResult<T>> {
    let frame = levels_frame(ds, spec)?;
    require_rows(&frame, spec)?;
    let units = frame.unit_sizes().len();
    finish(spec, &frame, true, 0, units)
}

/// First-differences estimator with intercept.
pub fn fit_first_differences<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<RegressionResult<T>> {
    let frame = first_difference_frame(ds, spec)?;
    require_rows(&frame, spec)?;
    let units = frame.unit_sizes().len();
    finish(spec, &frame, true, 0, units)
}

/// Within (fixed-effects) estimator; residual df is `n − N − M`.
pub fn fit_within<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<RegressionResult<T>> {
    let (frame, units) = within_frame(ds, spec)?;
    finish(spec, &frame, false, units, units)
}

/// Dispatches on `spec.estimator`.
pub fn fit<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<RegressionResult<T>> {
    match spec.estimator {
        Estimator::Pooled => fit_pooled(ds, spec),
        Estimator::FirstDifferences => fit_first_differences(ds, spec),
        Estimator::Within => fit_within(ds, spec),
    }
}

/// Random-effects transformed design.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDemeaned<T> {
    /// `y_it − θ_i ȳ_i`.
    pub y: Vec<T>,
    /// First column `1 − θ_i`, then `x_it − θ_i x̄_i` per regressor.
    pub x: Matrix<T>,
    /// Plain unit-demeaned regressors on the same rows.
    pub x_within: Matrix<T>,
    pub keys: Vec<RowKey>,
    /// `θ_i` per unit index.
    pub theta: BTreeMap<usize, T>,
    pub sigma2_e: T,
    pub sigma2_u: T,
}

/// Swamy-Arora variance components on a levels frame: `(σ²_e, σ²_u)`.
///
/// `σ²_e` comes from within residuals with `n − N − M` degrees of freedom,
/// `σ²_u` is the between-regression residual variance less `σ²_e / T̄`
/// (harmonic mean of unit sizes), floored at zero.
pub fn swamy_arora<T: Scalar>(frame: &ModelFrame<T>) -> Result<(T, T)> {
    let k = frame.x.ncols();
    let kept = frame.without_singletons();
    let units = kept.unit_sizes().len();
    if kept.n_rows() == 0 {
        return Err(PanelError::UnitTooShort);
    }
    let dm = kept.demeaned();
    let within = ols_fit(&dm.design(), &dm.y, false, units)?;
    let sigma2_e = within.ssr() / T::of_usize(within.df_residual);
    if !(sigma2_e > T::zero()) {
        return Err(PanelError::DegenerateVariance(sigma2_e.as_f64()));
    }

    let sizes = frame.unit_sizes();
    let (ybar, xbar) = unit_means(frame);
    let order: Vec<usize> = sizes.keys().copied().collect();
    let between_x = Matrix::from_rows(&order.iter().map(|u| xbar[u].clone()).collect::<Vec<_>>());
    let between_y: Vec<T> = order.iter().map(|u| ybar[u]).collect();
    let between = ols_fit(&Design::unkeyed(between_x), &between_y, true, 0)?;
    let n_units = order.len();
    let sigma2_b = between.ssr() / T::of_usize(n_units - k - 1);
    let harmonic = T::of_usize(n_units) / sizes.values().map(|&t| T::one() / T::of_usize(t)).sum::<T>();
    let sigma2_u = (sigma2_b - sigma2_e / harmonic).max(T::zero());
    Ok((sigma2_e, sigma2_u))
}

type UnitMeans<T> = (BTreeMap<usize, T>, BTreeMap<usize, Vec<T>>);

fn unit_means<T: Scalar>(frame: &ModelFrame<T>) -> UnitMeans<T> {
    let k = frame.x.ncols();
    let mut ys: BTreeMap<usize, (T, usize)> = BTreeMap::new();
    let mut xs: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for (i, &(u, _)) in frame.keys.iter().enumerate() {
        let e = ys.entry(u).or_insert((T::zero(), 0));
        e.0 = e.0 + frame.y[i];
        e.1 += 1;
        let xr = xs.entry(u).or_insert_with(|| vec![T::zero(); k]);
        for (a, &v) in xr.iter_mut().zip(frame.x.row(i)) {
            *a = *a + v;
        }
    }
    let ybar = ys.iter().map(|(&u, &(s, n))| (u, s / T::of_usize(n))).collect();
    let xbar = xs
        .into_iter()
        .map(|(u, s)| {
            let n = T::of_usize(ys[&u].1);
            (u, s.into_iter().map(|v| v / n).collect())
        })
        .collect();
    (ybar, xbar)
}

/// Applies the quasi-demeaning transform for given variance components.
pub fn quasi_demean_frame<T: Scalar>(frame: &ModelFrame<T>, sigma2_e: T, sigma2_u: T) -> QuasiDemeaned<T> {
    let sizes = frame.unit_sizes();
    let theta: BTreeMap<usize, T> = sizes
        .iter()
        .map(|(&u, &t)| {
            let th = if sigma2_u.is_infinite() {
                T::one()
            } else {
                T::one() - (sigma2_e / (sigma2_e + T::of_usize(t) * sigma2_u)).sqrt()
            };
            (u, th)
        })
        .collect();
    let (ybar, xbar) = unit_means(frame);
    let k = frame.x.ncols();
    let n = frame.n_rows();
    let mut x = Matrix::zeros(n, k + 1);
    let mut x_within = Matrix::zeros(n, k);
    let mut y = Vec::with_capacity(n);
    for (i, &(u, _)) in frame.keys.iter().enumerate() {
        let th = theta[&u];
        y.push(frame.y[i] - th * ybar[&u]);
        x[(i, 0)] = T::one() - th;
        for j in 0..k {
            let v = frame.x[(i, j)];
            x[(i, j + 1)] = v - th * xbar[&u][j];
            x_within[(i, j)] = v - xbar[&u][j];
        }
    }
    QuasiDemeaned {
        y,
        x,
        x_within,
        keys: frame.keys.clone(),
        theta,
        sigma2_e,
        sigma2_u,
    }
}

/// Random-effects quasi-demeaning of the levels model with Swamy-Arora components.
pub fn quasi_demean<T: Scalar>(ds: &PanelDataset<T>, spec: &ModelSpec) -> Result<QuasiDemeaned<T>> {
    let frame = levels_frame(ds, spec)?;
    if frame.n_rows() == 0 {
        return Err(PanelError::EmptyAfterTransforms);
    }
    let (s2e, s2u) = swamy_arora(&frame)?;
    Ok(quasi_demean_frame(&frame, s2e, s2u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Record;

    fn toy_panel() -> PanelDataset<f64> {
        // three units, years 1..=6, y = 2 + 0.5 x_{t-1} + unit effect + wiggle
        let mut recs = Vec::new();
        for (u, code) in ["A", "B", "C"].iter().enumerate() {
            for t in 1..=6i32 {
                let s = t as usize;
                let x = (s * s) as f64 * 0.3 + u as f64 + ((s * 7 + u * 3) % 5) as f64;
                let y = 2.0 + u as f64 * 4.0 + 0.5 * (t as f64) + ((s * 3 + u) % 4) as f64 * 0.25;
                recs.push(Record::new(*code, t, "x", x));
                recs.push(Record::new(*code, t, "y", y));
            }
        }
        PanelDataset::build(recs).unwrap()
    }

    #[test]
    fn spec_validation() {
        let spec = ModelSpec::new("y", &["y"], 1, Estimator::Pooled);
        assert!(spec.validate().is_err());
        assert!(ModelSpec::new("y", &[], 1, Estimator::Pooled).validate().is_err());
    }

    #[test]
    fn pooled_lag_zero_identity() {
        let recs: Vec<Record<f64>> = (1..=8)
            .flat_map(|t| {
                let x = (t as f64).sin() * 3.0;
                [Record::new("A", t, "x", x), Record::new("A", t, "y", x)]
            })
            .collect();
        let ds = PanelDataset::build(recs).unwrap();
        let spec = ModelSpec::new("y", &["x"], 0, Estimator::Pooled).with_vcov(CovarianceKind::Classical);
        let r = fit_pooled(&ds, &spec).unwrap();
        assert!((r.coefficients[1] - 1.0).abs() < 1e-12);
        assert!(r.coefficients[0].abs() < 1e-12);
    }

    #[test]
    fn fd_frame_shape() {
        let ds = toy_panel();
        let spec = ModelSpec::new("y", &["x"], 1, Estimator::FirstDifferences);
        let frame = first_difference_frame(&ds, &spec).unwrap();
        // t = 3..=6 per unit
        assert_eq!(frame.n_rows(), 12);
        assert_eq!(frame.keys[0], (0, 3));
        let r = fit_first_differences(&ds, &spec).unwrap();
        assert_eq!(r.n_obs, 12);
        assert_eq!(r.df_residual, 10);
        assert_eq!(r.names, ["intercept", "x"]);
        for (se, v) in r.standard_errors.iter().zip(r.covariance.matrix.diagonal()) {
            assert_eq!(*se, v.sqrt());
        }
    }

    #[test]
    fn within_df_and_shape() {
        let ds = toy_panel();
        let spec = ModelSpec::new("y", &["x"], 1, Estimator::Within);
        let r = fit_within(&ds, &spec).unwrap();
        assert_eq!(r.n_obs, 15);
        assert_eq!(r.n_units, 3);
        assert_eq!(r.df_residual, 15 - 3 - 1);
        assert_eq!(r.names, ["x"]);
    }

    #[test]
    fn within_drops_single_row_units() {
        let mut recs = toy_panel().records();
        recs.push(Record::new("D", 1, "x", 1.0));
        recs.push(Record::new("D", 2, "x", 2.0));
        recs.push(Record::new("D", 2, "y", 3.0));
        let ds = PanelDataset::build(recs).unwrap();
        let spec = ModelSpec::new("y", &["x"], 1, Estimator::Within);
        let r = fit_within(&ds, &spec).unwrap();
        assert_eq!(r.n_units, 3);

        let short = PanelDataset::build(vec![
            Record::new("A", 1, "x", 1.0),
            Record::new("A", 2, "y", 1.0),
            Record::new("B", 1, "x", 1.0),
            Record::new("B", 2, "y", 1.0),
        ])
        .unwrap();
        assert!(matches!(fit_within(&short, &spec), Err(PanelError::UnitTooShort)));
    }

    #[test]
    fn empty_after_transforms() {
        let ds = PanelDataset::build(vec![Record::new("A", 1, "x", 1.0), Record::new("A", 1, "y", 1.0)]).unwrap();
        let spec = ModelSpec::new("y", &["x"], 1, Estimator::FirstDifferences);
        assert!(matches!(fit_first_differences(&ds, &spec), Err(PanelError::EmptyAfterTransforms)));
    }

    #[test]
    fn quasi_demean_boundaries() {
        let ds = toy_panel();
        let spec = ModelSpec::new("y", &["x"], 1, Estimator::Pooled);
        let frame = levels_frame(&ds, &spec).unwrap();

        let pooled = quasi_demean_frame(&frame, 1.0, 0.0);
        assert!(pooled.theta.values().all(|&t| t == 0.0));
        assert_eq!(pooled.y, frame.y);
        for i in 0..frame.n_rows() {
            assert_eq!(pooled.x[(i, 0)], 1.0);
            assert_eq!(pooled.x[(i, 1)], frame.x[(i, 0)]);
        }

        let limit = quasi_demean_frame(&frame, 1.0, f64::INFINITY);
        let dm = frame.demeaned();
        for i in 0..frame.n_rows() {
            assert!((limit.y[i] - dm.y[i]).abs() < 1e-12);
            assert!((limit.x[(i, 1)] - dm.x[(i, 0)]).abs() < 1e-12);
        }
        let near = quasi_demean_frame(&frame, 1.0, 1e12);
        assert!(near.theta.values().all(|&t| (t - 1.0).abs() < 1e-5));
    }

    #[test]
    fn theta_balanced_by_hand() {
        let ds = toy_panel();
        let spec = ModelSpec::new("y", &["x"], 1, Estimator::Pooled);
        let frame = levels_frame(&ds, &spec).unwrap();
        // T = 5 per unit after lagging; σ²_e = 2, σ²_u = 3 → θ = 1 − sqrt(2/17)
        let q = quasi_demean_frame(&frame, 2.0, 3.0);
        let expected = 1.0 - (2.0f64 / 17.0).sqrt();
        assert!(q.theta.values().all(|&t| (t - expected).abs() < 1e-15));
    }
}
