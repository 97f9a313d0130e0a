//! Immutable long-format panel store and its gap-aware transforms.
//!
//! Missing observations are represented by absence. Lags and differences
//! never reach across a gap in a unit's period grid: a row is produced at
//! period `t` only when every period from the one referenced up to `t` is on
//! the grid.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{PanelError, Result};
use crate::scalar::Scalar;

pub type Period = i32;

/// One long-format observation as read from a source.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub unit: String,
    pub period: Period,
    pub variable: String,
    pub value: T,
}

impl<T> Record<T> {
    pub fn new(unit: impl Into<String>, period: Period, variable: impl Into<String>, value: T) -> Self {
        Self {
            unit: unit.into(),
            period,
            variable: variable.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableInfo {
    pub name: String,
    /// Unit of measure, e.g. `USD PPP per capita`.
    pub measure: Option<String>,
}

/// Ordered `(unit index, period, value)` rows for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesView<T> {
    pub name: String,
    pub rows: Vec<(usize, Period, T)>,
}

impl<T: Scalar> SeriesView<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, unit: usize, period: Period) -> Option<T> {
        self.rows
            .binary_search_by(|&(u, p, _)| (u, p).cmp(&(unit, period)))
            .ok()
            .map(|i| self.rows[i].2)
    }

    pub(crate) fn to_map(&self) -> HashMap<(usize, Period), T> {
        self.rows.iter().map(|&(u, p, v)| ((u, p), v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset<T> {
    units: Vec<String>,
    variables: Vec<VariableInfo>,
    values: Vec<BTreeMap<(usize, Period), T>>,
    grids: Vec<Vec<Period>>,
}

impl<T: Scalar> PanelDataset<T> {
    /// Builds a dataset from long-format records.
    ///
    /// Units are sorted by code and variables by name so that two builds from
    /// the same records in any order are identical.
    pub fn build(records: impl IntoIterator<Item = Record<T>>) -> Result<Self> {
        Self::build_with_measures(records, &[])
    }

    pub fn build_with_measures(
        records: impl IntoIterator<Item = Record<T>>,
        measures: &[(&str, &str)],
    ) -> Result<Self> {
        let records: Vec<Record<T>> = records.into_iter().collect();
        let units: BTreeSet<&str> = records.iter().map(|r| r.unit.as_str()).collect();
        let names: BTreeSet<&str> = records.iter().map(|r| r.variable.as_str()).collect();
        let unit_idx: HashMap<&str, usize> = units.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let var_idx: HashMap<&str, usize> = names.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let mut values = vec![BTreeMap::new(); names.len()];
        let mut grids = vec![BTreeSet::new(); units.len()];
        for r in &records {
            if !r.value.is_finite() {
                return Err(PanelError::NonFiniteValue {
                    unit: r.unit.clone(),
                    period: r.period,
                    variable: r.variable.clone(),
                });
            }
            let u = unit_idx[r.unit.as_str()];
            let slot = &mut values[var_idx[r.variable.as_str()]];
            if slot.insert((u, r.period), r.value).is_some() {
                return Err(PanelError::DuplicateKey {
                    unit: r.unit.clone(),
                    period: r.period,
                    variable: r.variable.clone(),
                });
            }
            grids[u].insert(r.period);
        }
        let measures: HashMap<&str, &str> = measures.iter().copied().collect();
        let variables = names
            .iter()
            .map(|&n| VariableInfo {
                name: n.to_string(),
                measure: measures.get(n).map(|m| m.to_string()),
            })
            .collect();
        Ok(Self {
            units: units.into_iter().map(String::from).collect(),
            variables,
            values,
            grids: grids.into_iter().map(|g| g.into_iter().collect()).collect(),
        })
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    pub fn unit_index(&self, code: &str) -> Option<usize> {
        self.units.binary_search_by(|u| u.as_str().cmp(code)).ok()
    }

    pub fn variables(&self) -> &[VariableInfo] {
        &self.variables
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.var_index(name).is_ok()
    }

    /// Sorted, unique periods on which unit `unit` has any observation.
    pub fn grid(&self, unit: usize) -> &[Period] {
        &self.grids[unit]
    }

    /// Sorted union of all unit grids.
    pub fn periods(&self) -> Vec<Period> {
        let all: BTreeSet<Period> = self.grids.iter().flatten().copied().collect();
        all.into_iter().collect()
    }

    /// Number of stored values across all variables.
    pub fn cell_count(&self) -> usize {
        self.values.iter().map(BTreeMap::len).sum()
    }

    /// Number of present observations of `var`.
    pub fn present_count(&self, var: &str) -> Result<usize> {
        Ok(self.values[self.var_index(var)?].len())
    }

    pub fn value(&self, unit: usize, period: Period, var: &str) -> Option<T> {
        let v = self.var_index(var).ok()?;
        self.values[v].get(&(unit, period)).copied()
    }

    fn var_index(&self, name: &str) -> Result<usize> {
        self.variables
            .binary_search_by(|v| v.name.as_str().cmp(name))
            .map_err(|_| PanelError::UnknownVariable(name.to_string()))
    }

    pub fn series(&self, var: &str) -> Result<SeriesView<T>> {
        let v = self.var_index(var)?;
        Ok(SeriesView {
            name: var.to_string(),
            rows: self.values[v].iter().map(|(&(u, p), &x)| (u, p, x)).collect(),
        })
    }

    /// Long-format records in `(unit, period, variable)` order.
    pub fn records(&self) -> Vec<Record<T>> {
        let mut out = Vec::with_capacity(self.cell_count());
        for (u, code) in self.units.iter().enumerate() {
            for &p in &self.grids[u] {
                for (v, info) in self.variables.iter().enumerate() {
                    if let Some(&x) = self.values[v].get(&(u, p)) {
                        out.push(Record::new(code.clone(), p, info.name.clone(), x));
                    }
                }
            }
        }
        out
    }

    /// `var` shifted forward by `k` periods.
    pub fn lag_series(&self, var: &str, k: usize) -> Result<SeriesView<T>> {
        if k == 0 {
            return Err(PanelError::InvalidArgument("lag order must be positive".into()));
        }
        Ok(self.lag_view(&self.series(var)?, k))
    }

    /// Applies the gap-aware lag to an arbitrary view on this dataset's grid.
    /// `k = 0` returns the view unchanged.
    pub fn lag_view(&self, view: &SeriesView<T>, k: usize) -> SeriesView<T> {
        let src = view.to_map();
        let k = k as Period;
        let mut rows = Vec::new();
        for u in 0..self.units.len() {
            for &t in self.grid(u) {
                if !self.spans_consecutive(u, t - k, t) {
                    continue;
                }
                if let Some(&v) = src.get(&(u, t - k)) {
                    rows.push((u, t, v));
                }
            }
        }
        SeriesView {
            name: view.name.clone(),
            rows,
        }
    }

    /// First difference `value(t) − value(t−1)` of `var`.
    pub fn difference_series(&self, var: &str) -> Result<SeriesView<T>> {
        Ok(self.difference_view(&self.series(var)?))
    }

    pub fn difference_view(&self, view: &SeriesView<T>) -> SeriesView<T> {
        let src = view.to_map();
        let rows = view
            .rows
            .iter()
            .filter(|&&(u, t, _)| self.spans_consecutive(u, t - 1, t))
            .filter_map(|&(u, t, v)| src.get(&(u, t - 1)).map(|&prev| (u, t, v - prev)))
            .collect();
        SeriesView {
            name: view.name.clone(),
            rows,
        }
    }

    /// True when every integer period in `from..=to` is on unit `u`'s grid.
    fn spans_consecutive(&self, u: usize, from: Period, to: Period) -> bool {
        let grid = self.grid(u);
        match grid.binary_search(&from) {
            Ok(start) => {
                let span = (to - from) as usize;
                grid.get(start + span) == Some(&to)
            }
            Err(_) => false,
        }
    }

    /// Keeps only the `(unit, period)` cells where every variable in `vars` is present.
    pub fn complete_cases(&self, vars: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = vars.iter().map(|v| self.var_index(v)).collect::<Result<_>>()?;
        let keep = |key: &(usize, Period)| idx.iter().all(|&v| self.values[v].contains_key(key));
        let values: Vec<BTreeMap<(usize, Period), T>> = self
            .values
            .iter()
            .map(|m| m.iter().filter(|(k, _)| keep(k)).map(|(&k, &v)| (k, v)).collect())
            .collect();
        let mut grids = vec![BTreeSet::new(); self.units.len()];
        for m in &values {
            for &(u, p) in m.keys() {
                grids[u].insert(p);
            }
        }
        Ok(Self {
            units: self.units.clone(),
            variables: self.variables.clone(),
            values,
            grids: grids.into_iter().map(|g| g.into_iter().collect()).collect(),
        })
    }

    /// Number of `(unit, period)` cells where every variable in `vars` is present.
    pub fn complete_count(&self, vars: &[&str]) -> Result<usize> {
        let idx: Vec<usize> = vars.iter().map(|v| self.var_index(v)).collect::<Result<_>>()?;
        let Some((&first, rest)) = idx.split_first() else {
            return Ok(self.grids.iter().map(Vec::len).sum());
        };
        Ok(self.values[first]
            .keys()
            .filter(|k| rest.iter().all(|&v| self.values[v].contains_key(k)))
            .count())
    }

    /// Same data with unit and period roles exchanged; period `p` becomes a unit
    /// named after it and unit index `i` becomes period `i`.
    pub fn transposed(&self) -> Self {
        let mut records = Vec::with_capacity(self.cell_count());
        for (v, info) in self.variables.iter().enumerate() {
            for (&(u, p), &x) in &self.values[v] {
                records.push(Record::new(format!("{p:08}"), u as Period, info.name.clone(), x));
            }
        }
        Self::build(records).expect("transposing a valid dataset keeps keys unique")
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> PanelDataset<U> {
        PanelDataset {
            units: self.units.clone(),
            variables: self.variables.clone(),
            values: self
                .values
                .iter()
                .map(|m| m.iter().map(|(&k, &v)| (k, U::of(v.as_f64()))).collect())
                .collect(),
            grids: self.grids.clone(),
        }
    }
}

/// Rows of equal-width vectors keyed by unit, as consumed by [`within_demean`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedRows<T> {
    pub units: Vec<usize>,
    pub values: Vec<Vec<T>>,
}

/// Subtracts each unit's mean from its rows, column by column.
pub fn within_demean<T: Scalar>(rows: &KeyedRows<T>) -> KeyedRows<T> {
    let width = rows.values.first().map_or(0, Vec::len);
    let mut sums: HashMap<usize, (Vec<T>, usize)> = HashMap::new();
    for (u, row) in rows.units.iter().zip(&rows.values) {
        let e = sums.entry(*u).or_insert_with(|| (vec![T::zero(); width], 0));
        for (s, &v) in e.0.iter_mut().zip(row) {
            *s = *s + v;
        }
        e.1 += 1;
    }
    let means: HashMap<usize, Vec<T>> = sums
        .into_iter()
        .map(|(u, (s, n))| (u, s.into_iter().map(|x| x / T::of_usize(n)).collect()))
        .collect();
    let values = rows
        .units
        .iter()
        .zip(&rows.values)
        .map(|(u, row)| row.iter().zip(&means[u]).map(|(&v, &m)| v - m).collect())
        .collect();
    KeyedRows {
        units: rows.units.clone(),
        values,
    }
}
