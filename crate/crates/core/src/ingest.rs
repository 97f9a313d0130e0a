//! Long-format CSV ingestion, the study manifest, and descriptive statistics.
//!
//! Sources are read into [`Record`]s with malformed rows collected rather than
//! dropped, then merged into one [`PanelDataset`] restricted to the manifest's
//! countries, years and variables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{PanelError, Result};
use crate::panel::{PanelDataset, Period, Record};
use crate::scalar::Scalar;

pub const RD_MEASURE: &str = "USD PPP per capita";
pub const WAGE_MEASURE: &str = "USD PPP per month";
pub const OIL_MEASURE: &str = "USD PPP per 1000 litres";

pub const FUNDING_SOURCES: [&str; 5] = ["BES", "GOV", "HES", "PNP", "ROW"];
pub const PERFORMANCE_SECTORS: [&str; 4] = ["BES", "GOV", "HES", "PNP"];

/// Name of the series for R&D performed in `sector` and funded by `source`.
pub fn cell_variable(sector: &str, source: &str) -> String {
    format!("CELL-{sector}-{source}")
}

/// Where the variable name of each row comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VariableColumn {
    Column(String),
    /// Every row of the file belongs to this variable.
    Fixed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSchema {
    pub path: PathBuf,
    pub unit_column: String,
    pub period_column: String,
    pub variable: VariableColumn,
    pub value_column: String,
    /// Column holding a per-row unit-of-measure tag, checked against `expected_measure`.
    pub measure_column: Option<String>,
    pub expected_measure: String,
}

impl SourceSchema {
    /// Schema of the canonical dump: `country,year,variable,value`.
    pub fn canonical(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            unit_column: "country".into(),
            period_column: "year".into(),
            variable: VariableColumn::Column("variable".into()),
            value_column: "value".into(),
            measure_column: None,
            expected_measure: "USD PPP".into(),
        }
    }

    /// One-variable file with `country,year,value` columns.
    pub fn single(path: impl Into<PathBuf>, variable: &str, measure: &str) -> Self {
        Self {
            variable: VariableColumn::Fixed(variable.into()),
            expected_measure: measure.into(),
            ..Self::canonical(path)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut cols = vec![&self.unit_column, &self.period_column, &self.value_column];
        if let VariableColumn::Column(c) = &self.variable {
            cols.push(c);
        }
        if let Some(c) = &self.measure_column {
            cols.push(c);
        }
        let distinct: BTreeSet<&String> = cols.iter().copied().collect();
        if distinct.len() != cols.len() {
            return Err(PanelError::Config(format!("{}: mapped columns are not distinct", self.path.display())));
        }
        if self.expected_measure.trim().is_empty() {
            return Err(PanelError::Config(format!("{}: empty unit-of-measure tag", self.path.display())));
        }
        if let VariableColumn::Fixed(v) = &self.variable {
            if v.trim().is_empty() {
                return Err(PanelError::Config(format!("{}: empty variable name", self.path.display())));
            }
        }
        Ok(())
    }
}

/// A data row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub path: String,
    /// 1-based line number in the file, the header being line 1.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome<T> {
    pub records: Vec<Record<T>>,
    pub rejects: Vec<Reject>,
    /// Data rows seen; always `records.len() + rejects.len()`.
    pub rows_read: usize,
}

/// Reads one long-format file described by `schema`.
///
/// Rows with a missing or malformed field, a non-finite value, or a measure
/// tag other than the expected one become [`Reject`]s. A row the CSV layer
/// cannot split is an error, as are a missing file header or column.
pub fn read_long_csv<T: Scalar>(schema: &SourceSchema) -> Result<ReadOutcome<T>> {
    schema.validate()?;
    let text = std::fs::read_to_string(&schema.path)?;
    parse_long_csv(schema, &text)
}

/// [`read_long_csv`] on text already in memory; `schema.path` only labels errors.
pub fn parse_long_csv<T: Scalar>(schema: &SourceSchema, text: &str) -> Result<ReadOutcome<T>> {
    let label = schema.path.display().to_string();
    if text.trim().is_empty() {
        return Err(PanelError::EmptyFile(label));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| PanelError::MissingColumn {
            path: label.clone(),
            column: name.to_string(),
        })
    };
    let unit_col = column(&schema.unit_column)?;
    let period_col = column(&schema.period_column)?;
    let value_col = column(&schema.value_column)?;
    let var_col = match &schema.variable {
        VariableColumn::Column(c) => Some(column(c)?),
        VariableColumn::Fixed(_) => None,
    };
    let measure_col = schema.measure_column.as_deref().map(column).transpose()?;

    let mut out = ReadOutcome {
        records: Vec::new(),
        rejects: Vec::new(),
        rows_read: 0,
    };
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| PanelError::UnparseableValue {
            row: line,
            detail: e.to_string(),
        })?;
        out.rows_read += 1;
        let mut reject = |reason: String| {
            out.rejects.push(Reject {
                path: label.clone(),
                line,
                reason,
            })
        };
        let field = |c: usize| row.get(c).unwrap_or("");
        let unit = field(unit_col);
        if unit.is_empty() {
            reject("empty unit".into());
            continue;
        }
        let period: Period = match field(period_col).parse() {
            Ok(p) => p,
            Err(_) => {
                reject(format!("unparseable period `{}`", field(period_col)));
                continue;
            }
        };
        let variable = match (&schema.variable, var_col) {
            (VariableColumn::Fixed(v), _) => v.clone(),
            (_, Some(c)) if !field(c).is_empty() => field(c).to_string(),
            _ => {
                reject("empty variable".into());
                continue;
            }
        };
        if let Some(c) = measure_col {
            if field(c) != schema.expected_measure {
                reject(format!("measure `{}`, expected `{}`", field(c), schema.expected_measure));
                continue;
            }
        }
        let value: f64 = match field(value_col).parse() {
            Ok(v) => v,
            Err(_) => {
                reject(format!("unparseable value `{}`", field(value_col)));
                continue;
            }
        };
        if !value.is_finite() {
            reject(format!("non-finite value `{}`", field(value_col)));
            continue;
        }
        out.records.push(Record::new(unit, period, variable, T::of(value)));
    }
    Ok(out)
}

/// OECD members as of 2019, by 3-letter code and English name.
const COUNTRIES: [(&str, &str); 36] = [
    ("AUS", "Australia"),
    ("AUT", "Austria"),
    ("BEL", "Belgium"),
    ("CAN", "Canada"),
    ("CHE", "Switzerland"),
    ("CHL", "Chile"),
    ("CZE", "Czech Republic"),
    ("DEU", "Germany"),
    ("DNK", "Denmark"),
    ("ESP", "Spain"),
    ("EST", "Estonia"),
    ("FIN", "Finland"),
    ("FRA", "France"),
    ("GBR", "United Kingdom"),
    ("GRC", "Greece"),
    ("HUN", "Hungary"),
    ("IRL", "Ireland"),
    ("ISL", "Iceland"),
    ("ISR", "Israel"),
    ("ITA", "Italy"),
    ("JPN", "Japan"),
    ("KOR", "Korea"),
    ("LTU", "Lithuania"),
    ("LUX", "Luxembourg"),
    ("LVA", "Latvia"),
    ("MEX", "Mexico"),
    ("NLD", "Netherlands"),
    ("NOR", "Norway"),
    ("NZL", "New Zealand"),
    ("POL", "Poland"),
    ("PRT", "Portugal"),
    ("SVK", "Slovak Republic"),
    ("SVN", "Slovenia"),
    ("SWE", "Sweden"),
    ("TUR", "Turkey"),
    ("USA", "United States"),
];

const ALIASES: [(&str, &str); 12] = [
    ("czechia", "CZE"),
    ("slovakia", "SVK"),
    ("republic of korea", "KOR"),
    ("korea, republic of", "KOR"),
    ("south korea", "KOR"),
    ("uk", "GBR"),
    ("great britain", "GBR"),
    ("united states of america", "USA"),
    ("us", "USA"),
    ("türkiye", "TUR"),
    ("turkiye", "TUR"),
    ("the netherlands", "NLD"),
];

/// Resolves a source spelling (code, name or known alias) to a 3-letter code.
pub fn country_code(name: &str) -> Option<&'static str> {
    let key = name.trim().to_lowercase();
    COUNTRIES
        .iter()
        .find(|(code, full)| code.to_lowercase() == key || full.to_lowercase() == key)
        .map(|(code, _)| *code)
        .or_else(|| ALIASES.iter().find(|(alias, _)| *alias == key).map(|(_, code)| *code))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestVariable {
    pub name: String,
    pub measure: String,
    /// Required variables must end up with at least one value.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyManifest {
    pub included: Vec<String>,
    /// Excluded code and the reason.
    pub excluded: Vec<(String, String)>,
    pub first_period: Period,
    pub last_period: Period,
    pub variables: Vec<ManifestVariable>,
    /// Which diesel price series feeds `OIL`.
    pub oil_series: String,
}

impl StudyManifest {
    /// The 29-country, 2003–2017 study design.
    pub fn oecd() -> Self {
        let excluded: Vec<(String, String)> = [
            ("AUS", "missing oil prices"),
            ("CHL", "missing oil prices"),
            ("ISL", "missing oil prices"),
            ("ISR", "missing oil prices"),
            ("LVA", "missing oil prices"),
            ("LTU", "missing oil prices"),
            ("TUR", "missing average wages"),
        ]
        .iter()
        .map(|(c, r)| (c.to_string(), r.to_string()))
        .collect();
        let included = COUNTRIES
            .iter()
            .map(|(c, _)| c.to_string())
            .filter(|c| !excluded.iter().any(|(e, _)| e == c))
            .collect();
        let var = |name: String, measure: &str, required: bool| ManifestVariable {
            name,
            measure: measure.into(),
            required,
        };
        let mut variables = vec![var("TOTAL".into(), RD_MEASURE, true)];
        variables.extend(FUNDING_SOURCES.iter().map(|s| var(format!("FUND-{s}"), RD_MEASURE, true)));
        variables.extend(PERFORMANCE_SECTORS.iter().map(|s| var(format!("PERF-{s}"), RD_MEASURE, true)));
        variables.push(var("WAGE".into(), WAGE_MEASURE, true));
        variables.push(var("OIL".into(), OIL_MEASURE, true));
        for sector in PERFORMANCE_SECTORS {
            for source in FUNDING_SOURCES {
                variables.push(var(cell_variable(sector, source), RD_MEASURE, false));
            }
        }
        Self {
            included,
            excluded,
            first_period: 2003,
            last_period: 2017,
            variables,
            oil_series: "IEA automotive diesel price, total incl. taxes".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.included.is_empty() {
            return Err(PanelError::Config("manifest includes no units".into()));
        }
        if self.first_period > self.last_period {
            return Err(PanelError::Config("manifest period range is empty".into()));
        }
        if let Some((code, _)) = self.excluded.iter().find(|(_, reason)| reason.trim().is_empty()) {
            return Err(PanelError::Config(format!("no exclusion reason for {code}")));
        }
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Option<&ManifestVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    fn measure_pairs(&self) -> Vec<(&str, &str)> {
        self.variables.iter().map(|v| (v.name.as_str(), v.measure.as_str())).collect()
    }
}

/// Per-variable counts after assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableCoverage {
    pub name: String,
    pub present: usize,
    /// Country-years where this variable, `WAGE` and `OIL` are all present.
    pub complete: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageReport {
    pub variables: Vec<VariableCoverage>,
    pub rows_read: usize,
    pub stored: usize,
    pub rejects: Vec<Reject>,
    /// Rows of excluded countries.
    pub dropped_units: usize,
    pub dropped_periods: usize,
    /// Rows of variables the manifest does not list.
    pub dropped_variables: usize,
}

impl CoverageReport {
    pub fn present(&self, var: &str) -> Option<usize> {
        self.variables.iter().find(|v| v.name == var).map(|v| v.present)
    }

    pub fn complete(&self, var: &str) -> Option<usize> {
        self.variables.iter().find(|v| v.name == var).map(|v| v.complete)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyData<T> {
    pub dataset: PanelDataset<T>,
    pub coverage: CoverageReport,
}

/// Reads every source and merges them into the study panel.
pub fn assemble_study_dataset<T: Scalar>(manifest: &StudyManifest, sources: &[SourceSchema]) -> Result<StudyData<T>> {
    manifest.validate()?;
    let outcomes = sources
        .par_iter()
        .map(read_long_csv::<T>)
        .collect::<Result<Vec<_>>>()?;
    assemble_outcomes(manifest, sources, outcomes)
}

/// Merge step of [`assemble_study_dataset`] for already-read sources.
pub fn assemble_outcomes<T: Scalar>(
    manifest: &StudyManifest,
    sources: &[SourceSchema],
    outcomes: Vec<ReadOutcome<T>>,
) -> Result<StudyData<T>> {
    let included: BTreeSet<&str> = manifest.included.iter().map(String::as_str).collect();
    let mut coverage = CoverageReport::default();
    let mut records = Vec::new();
    for (schema, outcome) in sources.iter().zip(outcomes) {
        coverage.rows_read += outcome.rows_read;
        coverage.rejects.extend(outcome.rejects);
        if let VariableColumn::Fixed(v) = &schema.variable {
            if let Some(mv) = manifest.variable(v) {
                if mv.measure != schema.expected_measure {
                    // the whole file is in the wrong unit
                    coverage.rejects.extend(outcome.records.iter().map(|_| Reject {
                        path: schema.path.display().to_string(),
                        line: 0,
                        reason: format!("{v} measured in `{}`, expected `{}`", schema.expected_measure, mv.measure),
                    }));
                    continue;
                }
            }
        }
        for mut r in outcome.records {
            let code = country_code(&r.unit).ok_or_else(|| PanelError::UnknownUnitCode(r.unit.clone()))?;
            if !included.contains(code) {
                coverage.dropped_units += 1;
            } else if r.period < manifest.first_period || r.period > manifest.last_period {
                coverage.dropped_periods += 1;
            } else if manifest.variable(&r.variable).is_none() {
                coverage.dropped_variables += 1;
            } else {
                r.unit = code.to_string();
                records.push(r);
            }
        }
    }
    coverage.stored = records.len();
    let present: BTreeSet<&str> = records.iter().map(|r| r.variable.as_str()).collect();
    if let Some(missing) = manifest.variables.iter().find(|v| v.required && !present.contains(v.name.as_str())) {
        return Err(PanelError::UncoveredVariable(missing.name.clone()));
    }
    let pairs: Vec<(&str, &str)> = manifest
        .measure_pairs()
        .into_iter()
        .filter(|(name, _)| present.contains(name))
        .collect();
    let dataset = PanelDataset::build_with_measures(records, &pairs)?;
    coverage.variables = coverage_of(&dataset)?;
    Ok(StudyData { dataset, coverage })
}

fn coverage_of<T: Scalar>(ds: &PanelDataset<T>) -> Result<Vec<VariableCoverage>> {
    let has_regressors = ds.has_variable("WAGE") && ds.has_variable("OIL");
    ds.variables()
        .iter()
        .map(|v| {
            let complete = if has_regressors {
                let mut vars = vec![v.name.as_str(), "WAGE", "OIL"];
                vars.sort_unstable();
                vars.dedup();
                ds.complete_count(&vars)?
            } else {
                0
            };
            Ok(VariableCoverage {
                name: v.name.clone(),
                present: ds.present_count(&v.name)?,
                complete,
            })
        })
        .collect()
}

/// Writes `country,year,variable,value` rows in key order.
///
/// Values use the shortest representation that parses back to the same
/// float, so re-reading a dump reproduces the dataset exactly.
pub fn write_canonical<T: Scalar, W: Write>(ds: &PanelDataset<T>, mut out: W) -> Result<()> {
    writeln!(out, "country,year,variable,value")?;
    for r in ds.records() {
        writeln!(out, "{},{},{},{}", r.unit, r.period, r.variable, r.value)?;
    }
    Ok(())
}

pub fn canonical_string<T: Scalar>(ds: &PanelDataset<T>) -> String {
    let mut buf = Vec::new();
    write_canonical(ds, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("canonical dump is UTF-8")
}

/// All `*.csv` files in `dir` as canonical-dump sources, sorted by name.
pub fn canonical_sources(dir: &Path) -> Result<Vec<SourceSchema>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    if paths.is_empty() {
        return Err(PanelError::EmptyFile(format!("{}: no .csv files", dir.display())));
    }
    Ok(paths.into_iter().map(SourceSchema::canonical).collect())
}

/// How cell shares are aggregated over country-years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShareMethod {
    /// Mean over country-years of `100 · cell / TOTAL`.
    #[default]
    MeanOfRatios,
    /// `100 · Σ cell / Σ TOTAL` over the same country-years.
    RatioOfSums,
}

impl ShareMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ShareMethod::MeanOfRatios => "mean-of-ratios",
            ShareMethod::RatioOfSums => "ratio-of-sums",
        }
    }
}

impl std::str::FromStr for ShareMethod {
    type Err = PanelError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-of-ratios" => Ok(Self::MeanOfRatios),
            "ratio-of-sums" => Ok(Self::RatioOfSums),
            other => Err(PanelError::Config(format!("unknown share method `{other}`"))),
        }
    }
}

/// Percent shares of R&D by performance sector (rows) and funding source
/// (columns), with margins from the one-dimensional breakdowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareMatrix {
    pub cells: [[f64; 5]; 4],
    pub row_totals: [f64; 4],
    pub column_totals: [f64; 5],
    /// Sum of the funding-source margins.
    pub grand_total: f64,
    pub method: ShareMethod,
}

pub fn share_matrix<T: Scalar>(ds: &PanelDataset<T>, method: ShareMethod) -> Result<ShareMatrix> {
    if !ds.has_variable("TOTAL") {
        return Err(PanelError::MissingBreakdown("TOTAL".into()));
    }
    let share = |var: &str| -> Result<f64> {
        if !ds.has_variable(var) {
            return Err(PanelError::MissingBreakdown(var.to_string()));
        }
        let mut ratios = 0.0;
        let (mut num, mut den, mut n) = (0.0, 0.0, 0usize);
        for (u, t, v) in ds.series(var)?.rows {
            if let Some(total) = ds.value(u, t, "TOTAL").filter(|x| *x > T::zero()) {
                ratios += v.as_f64() / total.as_f64();
                num += v.as_f64();
                den += total.as_f64();
                n += 1;
            }
        }
        if n == 0 {
            return Err(PanelError::MissingBreakdown(var.to_string()));
        }
        Ok(100.0
            * match method {
                ShareMethod::MeanOfRatios => ratios / n as f64,
                ShareMethod::RatioOfSums => num / den,
            })
    };
    let mut cells = [[0.0; 5]; 4];
    for (i, sector) in PERFORMANCE_SECTORS.iter().enumerate() {
        for (j, source) in FUNDING_SOURCES.iter().enumerate() {
            cells[i][j] = share(&cell_variable(sector, source))?;
        }
    }
    let mut row_totals = [0.0; 4];
    for (i, sector) in PERFORMANCE_SECTORS.iter().enumerate() {
        row_totals[i] = share(&format!("PERF-{sector}"))?;
    }
    let mut column_totals = [0.0; 5];
    for (j, source) in FUNDING_SOURCES.iter().enumerate() {
        column_totals[j] = share(&format!("FUND-{source}"))?;
    }
    Ok(ShareMatrix {
        cells,
        row_totals,
        column_totals,
        grand_total: column_totals.iter().sum(),
        method,
    })
}

/// Cross-country mean of one variable in one year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearMean {
    /// `NaN` when no country reports a value.
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualAverages {
    pub variables: Vec<String>,
    /// One entry per year, one `YearMean` per variable.
    pub years: Vec<(Period, Vec<YearMean>)>,
}

pub fn annual_averages<T: Scalar>(ds: &PanelDataset<T>, vars: &[&str]) -> Result<AnnualAverages> {
    let mut sums: BTreeMap<Period, Vec<(f64, usize)>> =
        ds.periods().into_iter().map(|p| (p, vec![(0.0, 0); vars.len()])).collect();
    for (k, var) in vars.iter().enumerate() {
        for (_, t, v) in ds.series(var)?.rows {
            let slot = &mut sums.get_mut(&t).expect("period of a stored value")[k];
            slot.0 += v.as_f64();
            slot.1 += 1;
        }
    }
    Ok(AnnualAverages {
        variables: vars.iter().map(|v| v.to_string()).collect(),
        years: sums
            .into_iter()
            .map(|(t, s)| {
                let means = s
                    .into_iter()
                    .map(|(sum, count)| YearMean {
                        mean: if count == 0 { f64::NAN } else { sum / count as f64 },
                        count,
                    })
                    .collect();
                (t, means)
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SourceSchema {
        SourceSchema::canonical("mem.csv")
    }

    #[test]
    fn well_formed_rows() {
        let text = "country,year,variable,value\nAUT,2003,TOTAL,1.5\nAUT,2004,TOTAL,2\nBEL,2003,TOTAL,-3e2\n";
        let out = parse_long_csv::<f64>(&schema(), text).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.rejects.is_empty());
        assert_eq!(out.records[2].value, -300.0);
    }

    #[test]
    fn bad_value_is_rejected_with_line() {
        let text = "country,year,variable,value\nAUT,2003,TOTAL,1.5\nAUT,2004,TOTAL,n/a\nAUT,2005,TOTAL,inf\n";
        let out = parse_long_csv::<f64>(&schema(), text).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects.len(), 2);
        assert_eq!(out.rejects[0].line, 3);
        assert_eq!(out.rows_read, out.records.len() + out.rejects.len());
    }

    #[test]
    fn header_problems() {
        assert!(matches!(parse_long_csv::<f64>(&schema(), ""), Err(PanelError::EmptyFile(_))));
        assert!(matches!(
            parse_long_csv::<f64>(&schema(), "country,year,value\nAUT,2003,1\n"),
            Err(PanelError::MissingColumn { column, .. }) if column == "variable"
        ));
        assert!(matches!(
            parse_long_csv::<f64>(&schema(), "country,year,variable,value\nAUT,2003\n"),
            Err(PanelError::UnparseableValue { row: 2, .. })
        ));
    }

    #[test]
    fn measure_column_is_checked() {
        let s = SourceSchema {
            measure_column: Some("unit".into()),
            ..SourceSchema::single("wage.csv", "WAGE", WAGE_MEASURE)
        };
        let text = "country,year,value,unit\nAUT,2003,3000,USD PPP per month\nAUT,2004,2900,EUR per month\n";
        let out = parse_long_csv::<f64>(&s, text).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].variable, "WAGE");
        assert!(out.rejects[0].reason.contains("EUR"));
    }

    #[test]
    fn schema_invariants() {
        let mut s = schema();
        s.value_column = "year".into();
        assert!(s.validate().is_err());
        let mut s = schema();
        s.expected_measure = " ".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(country_code("Czechia"), Some("CZE"));
        assert_eq!(country_code(" czech republic "), Some("CZE"));
        assert_eq!(country_code("kor"), Some("KOR"));
        assert_eq!(country_code("Atlantis"), None);
    }

    #[test]
    fn manifest_shape() {
        let m = StudyManifest::oecd();
        m.validate().unwrap();
        assert_eq!(m.included.len(), 29);
        assert_eq!(m.excluded.len(), 7);
        assert_eq!(m.variables.iter().filter(|v| v.required).count(), 12);
        assert!(!m.included.contains(&"TUR".to_string()));
    }

    #[test]
    fn empty_source_list_is_uncovered() {
        let err = assemble_study_dataset::<f64>(&StudyManifest::oecd(), &[]).unwrap_err();
        assert!(matches!(err, PanelError::UncoveredVariable(v) if v == "TOTAL"));
    }

    #[test]
    fn unknown_country_is_an_error() {
        let m = StudyManifest {
            variables: vec![ManifestVariable {
                name: "TOTAL".into(),
                measure: RD_MEASURE.into(),
                required: true,
            }],
            ..StudyManifest::oecd()
        };
        let s = schema();
        let out = parse_long_csv::<f64>(&s, "country,year,variable,value\nAtlantis,2003,TOTAL,1\n").unwrap();
        let err = assemble_outcomes(&m, &[s], vec![out]).unwrap_err();
        assert!(matches!(err, PanelError::UnknownUnitCode(u) if u == "Atlantis"));
    }

    #[test]
    fn assembly_filters_and_counts() {
        let m = StudyManifest {
            variables: vec![ManifestVariable {
                name: "TOTAL".into(),
                measure: RD_MEASURE.into(),
                required: true,
            }],
            ..StudyManifest::oecd()
        };
        let s = schema();
        let text = "country,year,variable,value\nAustria,2003,TOTAL,1\nAUS,2003,TOTAL,1\nAUT,2002,TOTAL,1\nAUT,2004,GDP,1\nAUT,2004,TOTAL,x\n";
        let out = parse_long_csv::<f64>(&s, text).unwrap();
        let data = assemble_outcomes(&m, &[s], vec![out]).unwrap();
        let c = &data.coverage;
        assert_eq!((c.stored, c.dropped_units, c.dropped_periods, c.dropped_variables), (1, 1, 1, 1));
        assert_eq!(c.rejects.len(), 1);
        assert_eq!(c.rows_read, 5);
        assert_eq!(data.dataset.units(), ["AUT"]);
        assert_eq!(c.present("TOTAL"), Some(1));
    }

    fn one_cell_panel() -> PanelDataset<f64> {
        let mut recs = Vec::new();
        for (u, total) in [("AUT", 10.0), ("BEL", 40.0)] {
            recs.push(Record::new(u, 2003, "TOTAL", total));
            for sector in PERFORMANCE_SECTORS {
                for source in FUNDING_SOURCES {
                    let v = if sector == "BES" && source == "BES" { total } else { 0.0 };
                    recs.push(Record::new(u, 2003, cell_variable(sector, source), v));
                }
                recs.push(Record::new(u, 2003, format!("PERF-{sector}"), if sector == "BES" { total } else { 0.0 }));
            }
            for source in FUNDING_SOURCES {
                recs.push(Record::new(u, 2003, format!("FUND-{source}"), if source == "BES" { total } else { 0.0 }));
            }
        }
        PanelDataset::build(recs).unwrap()
    }

    #[test]
    fn all_in_one_cell() {
        for method in [ShareMethod::MeanOfRatios, ShareMethod::RatioOfSums] {
            let m = share_matrix(&one_cell_panel(), method).unwrap();
            assert_eq!(m.cells[0][0], 100.0);
            assert_eq!(m.cells.iter().flatten().sum::<f64>(), 100.0);
            assert_eq!(m.grand_total, 100.0);
            assert_eq!(m.row_totals, [100.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn missing_breakdown_is_named() {
        let recs = vec![Record::new("AUT", 2003, "TOTAL", 10.0), Record::new("AUT", 2003, "FUND-BES", 5.0)];
        let ds = PanelDataset::build(recs).unwrap();
        assert!(matches!(
            share_matrix(&ds, ShareMethod::MeanOfRatios),
            Err(PanelError::MissingBreakdown(v)) if v == "CELL-BES-BES"
        ));
    }

    #[test]
    fn annual_means_and_counts() {
        let mut recs: Vec<Record<f64>> = (0..29).map(|i| Record::new(format!("C{i:02}"), 2003, "OIL", 7.0)).collect();
        recs.extend((1..29).map(|i| Record::new(format!("C{i:02}"), 2004, "OIL", i as f64)));
        let ds = PanelDataset::build(recs).unwrap();
        let a = annual_averages(&ds, &["OIL"]).unwrap();
        assert_eq!(a.years[0].1[0], YearMean { mean: 7.0, count: 29 });
        assert_eq!(a.years[1].1[0].count, 28);
        assert_eq!(a.years[1].1[0].mean, 14.5);
        assert!(matches!(annual_averages(&ds, &["WAGE"]), Err(PanelError::UnknownVariable(_))));
    }

    #[test]
    fn canonical_dump_round_trips() {
        let recs = vec![
            Record::new("AUT", 2003, "TOTAL", 0.1 + 0.2),
            Record::new("AUT", 2004, "TOTAL", 1e-17),
            Record::new("BEL", 2003, "WAGE", 1234.5678901234567),
        ];
        let ds = PanelDataset::build(recs).unwrap();
        let dump = canonical_string(&ds);
        let back = parse_long_csv::<f64>(&schema(), &dump).unwrap();
        let ds2 = PanelDataset::build(back.records).unwrap();
        assert_eq!(ds, ds2);
        assert_eq!(canonical_string(&ds2), dump);
    }
}
