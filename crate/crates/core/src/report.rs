//! End-to-end replication: configuration, the per-model pipeline, and the
//! rendered tables with their provenance block.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    breusch_pagan, hausman_aux, honda_lm, wooldridge_fd_serial, Effect, SerialNull, TestResult,
};
use crate::error::{PanelError, Result};
use crate::estimators::{fit_first_differences, fit_pooled, fit_within, Estimator, ModelSpec, RegressionResult};
use crate::fixture;
use crate::ingest::{
    annual_averages, assemble_outcomes, assemble_study_dataset, canonical_sources, parse_long_csv, share_matrix,
    CoverageReport, ShareMethod, SourceSchema, StudyManifest, FUNDING_SOURCES, PERFORMANCE_SECTORS,
};
use crate::panel::PanelDataset;
use crate::vcov::{ClusterCorrection, CovarianceKind};

/// The ten dependent variables, in table order.
pub const DEFAULT_MODELS: [&str; 10] = [
    "TOTAL", "FUND-BES", "FUND-GOV", "FUND-HES", "FUND-PNP", "FUND-ROW", "PERF-BES", "PERF-GOV", "PERF-HES",
    "PERF-PNP",
];
pub const REGRESSORS: [&str; 2] = ["WAGE", "OIL"];
pub const FIGURE_SERIES: [&str; 3] = ["TOTAL", "WAGE", "OIL"];
pub const TABLE_IDS: [&str; 5] = ["table2", "table3", "table4", "table5", "figure1"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Fixture,
    /// Directory of canonical-format CSV files.
    Directory(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorChoice {
    Fd,
    Within,
    Both,
}

impl EstimatorChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorChoice::Fd => "fd",
            EstimatorChoice::Within => "within",
            EstimatorChoice::Both => "both",
        }
    }

    fn fd(self) -> bool {
        self != EstimatorChoice::Within
    }

    fn within(self) -> bool {
        self != EstimatorChoice::Fd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl TableFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationConfig {
    pub data: DataSource,
    pub models: Vec<String>,
    pub estimators: EstimatorChoice,
    pub vcov: CovarianceKind,
    pub correction: ClusterCorrection,
    pub lag: usize,
    pub out: PathBuf,
    pub format: TableFormat,
    /// Only used by the Monte Carlo commands.
    pub seed: u64,
    pub digits: usize,
    pub share_method: ShareMethod,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Fixture,
            models: DEFAULT_MODELS.iter().map(|m| m.to_string()).collect(),
            estimators: EstimatorChoice::Both,
            vcov: CovarianceKind::Arellano,
            correction: ClusterCorrection::None,
            lag: 1,
            out: PathBuf::from("out"),
            format: TableFormat::Csv,
            seed: 20_190_101,
            digits: 4,
            share_method: ShareMethod::MeanOfRatios,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(PanelError::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn parse_number<N: std::str::FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .parse()
        .map_err(|_| PanelError::Config(format!("{key}: expected a non-negative integer, got `{value}`")))
}

impl ReplicationConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "data" => self.data = DataSource::Directory(PathBuf::from(value)),
            "fixture" => {
                if parse_bool("fixture", value)? {
                    self.data = DataSource::Fixture;
                }
            }
            "models" => {
                self.models = value
                    .split(',')
                    .map(str::trim)
                    .filter(|m| !m.is_empty())
                    .map(String::from)
                    .collect()
            }
            "estimator" | "estimators" => {
                self.estimators = match value {
                    "fd" => EstimatorChoice::Fd,
                    "within" => EstimatorChoice::Within,
                    "both" => EstimatorChoice::Both,
                    other => return Err(PanelError::Config(format!("unknown estimator `{other}`"))),
                }
            }
            "vcov" => self.vcov = value.parse()?,
            "correction" => {
                self.correction = match value {
                    "none" => ClusterCorrection::None,
                    "finite-cluster" => ClusterCorrection::FiniteCluster,
                    other => return Err(PanelError::Config(format!("unknown correction `{other}`"))),
                }
            }
            "lag" => self.lag = parse_number("lag", value)?,
            "out" => self.out = PathBuf::from(value),
            "format" => {
                self.format = match value {
                    "csv" => TableFormat::Csv,
                    "markdown" | "md" => TableFormat::Markdown,
                    other => return Err(PanelError::Config(format!("unknown format `{other}`"))),
                }
            }
            "seed" => self.seed = parse_number("seed", value)?,
            "digits" => self.digits = parse_number("digits", value)?,
            "share_method" | "share-method" => self.share_method = value.parse()?,
            other => return Err(PanelError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a config file body: `key = value` lines, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PanelError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(PanelError::Config("model list is empty".into()));
        }
        if let Some(m) = self.models.iter().enumerate().find(|(i, m)| self.models[..*i].contains(m)) {
            return Err(PanelError::Config(format!("model `{}` listed twice", m.1)));
        }
        if self.digits > 10 {
            return Err(PanelError::Config(format!("digits must be in 0..=10, got {}", self.digits)));
        }
        Ok(())
    }

    /// Settings that affect results, as `key = value` pairs in a fixed order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let data = match &self.data {
            DataSource::Fixture => "fixture".to_string(),
            DataSource::Directory(p) => p.display().to_string(),
        };
        vec![
            ("data", data),
            ("models", self.models.join(",")),
            ("estimator", self.estimators.as_str().into()),
            ("vcov", self.vcov.as_str().into()),
            (
                "correction",
                match self.correction {
                    ClusterCorrection::None => "none",
                    ClusterCorrection::FiniteCluster => "finite-cluster",
                }
                .into(),
            ),
            ("lag", self.lag.to_string()),
            ("format", self.format.as_str().into()),
            ("seed", self.seed.to_string()),
            ("digits", self.digits.to_string()),
            ("share_method", self.share_method.as_str().into()),
        ]
    }

    fn spec(&self, model: &str, estimator: Estimator) -> ModelSpec {
        let mut spec = ModelSpec::new(model, &REGRESSORS, self.lag, estimator).with_vcov(self.vcov);
        spec.correction = self.correction;
        spec
    }
}

/// The study panel plus what went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub dataset: PanelDataset<f64>,
    pub coverage: CoverageReport,
    /// Input label and SHA-256 digest, in read order.
    pub inputs: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_data(config: &ReplicationConfig) -> Result<LoadedData> {
    let manifest = StudyManifest::oecd();
    match &config.data {
        DataSource::Fixture => {
            let schema = SourceSchema::canonical("fixture/study_panel.csv");
            let outcome = parse_long_csv(&schema, fixture::FIXTURE_CSV)?;
            let data = assemble_outcomes(&manifest, std::slice::from_ref(&schema), vec![outcome])?;
            Ok(LoadedData {
                dataset: data.dataset,
                coverage: data.coverage,
                inputs: vec![("fixture/study_panel.csv".into(), sha256_hex(fixture::FIXTURE_CSV.as_bytes()))],
            })
        }
        DataSource::Directory(dir) => {
            let sources = canonical_sources(dir)?;
            let inputs = sources
                .iter()
                .map(|s| {
                    let bytes = std::fs::read(&s.path)?;
                    let name = s.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok((name, sha256_hex(&bytes)))
                })
                .collect::<Result<Vec<_>>>()?;
            let data = assemble_study_dataset(&manifest, &sources)?;
            Ok(LoadedData {
                dataset: data.dataset,
                coverage: data.coverage,
                inputs,
            })
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Number(f64),
    Count(usize),
    /// Not computed; rendered as `NA`.
    Missing,
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Number)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub id: &'static str,
    /// Column names, the first one naming the row labels.
    pub header: Vec<String>,
    pub rows: Vec<(String, Vec<Cell>)>,
}

/// Results kept for one dependent variable.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub name: String,
    pub fd: Option<RegressionResult<f64>>,
    pub within: Option<RegressionResult<f64>>,
    pub honda_individual: TestResult,
    pub honda_time: TestResult,
    pub serial_fd_null: Option<TestResult>,
    pub serial_levels_null: Option<TestResult>,
    pub het_fd: Option<TestResult>,
    pub het_within: Option<TestResult>,
    pub hausman: TestResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: &'static str,
    pub inputs: Vec<(String, String)>,
    pub config: Vec<(&'static str, String)>,
    pub coverage: Vec<(String, usize, usize)>,
    pub rejects: usize,
    pub oil_series: String,
}

impl Provenance {
    pub fn render(&self) -> String {
        let mut s = format!("panelkit {}\n", self.version);
        for (name, digest) in &self.inputs {
            let _ = writeln!(s, "input {name} sha256 {digest}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config {k} = {v}");
        }
        let _ = writeln!(s, "oil series: {}", self.oil_series);
        let _ = writeln!(s, "rejected rows: {}", self.rejects);
        for (name, present, complete) in &self.coverage {
            let _ = writeln!(s, "coverage {name} present {present} complete {complete}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub table2: Table,
    pub table3: Table,
    pub table4: Table,
    pub table5: Table,
    pub figure1: Table,
    pub models: Vec<ModelReport>,
    pub provenance: Provenance,
    pub digits: usize,
}

impl ReportBundle {
    pub fn table(&self, id: &str) -> Result<&Table> {
        match id {
            "table2" => Ok(&self.table2),
            "table3" => Ok(&self.table3),
            "table4" => Ok(&self.table4),
            "table5" => Ok(&self.table5),
            "figure1" => Ok(&self.figure1),
            other => Err(PanelError::UnknownTableId(other.to_string())),
        }
    }
}

/// Fits and tests one model; errors carry the model name and stage.
pub fn run_model(ds: &PanelDataset<f64>, config: &ReplicationConfig, model: &str) -> Result<ModelReport> {
    let at = |stage: &'static str| move |e: PanelError| e.in_model(model, stage);
    let pooled = fit_pooled(ds, &config.spec(model, Estimator::Pooled)).map_err(at("pooled fit"))?;
    let honda_individual = honda_lm(&pooled, Effect::Individual).map_err(at("honda"))?;
    let honda_time = honda_lm(&pooled, Effect::Time).map_err(at("honda"))?;
    let fd = if config.estimators.fd() {
        Some(fit_first_differences(ds, &config.spec(model, Estimator::FirstDifferences)).map_err(at("fd fit"))?)
    } else {
        None
    };
    let within = if config.estimators.within() {
        Some(fit_within(ds, &config.spec(model, Estimator::Within)).map_err(at("within fit"))?)
    } else {
        None
    };
    let serial = |null| fd.as_ref().map(|f| wooldridge_fd_serial(f, null)).transpose().map_err(at("serial"));
    let serial_fd_null = serial(SerialNull::FdUncorrelated)?;
    let serial_levels_null = serial(SerialNull::LevelsUncorrelated)?;
    let het_fd = fd.as_ref().map(breusch_pagan).transpose().map_err(at("breusch-pagan"))?;
    let het_within = within.as_ref().map(breusch_pagan).transpose().map_err(at("breusch-pagan"))?;
    let hausman = hausman_aux(ds, &config.spec(model, Estimator::Within)).map_err(at("hausman"))?;
    Ok(ModelReport {
        name: model.to_string(),
        fd,
        within,
        honda_individual,
        honda_time,
        serial_fd_null,
        serial_levels_null,
        het_fd,
        het_within,
        hausman,
    })
}

/// Share matrix as a table; rows are performance sectors.
pub fn share_table(ds: &PanelDataset<f64>, method: ShareMethod) -> Result<Table> {
    let m = share_matrix(ds, method)?;
    let mut header = vec!["sector".to_string()];
    header.extend(FUNDING_SOURCES.iter().map(|s| s.to_string()));
    header.push("Total".into());
    let mut rows: Vec<(String, Vec<Cell>)> = PERFORMANCE_SECTORS
        .iter()
        .enumerate()
        .map(|(i, sector)| {
            let mut cells: Vec<Cell> = m.cells[i].iter().map(|&v| Cell::Number(v)).collect();
            cells.push(Cell::Number(m.row_totals[i]));
            (sector.to_string(), cells)
        })
        .collect();
    let mut totals: Vec<Cell> = m.column_totals.iter().map(|&v| Cell::Number(v)).collect();
    totals.push(Cell::Number(m.grand_total));
    rows.push(("Total".into(), totals));
    Ok(Table {
        id: "table2",
        header,
        rows,
    })
}

/// Annual cross-country means of the figure series, with country counts.
pub fn figure_table(ds: &PanelDataset<f64>) -> Result<Table> {
    let a = annual_averages(ds, &FIGURE_SERIES)?;
    let mut header = vec!["year".to_string()];
    for v in &a.variables {
        header.push(v.clone());
        header.push(format!("{v}_n"));
    }
    let rows = a
        .years
        .iter()
        .map(|(year, means)| {
            let cells = means
                .iter()
                .flat_map(|m| [Cell::from((m.count > 0).then_some(m.mean)), Cell::Count(m.count)])
                .collect();
            (year.to_string(), cells)
        })
        .collect();
    Ok(Table {
        id: "figure1",
        header,
        rows,
    })
}

fn p(t: &Option<TestResult>) -> Cell {
    t.as_ref().map(|t| t.p_value).into()
}

/// Specification-test p-values and R² per model, plus the Hausman p-value.
pub fn test_table(models: &[ModelReport]) -> Table {
    let header = [
        "model",
        "honda_ind",
        "honda_time",
        "serial_diff",
        "serial_within",
        "het_diff",
        "het_within",
        "r2_diff",
        "r2_within",
        "hausman",
    ];
    let rows = models
        .iter()
        .map(|m| {
            let cells = vec![
                Cell::Number(m.honda_individual.p_value),
                Cell::Number(m.honda_time.p_value),
                p(&m.serial_fd_null),
                p(&m.serial_levels_null),
                p(&m.het_fd),
                p(&m.het_within),
                m.fd.as_ref().map(|f| f.r_squared).into(),
                m.within.as_ref().map(|f| f.r_squared).into(),
                Cell::Number(m.hausman.p_value),
            ];
            (m.name.clone(), cells)
        })
        .collect();
    Table {
        id: "table3",
        header: header.iter().map(|h| h.to_string()).collect(),
        rows,
    }
}

/// First-difference coefficients, standard errors and p-values.
pub fn fd_table(models: &[ModelReport]) -> Table {
    let mut names = vec!["intercept"];
    names.extend(REGRESSORS);
    coefficient_table("table4", models, &names, |m| m.fd.as_ref())
}

/// Within coefficients, standard errors and p-values.
pub fn within_table(models: &[ModelReport]) -> Table {
    coefficient_table("table5", models, &REGRESSORS, |m| m.within.as_ref())
}

/// [`run_model`] for every configured model, in configuration order.
pub fn run_models(ds: &PanelDataset<f64>, config: &ReplicationConfig) -> Result<Vec<ModelReport>> {
    config.validate()?;
    config.models.par_iter().map(|m| run_model(ds, config, m)).collect()
}

fn coefficient_table(
    id: &'static str,
    models: &[ModelReport],
    names: &[&str],
    pick: impl Fn(&ModelReport) -> Option<&RegressionResult<f64>>,
) -> Table {
    let mut header = vec!["model".to_string()];
    for n in names {
        header.extend([n.to_string(), format!("{n}_se"), format!("{n}_p")]);
    }
    let rows = models
        .iter()
        .filter_map(|m| {
            let fit = pick(m)?;
            let cells = names
                .iter()
                .flat_map(|n| match fit.names.iter().position(|x| x == n) {
                    Some(j) => [
                        Cell::Number(fit.coefficients[j]),
                        Cell::Number(fit.standard_errors[j]),
                        Cell::Number(fit.p_values[j]),
                    ],
                    None => [Cell::Missing; 3],
                })
                .collect();
            Some((m.name.clone(), cells))
        })
        .collect();
    Table { id, header, rows }
}

/// Runs every model and builds all tables.
pub fn run_replication(config: &ReplicationConfig) -> Result<ReportBundle> {
    config.validate()?;
    let data = load_data(config)?;
    replicate_on(config, &data)
}

/// [`run_replication`] on data that is already loaded.
pub fn replicate_on(config: &ReplicationConfig, data: &LoadedData) -> Result<ReportBundle> {
    let ds = &data.dataset;
    let models = run_models(ds, config)?;
    Ok(ReportBundle {
        table2: share_table(ds, config.share_method)?,
        table3: test_table(&models),
        table4: fd_table(&models),
        table5: within_table(&models),
        figure1: figure_table(ds)?,
        provenance: provenance(config, data),
        models,
        digits: config.digits,
    })
}

pub fn provenance(config: &ReplicationConfig, data: &LoadedData) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION"),
        inputs: data.inputs.clone(),
        config: config.echo(),
        coverage: data
            .coverage
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.present, v.complete))
            .collect(),
        rejects: data.coverage.rejects.len(),
        oil_series: StudyManifest::oecd().oil_series,
    }
}

/// Fixed-point text with `digits` decimals, rounding half away from zero.
///
/// Rounds the exact binary value, so no double rounding through an
/// intermediate decimal. Negative zero prints without a sign.
pub fn format_fixed(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    // 1100 decimals hold every f64 exactly
    let exact = format!("{:.1100}", x.abs());
    let (int_part, frac_part) = exact.split_once('.').expect("fixed notation has a point");
    let mut kept: Vec<u8> = int_part.bytes().chain(frac_part.bytes().take(digits)).collect();
    if frac_part.as_bytes()[digits] >= b'5' {
        let mut i = kept.len();
        loop {
            if i == 0 {
                kept.insert(0, b'1');
                break;
            }
            i -= 1;
            if kept[i] == b'9' {
                kept[i] = b'0';
            } else {
                kept[i] += 1;
                break;
            }
        }
    }
    let int_len = kept.len() - digits;
    let mut s = String::from_utf8(kept[..int_len].to_vec()).expect("ascii digits");
    if digits > 0 {
        s.push('.');
        s.push_str(std::str::from_utf8(&kept[int_len..]).expect("ascii digits"));
    }
    if x < 0.0 && s.bytes().any(|b| (b'1'..=b'9').contains(&b)) {
        s.insert(0, '-');
    }
    s
}

fn render_cell(c: Cell, digits: usize) -> String {
    match c {
        Cell::Number(v) => format_fixed(v, digits),
        Cell::Count(n) => n.to_string(),
        Cell::Missing => "NA".into(),
    }
}

pub fn render(table: &Table, format: TableFormat, digits: usize) -> String {
    let rows = table.rows.iter().map(|(label, cells)| {
        std::iter::once(label.clone())
            .chain(cells.iter().map(|&c| render_cell(c, digits)))
            .collect::<Vec<_>>()
    });
    let mut s = String::new();
    match format {
        TableFormat::Csv => {
            s.push_str(&table.header.join(","));
            s.push('\n');
            for r in rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(s, "| {} |", table.header.join(" | "));
            let align: Vec<&str> = (0..table.header.len()).map(|i| if i == 0 { ":---" } else { "---:" }).collect();
            let _ = writeln!(s, "| {} |", align.join(" | "));
            for r in rows {
                let _ = writeln!(s, "| {} |", r.join(" | "));
            }
        }
    }
    s
}

pub fn render_table(bundle: &ReportBundle, which: &str, format: TableFormat) -> Result<String> {
    Ok(render(bundle.table(which)?, format, bundle.digits))
}

/// Writes all five tables and the provenance block.
pub fn write_bundle(bundle: &ReportBundle, format: TableFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = TABLE_IDS.map(|id| bundle.table(id).expect("every id is present"));
    write_tables(&tables, &bundle.provenance, format, bundle.digits, dir)
}

/// Writes each table as `<id>.<ext>` plus `provenance.txt` into `dir`.
///
/// Everything is rendered before the first file is created.
pub fn write_tables(
    tables: &[&Table],
    provenance: &Provenance,
    format: TableFormat,
    digits: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, String)> = tables
        .iter()
        .map(|t| (dir.join(format!("{}.{}", t.id, format.extension())), render(t, format, digits)))
        .collect();
    files.push((dir.join("provenance.txt"), provenance.render()));
    std::fs::create_dir_all(dir)?;
    for (path, text) in &files {
        std::fs::write(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
