use thiserror::Error;

/// Everything that can go wrong between reading a CSV and printing a table.
#[derive(Debug, Error)]
pub enum PanelError {
    #[error("duplicate observation for unit {unit}, period {period}, variable {variable}")]
    DuplicateKey {
        unit: String,
        period: i32,
        variable: String,
    },
    #[error("non-finite value for unit {unit}, period {period}, variable {variable}")]
    NonFiniteValue {
        unit: String,
        period: i32,
        variable: String,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("need more than {needed} rows, got {rows}")]
    InsufficientRows { rows: usize, needed: usize },
    #[error("dependent variable has zero total variation")]
    ZeroTotalVariation,
    #[error("no rows left after transformations")]
    EmptyAfterTransforms,
    #[error("every unit has fewer than two complete rows")]
    UnitTooShort,
    #[error("degenerate variance components: idiosyncratic variance {0}")]
    DegenerateVariance(f64),
    #[error("zero residual degrees of freedom")]
    ZeroDf,
    #[error("cluster-robust covariance needs at least two clusters")]
    SingleCluster,
    #[error("group labels ({groups}) do not align with fit rows ({rows})")]
    MisalignedGroups { groups: usize, rows: usize },
    #[error("coefficient {index} has zero standard error")]
    ZeroStandardError { index: usize },
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("no consecutive residual pairs")]
    NoConsecutivePairs,

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: String, column: String },
    #[error("unparseable value at row {row}: {detail}")]
    UnparseableValue { row: usize, detail: String },
    #[error("empty file: {0}")]
    EmptyFile(String),
    #[error("no source covers variable `{0}`")]
    UncoveredVariable(String),
    #[error("unknown unit code `{0}`")]
    UnknownUnitCode(String),
    #[error("missing breakdown series `{0}`")]
    MissingBreakdown(String),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown table `{0}`")]
    UnknownTableId(String),

    #[error("model {model}, stage {stage}: {source}")]
    Model {
        model: String,
        stage: &'static str,
        #[source]
        source: Box<PanelError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse failure class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl PanelError {
    pub fn class(&self) -> ErrorClass {
        use PanelError::*;
        match self {
            Config(_) | UnknownTableId(_) | InvalidArgument(_) => ErrorClass::Config,
            DuplicateKey { .. }
            | NonFiniteValue { .. }
            | UnknownVariable(_)
            | MissingColumn { .. }
            | UnparseableValue { .. }
            | EmptyFile(_)
            | UncoveredVariable(_)
            | UnknownUnitCode(_)
            | MissingBreakdown(_)
            | Io(_)
            | Csv(_) => ErrorClass::Data,
            Model { source, .. } => source.class(),
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn in_model(self, model: &str, stage: &'static str) -> PanelError {
        PanelError::Model {
            model: model.to_string(),
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = PanelError> = std::result::Result<T, E>;
