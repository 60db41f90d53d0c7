use std::fmt;
use std::path::PathBuf;

/// Pipeline stage a failure originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Smoothing,
    Features,
    Clustering,
    Pca,
    Regression,
    Boundaries,
    Validation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Smoothing => "smoothing",
            Stage::Features => "features",
            Stage::Clustering => "clustering",
            Stage::Pca => "pca",
            Stage::Regression => "regression",
            Stage::Boundaries => "boundaries",
            Stage::Validation => "validation",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // numerical kernels
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SingularMatrix: pivot {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("NoConvergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),

    // series processing
    #[error("TooFewSamples: {found} samples, need at least {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("InvalidAlpha: {0} is outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("NonPositiveTrend: series '{0}' never reaches the threshold and its terminal slope is not positive")]
    NonPositiveTrend(String),
    #[error("time stamps must be strictly increasing (series '{0}')")]
    UnsortedTimes(String),

    // clustering / pca
    #[error("TooFewPoints: {found} points for k = {k}")]
    TooFewPoints { found: usize, k: usize },
    #[error("DegenerateInput: all points identical with k = {k}")]
    DegenerateInput { k: usize },
    #[error("TooFewRows: {0} rows, need at least 2")]
    TooFewRows(usize),

    // regression
    #[error("RankDeficient: regressor matrix is numerically singular")]
    RankDeficient,
    #[error("ConstantResponse: response has zero variance but the fit is not exact")]
    ConstantResponse,
    #[error("too few observations: {observations} rows for {parameters} coefficients")]
    TooFewObservations {
        observations: usize,
        parameters: usize,
    },

    // svm
    #[error("SingleClass: training labels contain only one class")]
    SingleClass,
    #[error("DegenerateBoundary: boundary weights are both zero")]
    DegenerateBoundary,
    #[error("invalid label {0}, expected +1 or -1")]
    InvalidLabel(i8),

    // domain
    #[error("MissingField: mixture '{mixture}' has no value for '{field}'")]
    MissingField { mixture: String, field: &'static str },
    #[error("NegativeTime: {0}")]
    NegativeTime(f64),
    #[error("NonIncreasing: model for group {0} does not increase with time")]
    NonIncreasing(String),
    #[error("AlreadyFailed: predicted expansion at t = 0 is {0} (threshold reached)")]
    AlreadyFailed(f64),
    #[error("EmptyGroup: group {group} has {count} mixtures, need at least 2")]
    EmptyGroup { group: String, count: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // io
    #[error("ParseError in {file}, line {line}{}: {message}", field.as_deref().map(|f| format!(", field '{f}'")).unwrap_or_default())]
    Parse {
        file: String,
        line: usize,
        field: Option<String>,
        message: String,
    },
    #[error("RangeViolation in {file}, line {line}: field '{field}' = {value} outside {range}")]
    RangeViolation {
        file: String,
        line: usize,
        field: String,
        value: f64,
        range: &'static str,
    },
    #[error("DuplicateId in {file}, line {line}: '{id}' already defined")]
    DuplicateId { file: String, line: usize, id: String },
    #[error("DuplicateTimestamp in {file}, line {line}: series '{id}' repeats t = {t}")]
    DuplicateTimestamp {
        file: String,
        line: usize,
        id: String,
        t: f64,
    },
    #[error("NonFiniteValue in {file}, line {line}, field '{field}'")]
    NonFiniteValue {
        file: String,
        line: usize,
        field: String,
    },
    #[error("missing column '{column}' in {file}")]
    MissingColumn { file: String, column: String },
    #[error("no rows in {0}")]
    NoRows(String),
    #[error("SchemaVersionMismatch: found '{found}', expected '{expected}'")]
    SchemaVersionMismatch { found: String, expected: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}{}", mixture.as_deref().map(|m| format!(" (mixture '{m}')")).unwrap_or_default())]
    Stage {
        stage: Stage,
        mixture: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            mixture: None,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_mixture(self, stage: Stage, mixture: &str) -> Error {
        Error::Stage {
            stage,
            mixture: Some(mixture.to_string()),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::RankDeficient
                | Error::ConstantResponse
                | Error::NonPositiveTrend(_)
                | Error::NonIncreasing(_)
                | Error::AlreadyFailed(_)
                | Error::EmptyGroup { .. }
                | Error::DegenerateInput { .. }
                | Error::DegenerateBoundary
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
