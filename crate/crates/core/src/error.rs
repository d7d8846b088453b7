use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The orbit never entered the ε-ball around the stimulus.
    #[error(
        "neuron did not recognise stimulus {stimulus} within {max_iterations} iterations{}",
        location(*row, *attribute)
    )]
    NonConvergence {
        stimulus: f64,
        max_iterations: usize,
        row: Option<usize>,
        attribute: Option<usize>,
    },

    #[error("attribute {index} is constant (min == max == {value})")]
    ConstantAttribute { index: usize, value: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("class {class} has no training rows")]
    EmptyClass { class: usize },

    #[error("k = {k} exceeds the {rows} available training rows")]
    KTooLarge { k: usize, rows: usize },

    #[error("label {label} is out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("baseline F1 must be positive, got {0}")]
    ZeroBaseline(f64),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("unknown label {label:?} at row {row}")]
    UnknownLabel { label: String, row: usize },

    #[error("class {class} has {available} rows, need at least {required}")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("{rows} rows cannot be split into {folds} folds")]
    TooFewRows { rows: usize, folds: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid point {point} failed: {source}")]
    GridPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("results are not comparable: {0}")]
    Mismatch(String),

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(row: Option<usize>, attribute: Option<usize>) -> String {
    match (row, attribute) {
        (Some(r), Some(a)) => format!(" (row {r}, attribute {a})"),
        (Some(r), None) => format!(" (row {r})"),
        (None, Some(a)) => format!(" (attribute {a})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True when the failure (possibly wrapped in a grid point) is a firing-loop timeout.
    pub fn is_nonconvergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::GridPoint { source, .. } => source.is_nonconvergence(),
            _ => false,
        }
    }

    /// Problems with the input data itself, as opposed to configuration or IO.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::UnknownLabel { .. }
            | Error::ConstantAttribute { .. }
            | Error::ClassTooSmall { .. }
            | Error::EmptyClass { .. }
            | Error::TooFewRows { .. }
            | Error::LabelOutOfRange { .. }
            | Error::ShapeMismatch { .. }
            | Error::Csv(_)
            | Error::UnknownDataset(_) => true,
            Error::GridPoint { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    pub(crate) fn at_cell(self, row: usize, attribute: usize) -> Self {
        match self {
            Error::NonConvergence {
                stimulus,
                max_iterations,
                ..
            } => Error::NonConvergence {
                stimulus,
                max_iterations,
                row: Some(row),
                attribute: Some(attribute),
            },
            other => other,
        }
    }
}
