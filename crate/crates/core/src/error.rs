use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while loading, validating or analysing PSA output.
///
/// Row and column coordinates carried by parse errors are 1-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("effects are {effects_rows}x{effects_cols} but costs are {costs_rows}x{costs_cols}")]
    ShapeMismatch {
        effects_rows: usize,
        effects_cols: usize,
        costs_rows: usize,
        costs_cols: usize,
    },

    #[error("fewer than 2 simulations (found {0})")]
    TooFewSimulations(usize),

    #[error("fewer than 2 interventions (found {0})")]
    TooFewInterventions(usize),

    #[error("{matrix}: non-finite value at row {row}, column {column}")]
    NonFinite {
        matrix: String,
        row: usize,
        column: usize,
    },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("intervention {index} is out of range (1..={n_int})")]
    InterventionOutOfRange { index: usize, n_int: usize },

    #[error("the reference intervention {0} cannot also be a comparator")]
    ReferenceInComparisons(usize),

    #[error("comparison list is empty")]
    EmptyComparisons,

    #[error("duplicate comparator {0}")]
    DuplicateComparison(usize),

    #[error("invalid willingness-to-pay grid: {0}")]
    InvalidGrid(String),

    #[error("willingness to pay {k} is outside the analysed range [0, {kmax}]")]
    WtpOutOfRange { k: f64, kmax: f64 },

    #[error("invalid risk-aversion coefficient {0}: must be finite and non-negative")]
    InvalidRiskAversion(f64),

    #[error("invalid market shares: {0}")]
    InvalidShares(String),

    #[error("no informative parameters")]
    NoInformativeParameters,

    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),

    #[error("parameter matrix has {params} rows but the analysis has {analysis} simulations")]
    SimulationCountMismatch { params: usize, analysis: usize },

    #[error("no decision uncertainty to rank")]
    NoDecisionUncertainty,

    #[error("unknown comparison {0}")]
    UnknownComparison(usize),

    #[error("{0}")]
    Unavailable(String),

    #[error("{source_name}: row {row}, column {column}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    /// Process exit code for command-line front ends: 3 for I/O failures,
    /// 2 for everything else (validation).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
