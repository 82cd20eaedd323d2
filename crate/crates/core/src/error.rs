use std::path::PathBuf;

use crate::prob::SubsetKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Unknown variable, malformed schema, or a tensor that does not match its schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate evidence: conditioning event {0} has probability zero")]
    DegenerateEvidence(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// An information quantity came out more negative than rounding can explain.
    #[error("numerical integrity violated: {quantity} = {value:e}")]
    NumericalIntegrity { quantity: &'static str, value: f64 },

    #[error(
        "solver did not converge after {iterations} iterations \
         (objective {objective:.6e} bits, gap {objective_gap:.3e})"
    )]
    Convergence {
        iterations: usize,
        objective: f64,
        objective_gap: f64,
        /// Best feasible coupling found, flattened row-major over (T, R1, R2).
        best_iterate: Vec<f64>,
    },

    #[error("decomposition integrity violated: {component} = {value:e}")]
    DecompositionIntegrity { component: &'static str, value: f64 },

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("incomplete coefficient table: {0}")]
    Table(String),

    #[error("unknown level {value:?} in column {column:?} (record {row})")]
    Level { row: usize, column: String, value: String },

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("subset {key}: {source}")]
    Subset {
        key: SubsetKey,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_subset(self, key: SubsetKey) -> Self {
        match self {
            already @ Error::Subset { .. } => already,
            other => Error::Subset {
                key,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through subset tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Subset { source, .. } => source.root(),
            other => other,
        }
    }
}
