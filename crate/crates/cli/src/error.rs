use std::path::PathBuf;

use thiserror::Error;

/// Input problems (exit 2).
pub const EXIT_INPUT: i32 = 2;
/// Solver failures (exit 3).
pub const EXIT_CONVERGENCE: i32 = 3;
/// Size guards (exit 4).
pub const EXIT_SIZE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fairsel::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use fairsel::Error as E;
        match self {
            CliError::Core(e) => match e.root() {
                E::Convergence { .. } | E::NumericalIntegrity { .. } | E::DecompositionIntegrity { .. } => {
                    EXIT_CONVERGENCE
                }
                E::Size(_) => EXIT_SIZE,
                _ => EXIT_INPUT,
            },
            CliError::Usage(_) | CliError::Io { .. } => EXIT_INPUT,
        }
    }
}
