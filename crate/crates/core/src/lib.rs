//! Information-theoretic feature scoring for fairness-aware selection.

pub mod error;
pub mod coefficients;
pub mod exec;
pub mod ingest;
pub mod pid;
pub mod prob;
pub mod shapley;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
pub use exec::Execution;
