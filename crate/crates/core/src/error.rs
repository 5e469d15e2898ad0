//! Error type shared by every layer of the simulator.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a physical or numerical constraint.
    #[error("invalid value for `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    /// Malformed configuration text.
    #[error("config syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    /// A field or plate was used in the wrong plane.
    #[error("plane mismatch: expected {expected:?} plane, got {found:?}")]
    PlaneMismatch {
        expected: crate::field::Plane,
        found: crate::field::Plane,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The input beam is (numerically) parallel to the solution mode.
    #[error("degenerate overlap |chi| = {overlap:.6}: input is parallel to the solution mode")]
    DegenerateOverlap { overlap: f64 },

    #[error("two-mode steady state is singular at alpha = {alpha}")]
    SingularSystem { alpha: f64 },

    /// The steady-state iteration hit its cap without reaching tolerance.
    #[error("steady state did not converge at alpha = {alpha}: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        alpha: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("non-finite field after round trip {round_trip}")]
    NonFinite { round_trip: usize },

    #[error("analysis failed: {0}")]
    Analysis(String),

    #[error("mask file {path}: {message}")]
    Mask { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category label used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. }
            | Error::Syntax { .. }
            | Error::PlaneMismatch { .. }
            | Error::GridMismatch(_)
            | Error::DegenerateOverlap { .. }
            | Error::Mask { .. } => "config",
            Error::SingularSystem { .. }
            | Error::NonConvergence { .. }
            | Error::NonFinite { .. }
            | Error::Analysis(_) => "numerical",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 config, 3 convergence/numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "numerical" => 3,
            _ => 4,
        }
    }
}
