use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The configuration text does not match the schema.
    #[error("schema error at `{key}`: {message}")]
    Schema { key: String, message: String },

    /// A value parsed but violates a physical or structural invariant.
    #[error("validation error on `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("steady state is not unique: generator null space has dimension {null_dim}")]
    Degenerate { null_dim: usize },

    #[error("integrator step size underflow at t = {t:.6e} s (h = {h:.3e} s): {detail}")]
    Stiffness { t: f64, h: f64, detail: String },

    #[error("population of level {level} fell to {value:.3e} (fraction of n_NV) at t = {t:.6e} s")]
    NegativePopulation { level: usize, value: f64, t: f64 },

    #[error("no positive grating period solves the matching condition: {0}")]
    Domain(String),

    #[error("no grating coupling: required sin(theta) = {sin_theta:.6} lies outside [-1, 1]")]
    NoCoupling { sin_theta: f64 },

    #[error("surface-plasmon dispersion pole: |eps_m + eps_d| = {0:.3e}")]
    Pole(f64),

    #[error("field map format error: {0}")]
    Format(String),

    #[error("requested depth {requested:.6e} m exceeds map extent {available:.6e} m")]
    Extent { requested: f64, available: f64 },

    #[error("query point ({x:.6e}, {y:.6e}) lies on wire axis {wire}")]
    Singularity { x: f64, y: f64, wire: usize },

    #[error("fractional absorption {0:.6} exceeds unity")]
    UnphysicalAbsorption(f64),

    #[error("SNR undefined: both detected intensities are zero")]
    UndefinedSnr,

    #[error("optimizer objective is flat (maximum {0:.3e}); no distinguished optimum")]
    DegenerateOptimum(f64),

    #[error("A_pixel = {value:.6e} outside phase table range [{min:.6e}, {max:.6e}]")]
    Extrapolation { value: f64, min: f64, max: f64 },

    #[error("cell {cell}: {source}")]
    Cell {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 1 for input/validation problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. }
            | Error::Validation { .. }
            | Error::Format(_)
            | Error::Extent { .. }
            | Error::Io { .. } => 1,
            Error::Cell { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
