//! Error taxonomy shared by the library and the command-line tool.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the documented domain of an operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation that is not defined for the given grid or model.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The ground-state flow stopped before meeting its tolerances. Carries
    /// the last iterate and its diagnostics so callers can inspect or resume.
    #[error(
        "ground-state flow did not converge: {iterations} iterations, \
         energy {energy:.6e}, residual {residual:.3e} (target {target:.3e})"
    )]
    ConvergenceFailure {
        iterations: u64,
        energy: f64,
        residual: f64,
        target: f64,
        /// Last accepted iterate (node samples).
        last_iterate: Vec<f64>,
    },

    /// The constrained energy ran away downward; the configured regime has no
    /// minimizer at this mass.
    #[error("energy unbounded below along the flow (E = {energy:.6e} after {iterations} iterations)")]
    UnboundedBelow { iterations: u64, energy: f64 },

    /// A time step failed even after exhausting the step-halving budget.
    #[error("time step failed at t = {t:.6}: fixed-point sweeps did not settle after {retries} dt-halvings")]
    StepFailure { t: f64, retries: u32 },

    /// A malformed or inconsistent run configuration.
    #[error("config error ({key}): {message}")]
    Config { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: msg.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code contract: 0 success, 2 config, 3 convergence,
    /// 4 step failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::Unsupported(_) => 2,
            Error::ConvergenceFailure { .. } | Error::UnboundedBelow { .. } => 3,
            Error::StepFailure { .. } => 4,
            Error::Io { .. } => 1,
        }
    }
}
