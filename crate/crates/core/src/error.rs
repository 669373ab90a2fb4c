use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("occupation {occupation} of mode `{mode}` exceeds truncation {levels}")]
    Occupation {
        mode: String,
        occupation: usize,
        levels: usize,
    },

    #[error("missing frequency for tunable mode `{0}`")]
    MissingFrequency(String),

    #[error("excitation sector {requested} exceeds the maximum representable {max}")]
    Sector { requested: usize, max: usize },

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("eigenvalue gap {gap:.3e} rad/ns below threshold at t = {time_ns} ns")]
    DegenerateGap { time_ns: f64, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step convergence failure: halving the step changed a final population by {change:.3e}")]
    Convergence { change: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("traces never approach inside the scan range (minimum at boundary index {0})")]
    NoCrossing(usize),

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("check failed: {0}")]
    Check(String),

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by invalid user input rather than by a
    /// numerical or runtime problem.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Model(_)
                | Error::UnknownMode(_)
                | Error::Occupation { .. }
                | Error::MissingFrequency(_)
                | Error::Sector { .. }
                | Error::InvalidPulse(_)
                | Error::Dimension { .. }
                | Error::InvalidArgument(_)
                | Error::Config { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
