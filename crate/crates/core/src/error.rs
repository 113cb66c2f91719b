use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {left} points / R = {left_radius} vs {right} points / R = {right_radius}")]
    GridMismatch {
        left: usize,
        left_radius: f64,
        right: usize,
        right_radius: f64,
    },

    #[error("ground state did not converge after {steps} steps (last energy change {residual:e})")]
    GroundStateNotConverged { steps: usize, residual: f64 },

    #[error(
        "barrier calibration could not bracket target reflection {target}: \
         reflection {low_reflection} at amplitude {low_amplitude}, \
         {high_reflection} at amplitude {high_amplitude}"
    )]
    CalibrationBracket {
        target: f64,
        low_amplitude: f64,
        low_reflection: f64,
        high_amplitude: f64,
        high_reflection: f64,
    },

    #[error("scheme `{scheme}`: {source}")]
    Scheme {
        scheme: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps an error with the scheme that produced it.
    pub fn in_scheme(self, scheme: &str) -> Self {
        Error::Scheme {
            scheme: scheme.to_string(),
            source: Box::new(self),
        }
    }

    /// True when an iterative procedure ran out of budget: ground-state
    /// relaxation or barrier bracketing.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::GroundStateNotConverged { .. } | Error::CalibrationBracket { .. } => true,
            Error::Scheme { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }

    /// True for configuration errors, including ones wrapped in scheme context.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Scheme { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
