use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter record failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// The Bloch system (or its frequency-shifted variant) is numerically singular.
    #[error("singular Bloch system (condition estimate {condition:.3e}){}", at_frequency(*.omega))]
    SingularSystem { condition: f64, omega: Option<f64> },

    /// Grid refinement did not settle within the allowed number of doublings.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Output moments violate the uncertainty bound, which happens when the
    /// fields are absorbed to the level of round-off.
    #[error("precision lost: {0}")]
    PrecisionLoss(String),

    /// An observable is undefined for the given input (e.g. a ratio with zero denominator).
    #[error("undefined input: {0}")]
    UndefinedInput(String),

    /// A spectral feature cannot be extracted from the supplied spectrum.
    #[error("spectral feature undefined: {0}")]
    FeatureUndefined(String),
}

fn at_frequency(omega: Option<f64>) -> String {
    match omega {
        Some(w) => format!(" at noise frequency {w}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularSystem { .. } | Error::NonConvergence(_))
    }
}
