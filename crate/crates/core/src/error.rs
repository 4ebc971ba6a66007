use thiserror::Error;

/// Errors raised by the model, the solvers and the command-line layer.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters or simulation settings violate an invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// The budget bracket could not be made to straddle the target wealth.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Budget value was not decreasing across bisection iterates.
    #[error(
        "budget not monotone in alpha: budget({alpha_lo:e}) = {budget_lo:e} <= budget({alpha_hi:e}) = {budget_hi:e}"
    )]
    NonMonotone {
        alpha_lo: f64,
        budget_lo: f64,
        alpha_hi: f64,
        budget_hi: f64,
    },

    /// A Monte Carlo estimate is too close to its own noise floor to divide by.
    #[error("unreliable estimate: value {value:e} with standard error {std_error:e}")]
    Unreliable { value: f64, std_error: f64 },

    /// An operation was requested before the state it depends on exists.
    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Calibration(_) | Error::NonMonotone { .. } | Error::Unreliable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
