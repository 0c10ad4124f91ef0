use std::fmt;

/// Library-wide error type.
///
/// Variants carry enough context to attribute a failure to the module that
/// raised it; the CLI maps them onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mathematical precondition on the input does not hold
    /// (non-positive-definite matrix, ellipticity lost, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller passed arguments outside the documented contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The explicit time march would not be monotone with the requested steps.
    #[error("CFL condition violated: need at least {required} time steps, got {given}")]
    Cfl { required: usize, given: usize },

    /// The spatial grid does not leave enough room around the region of interest.
    #[error("insufficient padding: need {required}, have {available}")]
    Padding { required: f64, available: f64 },

    /// A numerical procedure failed to deliver its guarantee.
    #[error("numerical failure in {module}: {message}")]
    Numerical { module: Module, message: String },

    /// A persisted file could not be parsed or failed validation on load.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Module attribution for numerical failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    Numerics,
    Payoffs,
    Envelope,
    Hjb,
    Hedging,
    Dp,
    Dual,
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Module::Numerics => "numerics",
            Module::Payoffs => "payoffs",
            Module::Envelope => "envelope",
            Module::Hjb => "hjb",
            Module::Hedging => "hedging",
            Module::Dp => "dp",
            Module::Dual => "dual",
        };
        f.write_str(name)
    }
}

impl Error {
    pub(crate) fn numerical(module: Module, message: impl Into<String>) -> Self {
        Error::Numerical { module, message: message.into() }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
