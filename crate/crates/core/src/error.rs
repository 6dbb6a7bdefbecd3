//! Error type shared by all analysis modules.

use std::fmt;

/// Errors produced by the analytic and simulation pipelines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    Domain(String),
    /// The requested quantity has no closed form for this distribution kind.
    Unsupported(String),
    /// A probability tail could not be driven below tolerance within the cap.
    Truncation(String),
    /// A recurrence kernel is numerically unusable (r_0 too small) or a
    /// forward solve left the representable range.
    IllConditioned(String),
    /// The traffic regime does not admit the requested quantity
    /// (e.g. asking for the supercritical root at offered load <= 1).
    Regime(String),
    /// Root bracketing failed: no sign change on the search interval.
    Bracket(String),
    /// Invalid model configuration (probabilities not summing to one,
    /// buffer too small for a single message, inconsistent parameters).
    Validation(String),
    /// A simulation/analytic comparison with zero standard error but
    /// mismatched values; no z-score can be formed.
    DegenerateComparison(String),
    /// A simulated busy cycle exceeded the event cap and was aborted.
    RunawaySimulation(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::Truncation(msg) => write!(f, "truncation error: {msg}"),
            Error::IllConditioned(msg) => write!(f, "ill-conditioned: {msg}"),
            Error::Regime(msg) => write!(f, "regime error: {msg}"),
            Error::Bracket(msg) => write!(f, "bracket error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::DegenerateComparison(msg) => write!(f, "degenerate comparison: {msg}"),
            Error::RunawaySimulation(msg) => write!(f, "runaway simulation: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
