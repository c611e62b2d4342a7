//! Crate-wide error type.

use std::fmt;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model construction, certificate search, design
/// computations and simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent dimensions or out-of-range parameters.
    Config(String),
    /// The transfer-function numerator fails the hyper-minimum-phase test,
    /// so no output-feedback certificate exists for any gain.
    NotHyperMinimumPhase(String),
    /// The certificate search exhausted its restarts for the given gain and
    /// decay rate without reaching feasibility.
    SearchInfeasible(InfeasibilityReport),
    /// A design-rule precondition is violated (e.g. `Ts * b0 >= 1` or
    /// `rho <= q`).
    Feasibility(String),
    /// A matrix expected to be symmetric is not.
    NonSymmetric(String),
    /// A metric is undefined for the given trace (e.g. all-zero master
    /// trajectory).
    DegenerateMetric(String),
}

/// Outcome of a failed certificate search. `hint` states the standard remedy:
/// a larger gain makes the feasible set nonempty whenever the system is
/// hyper-minimum-phase.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityReport {
    /// Gain the search was run with.
    pub gain: f64,
    /// Requested closed-loop decay rate.
    pub eta: f64,
    /// Stability degree of the numerator: the attainable upper limit for `eta`.
    pub eta0: f64,
    /// Best (lowest) objective value seen over all restarts.
    pub best_objective: f64,
    /// Number of random restarts performed.
    pub restarts: usize,
    /// Human-readable remedy.
    pub hint: String,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no certificate found for K = {}, eta = {} (eta0 = {}): best objective {} after {} restarts; {}",
            self.gain, self.eta, self.eta0, self.best_objective, self.restarts, self.hint
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NotHyperMinimumPhase(msg) => {
                write!(f, "system is not hyper-minimum-phase: {msg}")
            }
            Error::SearchInfeasible(report) => write!(f, "{report}"),
            Error::Feasibility(msg) => write!(f, "feasibility condition violated: {msg}"),
            Error::NonSymmetric(msg) => write!(f, "matrix is not symmetric: {msg}"),
            Error::DegenerateMetric(msg) => write!(f, "metric undefined: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
