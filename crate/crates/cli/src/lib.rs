//! Command-line harness: structured-text configuration, the four
//! subcommands, and CSV/SVG artifact emission.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod report;
pub mod svg;

use std::fmt;

/// Errors with a stable exit-code contract: 2 for configuration problems,
/// 3 for design infeasibility, 4 for a divergent simulation.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Divergence { t: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Divergence { .. } => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            CliError::Divergence { t } => write!(f, "simulation diverged at t = {t} s"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ratesync_core::Error> for CliError {
    fn from(e: ratesync_core::Error) -> Self {
        use ratesync_core::Error as E;
        match e {
            E::Config(_) | E::NonSymmetric(_) | E::DegenerateMetric(_) => {
                CliError::Config(e.to_string())
            }
            E::NotHyperMinimumPhase(_) | E::SearchInfeasible(_) | E::Feasibility(_) => {
                CliError::Infeasible(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}
