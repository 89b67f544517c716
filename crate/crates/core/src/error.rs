use thiserror::Error;

use crate::design::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid design: {}", format_violations(.0))]
    InvalidDesign(Vec<Violation>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The operating point lies at or beyond electrostatic collapse.
    #[error(
        "bias {bias:.3} V is at or above the pull-in limit of {pull_in:.1} V{}",
        pressure_index.map(|i| format!(" (static pressure index {i})")).unwrap_or_default()
    )]
    PullInExceeded {
        bias: f64,
        pull_in: f64,
        pressure_index: Option<usize>,
    },

    #[error("no feasible design in the search space ({evaluated} points evaluated)")]
    Infeasible { evaluated: usize },

    /// A solver failed or a self-check did not hold.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
