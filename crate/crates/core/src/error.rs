use std::fmt;

use thiserror::Error;

/// A distortion or parameter-set constraint that can make a problem infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Constraint {
    /// Side receiver 1, `Var(S | U11, U21) <= D1`.
    Receiver1,
    /// Side receiver 2, `Var(S | U12, U22) <= D2`.
    Receiver2,
    /// Central receiver, `Var(S | all four descriptions) <= D0`.
    Central,
    /// The converse parameter set is empty for these targets.
    ParameterSet,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::Receiver1 => "D1 (receiver 1)",
            Constraint::Receiver2 => "D2 (receiver 2)",
            Constraint::Central => "D0 (central receiver)",
            Constraint::ParameterSet => "converse parameter set",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid source model: {0}")]
    InvalidModel(String),

    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),

    #[error("invalid distortion targets: {0}")]
    InvalidTargets(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("label error: {0}")]
    Labels(String),

    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    #[error("mutual information is infinite: {0}")]
    InfiniteMutualInformation(String),

    #[error("infeasible: constraint {constraint} cannot be met ({detail})")]
    Infeasible { constraint: Constraint, detail: String },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("internal contradiction: {0}")]
    Contradiction(String),

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
