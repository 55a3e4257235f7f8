use thiserror::Error;

use crate::lmc::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown atomic proposition `{0}`")]
    UnknownProposition(String),

    #[error("{0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("asymmetric relation: ({0}, {1}) present without ({1}, {0})")]
    AsymmetricRelation(String, String),

    #[error("scale guard: {what} would reach {requested}, limit is {limit}")]
    ScaleGuard {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("states {s} and {t} are not {eps}-bisimilar (minimal epsilon {min_eps})")]
    NotBisimilar {
        s: String,
        t: String,
        eps: f64,
        min_eps: f64,
    },

    #[error("labels vary inside cell {cell}: {detail}")]
    LabelsNotConstant { cell: usize, detail: String },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("row {row} of the abstract kernel sums to {sum}")]
    RowDefect { row: usize, sum: f64 },

    #[error("kernel expression: {0}")]
    Expression(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
