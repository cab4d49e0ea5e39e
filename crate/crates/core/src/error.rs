use thiserror::Error;

use crate::netlist::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A state operation was called outside its preconditions.
    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    #[error("component {index} ({kind}): {source}")]
    Component {
        index: usize,
        kind: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("fidelity undefined: total herald probability is zero")]
    UndefinedFidelity,

    #[error(
        "quadrature grid of {points} points exceeds the budget of {budget}; \
         use the monte-carlo method instead"
    )]
    QuadratureBudget { points: u128, budget: u128 },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn op(msg: impl Into<String>) -> Self {
        Error::InvalidOperation(msg.into())
    }
}
