use thiserror::Error;

/// Errors raised by the measure, integration and delta routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A truncated sequence was asked for an index beyond its declared depth.
    #[error("tail unspecified: index {index} requested beyond declared depth {depth}")]
    TailUnspecified { index: usize, depth: usize },

    /// The infinite product over the rectangle's sides oscillates, so the
    /// rectangle does not belong to the class on which the measure is defined.
    #[error("rectangle is not in the measurable class: side-length product oscillates")]
    NotInClass,

    /// A finite construction would exceed its configured size budget.
    #[error("budget exceeded: {what} needs {requested}, budget is {budget}")]
    Budget {
        what: &'static str,
        requested: u128,
        budget: u128,
    },

    /// A limit schedule was exhausted before successive estimates agreed.
    #[error("no convergence: {what}; last gap {gap:e} after {} estimates", partial.len())]
    NoConvergence {
        what: &'static str,
        gap: f64,
        partial: Vec<(f64, f64)>,
    },

    /// Membership of a point in a box could not be decided.
    #[error("membership undecidable at coordinate {0}")]
    Depth(usize),

    /// A linear block has (numerically) vanishing determinant.
    #[error("singular block {index}: |det| = {det:e}")]
    Singular { index: usize, det: f64 },

    /// Malformed input: unknown registry name, bad file, bad list.
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
