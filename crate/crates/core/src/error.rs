use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The scenario failed validation; the payload lists the violated invariants.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A point outside the closed primal or dual domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The set of martingale measures is empty or has no element equivalent to the
    /// reference measure.
    #[error("no-arbitrage violated: {0}")]
    Arbitrage(String),

    #[error("capacity exceeded: {what} ({count} > cap {cap})")]
    Capacity {
        what: &'static str,
        count: usize,
        cap: usize,
    },

    #[error("no convergence after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    #[error("parse error: {0}")]
    Parse(String),
}
