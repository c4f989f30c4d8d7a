//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tree construction, market operations and solvers.
#[derive(Debug, Error)]
pub enum ArborError {
    /// A domain precondition on an input value failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Vector or matrix dimensions do not match the tree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An operation requiring a self-financing strategy received one that is not.
    #[error("strategy is not self-financing (first violation at node `{0}`)")]
    NotSelfFinancing(String),

    /// `promote_to_admissible` requires a self-financing arbitrage as input.
    #[error("strategy is not a self-financing arbitrage: {0}")]
    NotAnArbitrage(String),

    /// A measure handed to a pricing operation fails the martingale check.
    #[error("measure is not a martingale measure (worst residual {residual:.3e})")]
    NotMartingaleMeasure { residual: f64 },

    /// Completeness and replication are undefined on markets with arbitrage.
    #[error("market admits arbitrage; {0} is undefined")]
    ArbitrageMarket(&'static str),

    /// A numerical solver failed for reasons other than genuine infeasibility.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// The first-order duality relationship failed beyond tolerance.
    #[error("duality violated: {0}")]
    DualityViolation(String),

    /// Both or neither branch of the arbitrage dichotomy fired. Should be
    /// impossible on a valid tree; indicates a defect, not bad input.
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    /// Malformed tree, claim or measure file.
    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ArborError>;
