//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-differentiable expression: {0}")]
    NonDifferentiable(String),
    #[error("empty cross-section: {0}")]
    EmptySection(String),
    #[error("cross-section is not a single interval: {0}")]
    MultiComponent(String),
    #[error("degenerate coordinate map: {0}")]
    DegenerateMap(String),
    #[error("coefficient matrix not positive definite: {0}")]
    NonSpd(String),
    #[error("cg failed to converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("conflicting constraints on node {0}")]
    ConflictingConstraints(usize),
    #[error("effective-coefficient cross-check failed: {0}")]
    CrossCheckFailure(String),
    #[error("point outside domain: {0}")]
    OutOfDomain(String),
    #[error("resolution cap exceeded: {0}")]
    Resolution(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
