use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation at pole s = {at}")]
    PoleEvaluation { at: Complex64 },

    #[error("invalid coding: {0}")]
    InvalidCoding(String),

    #[error("improper transfer function: {0}")]
    Improper(String),

    #[error("singular signal graph: dependent equations for {}", .equations.join(", "))]
    Structural { equations: Vec<String> },

    #[error("degenerate loop: 1 + K(s)P(s) is identically zero")]
    DegenerateLoop,

    #[error("simulation error: {0}")]
    Simulation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
