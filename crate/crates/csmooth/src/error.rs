use thiserror::Error;

/// Errors raised by space construction, fitting and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("smoothness violation at knot {knot}, derivative order {order}: jump {jump:.3e}")]
    Smoothness { knot: usize, order: usize, jump: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
