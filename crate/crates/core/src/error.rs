//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Lattice point outside the weight field.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// Start point is not component-wise below the end point.
    #[error("ordering error: {0}")]
    Ordering(String),

    /// Requested size exceeds a configured resource cap.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Invalid hexagon geometry.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Construction does not fit inside the field.
    #[error("size error: {0}")]
    Size(String),

    /// Operation requires a different phase of the model.
    #[error("phase error: {0}")]
    Phase(String),

    /// Value outside the float-safe range of a linear-space check.
    #[error("range error: {0}")]
    Range(String),

    /// Polygamma order other than 1 or 2.
    #[error("unsupported polygamma order {0}")]
    UnsupportedOrder(u32),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed binary field file or config.
    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
