//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("`{name}` expects {expected} argument(s), got {got} (at byte {offset})")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
        offset: usize,
    },

    #[error("domain error evaluating `{op}`: {message}")]
    Domain { op: String, message: String },

    #[error("missing binding for variable `{name}`")]
    MissingBinding { name: String },

    #[error("invalid system specification: {0}")]
    InvalidSpec(String),

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error("speed |a_{j}| fell below the floor {floor} at (x, t) = ({x}, {t})")]
    SpeedFloor {
        j: usize,
        floor: f64,
        x: f64,
        t: f64,
    },

    #[error("characteristic left the strip before reaching xi = {xi} (component {j})")]
    CurveLeftDomain { j: usize, xi: f64 },

    #[error("incompatible initial data: defect {defect:.3e} exceeds {limit:.3e}")]
    Incompatible { defect: f64, limit: f64 },

    #[error(
        "operator powers did not stabilize within {bound} iterations (residual {residual:.3e})"
    )]
    NoStabilization { bound: usize, residual: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
