use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("evaluation error at (t={t}, x={x}): {source}")]
    Eval {
        t: f64,
        x: f64,
        #[source]
        source: EvalError,
    },

    #[error("integration failure at t={t} (x={x}): {reason}")]
    Integration { t: f64, x: f64, reason: String },

    #[error("map iteration failed at step {step} (x={x}): {reason}")]
    MapStep { step: usize, x: f64, reason: String },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
