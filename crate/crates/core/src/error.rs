use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state ({u}, {i}, {v}) is outside the model domain: {reason}")]
    Domain {
        u: f64,
        i: f64,
        v: f64,
        reason: &'static str,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("continuation failed at {param} = {value}: {reason}")]
    ContinuationFailed {
        param: &'static str,
        value: f64,
        reason: String,
    },

    #[error("invalid injection schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
