use thiserror::Error;

use crate::model::{Role, Strategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("residual self-interference factor beta = {0} must exceed 1/2")]
    InfeasibleBeta(f64),

    #[error("receiver {receiver} is not addressed when its pair plays {own}")]
    InvalidRole { receiver: Role, own: Strategy },

    #[error("invalid mixed strategy: {0}")]
    InvalidStrategy(String),

    #[error("no mixed equilibrium without dominated actions: {0}")]
    NoEquilibrium(String),

    #[error("pi_tfd = {pi_tfd} lies outside the equilibrium interval [{min}, {max}]")]
    OutOfBand { pi_tfd: f64, min: f64, max: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
