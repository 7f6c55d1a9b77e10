use thiserror::Error;

/// Errors raised by the model, analytics and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("derivative order {0} is not supported (expected 1 to 4)")]
    DerivativeOrder(u8),

    #[error("buy count {buys} exceeds step count {steps}")]
    BuyCount { steps: u64, buys: u64 },

    #[error("lag {lag} is invalid for step {step} (need 1 <= lag < step)")]
    Lag { step: usize, lag: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("variance peak for nu = {nu} sits on the scan boundary n = {horizon}; extend the horizon")]
    PeakAtBoundary { nu: f64, horizon: usize },

    #[error("raw trajectory export needs {required} bytes, over the {budget} byte budget")]
    MemoryBudget { required: usize, budget: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, 1)",
        })
    }
}
