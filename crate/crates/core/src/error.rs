use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow evaluating {what}: exponent {exponent:.6e}")]
    Overflow { what: &'static str, exponent: f64 },

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:.16e}, achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("pole: {0}")]
    Pole(String),

    #[error("inadmissible initial measure: {0}")]
    InadmissibleMeasure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// Monte Carlo paths produced non-finite values.
    #[error("{divergent} of {total} paths diverged (first at step {first_step})")]
    Divergence {
        divergent: usize,
        total: usize,
        first_step: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

pub(crate) fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}
