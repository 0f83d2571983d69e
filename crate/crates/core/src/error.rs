use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error estimate {error} after {subdivisions} subdivisions")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("no convergence after {iterations} iterations (bracket width {width})")]
    NoConvergence { iterations: usize, width: f64 },

    #[error("critical point classification disagrees across step sizes: {0}")]
    Undetermined(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Rejects anything outside the open unit interval, including NaN.
pub(crate) fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} = {v} is outside (0, 1)"))
    }
}
