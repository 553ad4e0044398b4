use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (theta = {theta}, log sigma^2 = {log_sigma2}, gradient norm = {gradient_norm:e})"
    )]
    NonConvergence {
        iterations: usize,
        theta: f64,
        log_sigma2: f64,
        gradient_norm: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
