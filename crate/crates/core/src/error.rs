use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// A caller-supplied argument is unusable (empty sample, bad count, ...).
    #[error("invalid argument: {0}")]
    Argument(&'static str),
    /// A race time string could not be parsed.
    #[error("cannot parse race time at byte {position}: {reason}")]
    Parse {
        position: usize,
        reason: &'static str,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
