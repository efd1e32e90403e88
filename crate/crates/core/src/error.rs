use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("query budget of {budget} distinct inputs exhausted")]
    Budget { budget: u64 },

    #[error("query input {input} outside the {bits}-bit domain")]
    Input { input: u64, bits: u32 },

    #[error("instance too large: {what} is {estimate}, limit {limit}")]
    Size {
        what: &'static str,
        estimate: u128,
        limit: u128,
    },

    #[error("out of regime: {0}")]
    Regime(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}
