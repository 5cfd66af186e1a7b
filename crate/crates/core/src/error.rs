use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("item {item} out of range for {m} items")]
    ItemOutOfRange { item: usize, m: usize },
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),
    #[error("valuations disagree on item count ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("search cap exceeded: {needed} > {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("{0}")]
    Precondition(String),
    #[error("invalid mechanism config: {0}")]
    InvalidConfig(String),
    #[error("bidder {bidder} demanded {demand} with only {available} available in round {round}")]
    MalformedDemand {
        bidder: usize,
        round: usize,
        demand: String,
        available: String,
    },
    #[error("auction did not terminate within {0} rounds")]
    NonTerminating(usize),
    #[error("approximation guarantee failed: {0}")]
    GuaranteeViolated(String),
    #[error("linear program: {0}")]
    Lp(String),
    #[error("probability distribution: {0}")]
    Distribution(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
