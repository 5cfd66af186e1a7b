//! Draft auctions with exact arithmetic: valuations and their
//! approximations, the auction engine, bid plans and deviations,
//! brute-force equilibrium search and smoothness checks.

pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod gen;
pub mod items;
pub mod rational;
pub mod smoothness;
pub mod strategies;
pub mod valuations;

pub use error::{Error, Result};
pub use items::ItemSet;
pub use rational::Rational;
pub use valuations::{optimal_welfare, Allocation, Valuation};
