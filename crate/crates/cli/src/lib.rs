//! Scenario files, golden instances and experiment drivers for the
//! `auctionlab` command.

pub mod commands;
pub mod corpus;
pub mod error;
pub mod output;
pub mod scenario;

pub use commands::{execute, CommandOutput, Options};
pub use error::CliError;
pub use scenario::{load_scenario, parse_scenario, Directive, Scenario};
