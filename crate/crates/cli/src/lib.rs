//! Configuration and subcommand runners behind the `sohpce` binary.

pub mod config;
pub mod runner;
