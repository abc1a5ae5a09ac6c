//! Second-order hierarchical PLS polynomial chaos expansion.
//!
//! The crate builds sparse Hermite chaos surrogates of expensive models from
//! small quasi-random designs, then post-processes the coefficients into Sobol
//! indices and failure probabilities. Built-in finite element benchmarks and
//! brute-force Monte Carlo references are included for verification.

pub mod basis;
pub mod doe;
pub mod error;
pub mod hierarchy;
pub mod mc;
pub mod models;
pub mod pls;
pub mod reliability;
pub mod sensitivity;

pub use error::{Error, ErrorKind, Result};
