//! Correlations of arithmetic weights with distal and nilsystem observables.

pub mod analytic;
pub mod bignum;
pub mod cfrac;
pub mod config;
pub mod correlate;
pub mod error;
pub mod flows;
pub mod furstenberg;
pub mod mobius;
pub mod nilflow;
pub mod phase;
pub mod poly;
pub mod reduce;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
