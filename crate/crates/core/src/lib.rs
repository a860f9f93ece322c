//! Intrusion-detection benchmarking over KDD'99-format traffic.

pub mod bench;
pub mod error;
pub mod hybrid;
pub mod kdd;
pub mod metrics;
pub mod rbm;
pub mod rl;
pub mod wsn;

pub use error::{Error, Result};
