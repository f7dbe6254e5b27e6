//! Hybrid federated learning for transaction monitoring: account-holding
//! clients learn embeddings of their private account metadata, a transaction
//! client joins them with its own features and trains a classifier.

pub mod data;
pub mod error;
pub mod matrix;
pub mod models;
pub mod privacy;
pub mod harness;
pub mod transport;
pub mod federation;
pub mod attacks;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
