//! Leaky-ReLU networks viewed in path space.
//!
//! A trained network is rewritten as a linear classifier over path
//! features, solved for its hard-margin support vectors, and summarized
//! by a compression-style generalization bound.

pub mod compression;
pub mod error;
pub mod harness;
pub mod maxmargin;
pub mod network;
pub mod pathspace;
pub mod skeleton;

pub use error::{Error, Result};

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
