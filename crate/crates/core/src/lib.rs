//! Quantum cognition machine learning: matrix configurations learned from
//! data, their quasi-coherent states, and the geometry, spectra and topology
//! they carry.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherent;
pub mod configuration;
pub mod datasets;
pub mod error;
pub mod laplacian;
pub mod linalg;
pub mod reference;
pub mod topology;
pub mod training;

pub use configuration::MatrixConfiguration;
pub use datasets::Dataset;
pub use error::{Error, Result};
pub use linalg::HermitianMatrix;

use rand::SeedableRng;

/// Deterministic RNG used throughout.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
