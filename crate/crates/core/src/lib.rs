//! Multi-class classification losses built from generalized entropies.
//!
//! The crate covers four connected layers:
//!
//! - [`simplex`]: probability vectors, margins, cost matrices, norms and the
//!   lowest-index tie-breaking rule used everywhere.
//! - [`entropy`]: concave generalized entropies `H` on the simplex, convex
//!   dissimilarity functions `f` on the orthant, the maps between them,
//!   conjugates, Bregman divergences and numeric Bayes risks.
//! - [`scoring`] and [`hinge`]: proper scoring rules (with softmax-composite
//!   gradients) and hinge-like margin losses sharing the zero-one entropy.
//! - [`regret`] and [`training`]: numerical verification of surrogate regret
//!   bounds, and a small linear-model trainer that closes the loop on data.
//!
//! Class labels are 0-based in every API (`j in 0..m`). The last class `m-1`
//! plays the distinguished role of the reference class in ratio and margin
//! parametrizations.

pub mod entropy;
pub mod error;
pub mod hinge;
pub mod loss;
pub mod numeric;
pub mod regret;
pub mod scoring;
pub mod simplex;
pub mod suites;
pub mod training;

pub use error::{Error, Result};
