//! Online learning with multiplicative weights, the Sparsitron GLM learner,
//! inverse-Ising structure learning, and a classical simulation of the
//! oracle-model quantum subroutines those algorithms can be accelerated with.
//!
//! The simulated quantum layer never builds a state vector. Every subroutine
//! computes the exact quantity, perturbs it inside the error ball its
//! contract allows, fails with the contract's probability, and charges a
//! closed-form number of oracle queries into a [`quantum_sim::QueryLedger`].
//! That is enough to check accuracy, failure and query-scaling claims at
//! desk scale.

pub mod error;
pub mod hedge;
pub mod ising;
pub mod linalg;
pub mod noise;
pub mod quantum_algos;
pub mod quantum_sim;
pub mod rng;
pub mod sampling;
pub mod scaling;
pub mod sparsitron;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
