//! Constrained Hamiltonian Monte Carlo and generalized HMC on submanifolds
//! `{q : ξ(q) = 0}`, with RATTLE proposals made reversible by an explicit
//! check of the Newton projection.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod integrator;
pub mod models;
pub mod projection;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
