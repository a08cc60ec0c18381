//! Unary (Koopman-von Neumann) classical mechanics as an operator algebra.
//!
//! Layers, bottom up:
//! - [`phase_space`]: commutative polynomials in `q, p` with the Poisson bracket
//! - [`weyl`]: the normal-ordered ladder algebra behind `q, p, Q, P`
//! - [`gibbs`]: the Gibbs equilibrium state and its generating functions
//! - [`fock`]: truncated Fock (GNS) representation
//! - [`measurement`]: spectral projections and Lueders transformers
//! - [`bell`]: CHSH operator analysis, count tables, two-level cat states
//! - [`coincidence`]: timestamped two-station coincidence simulator

pub mod bell;
pub mod coincidence;
pub mod error;
pub mod fock;
pub mod gibbs;
pub mod measurement;
pub mod parse;
pub mod phase_space;
pub mod quadrature;
pub mod scalar;
pub mod verify;
pub mod weyl;

pub use error::{Error, Result};
