//! Multi-species Sherrington-Kirkpatrick model: the Parisi functional, its
//! minimization, Ruelle probability cascades and replica overlap diagnostics.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] defines the species structure, disorder and exact small-N
//!   partition functions.
//! * [`parisi`] evaluates the Parisi functional for finite replica symmetry
//!   breaking parameters, and [`optimizer`] minimizes it.
//! * [`cascades`] samples truncated Ruelle probability cascades with Gaussian
//!   fields attached to them.
//! * [`replica`] computes statistics of overlap arrays (Ghirlanda-Guerra,
//!   ultrametricity, synchronization) from either exact Gibbs sampling or
//!   cascades.
//! * [`verify`] bundles the Monte Carlo cross-checks into reports.

pub mod cascades;
pub mod enumeration;
pub mod error;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod parisi;
pub mod quadrature;
pub mod replica;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
