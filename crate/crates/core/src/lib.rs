//! Joint hovering, resource allocation and trajectory design for a
//! UAV-mounted integrated sensing and communication node with a
//! capacity-limited backhaul.
//!
//! The crate is organised bottom-up: scenario and propagation models,
//! power and link budgets, convex surrogates, a small conic-program layer
//! over Clarabel, and the alternating-optimization solver with its
//! baselines and validation oracles.

extern crate openblas_src;

pub mod ao;
pub mod baselines;
pub mod beampattern;
pub mod comms;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod power;
pub mod record;
pub mod scenario;
pub mod sensing;
pub mod state;
pub mod surrogates;

pub use error::{Error, Result};
