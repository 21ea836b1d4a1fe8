//! Nonlinear restricted additive Schwarz preconditioning for bound-constrained
//! finite element minimization.
//!
//! The crate provides one- and two-level Schwarz iterations that keep every
//! iterate inside the feasible box, the Newton-SQP method they precondition,
//! a semismooth Newton baseline, and two obstacle benchmarks (an ignition
//! problem and a minimal surface) on structured P1 meshes.

pub mod cli;
pub mod coarse;
pub mod decomposition;
pub mod error;
pub mod linalg;
pub mod linesearch;
pub mod mesh;
pub mod objective;
pub mod problems;
pub mod qp;
pub mod solvers;

pub use error::{Error, Result};
