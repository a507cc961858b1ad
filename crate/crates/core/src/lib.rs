//! Occupation-time fluctuations of weakly degenerate branching systems
//! driven by anisotropic stable motions.
//!
//! The crate simulates the particle system, evaluates the limit covariances
//! of the rescaled occupation-time fluctuations in the large, critical and
//! intermediate regimes, evaluates and samples the operator-scaling random
//! fields that appear in the large regime, and ties everything together in a
//! configuration-driven verification runner.

pub mod branching_system;
pub mod config;
pub mod error;
pub mod limit_covariance;
pub mod osrf_fields;
pub mod quad;
pub mod rng;
pub mod stable_motion;
pub mod stats;
pub mod test_function;
pub mod verify;

pub use error::{Error, Result};
