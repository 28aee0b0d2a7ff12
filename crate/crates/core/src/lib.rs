//! Online linear-quadratic control with previewed, time-varying costs.
//!
//! The crate provides the prediction-tracking policy, a receding-horizon
//! baseline and the clairvoyant comparator, tools to measure their dynamic
//! regret, numerical evaluation of the regret bound and its constants, and a
//! grid-sweep experiment harness with CSV and SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod costs;
pub mod error;
pub mod experiments;
pub mod invariants;
pub mod linalg;
pub mod oracle;
pub mod policies;
pub mod regret;
pub mod riccati;
pub mod seed;
pub mod system;

pub use error::{Error, Result};
