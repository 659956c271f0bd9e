//! Access strategy for a solar-powered multi-base-station wireless network,
//! posed as a POMDP.
//!
//! [`model`] builds the exact transition/observation tables, [`solver`] runs
//! alpha-vector value iteration over them, [`policies`] holds the
//! energy-based heuristic and the CSMA/random baselines, and [`sim`] runs
//! them against a continuous-battery ground-truth environment.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod flat;
pub mod model;
pub mod policies;
pub mod quadrature;
pub mod sim;
pub mod solver;
pub mod tabular;

pub use error::{Error, Result};
