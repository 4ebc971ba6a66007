//! Greedy-optimal retirement consumption under multiplicative habit formation.
//!
//! Consumption and habit follow from the state price density path and a
//! Lagrange multiplier calibrated to initial wealth; wealth and asset
//! allocation are recovered by nested Monte Carlo.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod error;
pub mod habit;
pub mod kernel;
pub mod lifetime;
pub mod market;
pub mod model;
pub mod quad;
pub mod solver;
pub mod stats;
pub mod wealth;

pub use error::{Error, Result};
pub use habit::HabitParams;
pub use market::{GompertzParams, MarketParams, PathBundle, Sampling, TimeGrid};
pub use model::ModelParams;
pub use solver::{calibrate_alpha, CalibrationConfig, GreedySolution};
pub use stats::Estimate;
pub use wealth::NestedConfig;
