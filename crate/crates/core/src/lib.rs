//! Extreme-value modelling of results that beat a fixed threshold.
//!
//! Race results below a qualifying cut are turned into margins
//! `y = threshold - time` and modelled by the two-parameter family
//!
//! ```text
//! G(y; a, sigma) = 1 - (1 - a*y/sigma)^(1/a),   g(y) = (1 - a*y/sigma)^(1/a - 1) / sigma
//! ```
//!
//! with the exponential distribution as the smooth `a -> 0` limit. On top of the
//! model the crate provides maximum-likelihood fitting, season-best record
//! probabilities under a Poisson volume model, profile-likelihood confidence
//! curves (for record probabilities and for the finite endpoint `sigma/a`),
//! parametric-bootstrap monitoring of model adequacy, a log-linear trend model,
//! and the classical record-count statistics of i.i.d. sequences.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line live in the companion `record-edge` crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adequacy;
pub mod confidence;
pub mod error;
pub mod estimation;
mod math;
pub mod model;
pub mod optimize;
pub mod prediction;
pub mod racetime;
pub mod records;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
pub use estimation::{fit_mle, FitResult};
pub use model::ModelParams;
pub use prediction::VolumeModel;
pub use racetime::RaceTime;
pub use sample::Sample;
