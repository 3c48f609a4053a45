//! Opinion expression under social pressure: a Bayesian game of rhetorical
//! intensity, organizations that steward descriptive beliefs through signals,
//! and a recommender platform that grows organizational communities.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beliefs;
pub mod config;
pub mod distribution;
pub mod error;
pub mod experiments;
pub mod expression;
pub mod game;
pub mod io;
pub mod organizations;
pub mod platform;
pub mod rng;
pub mod stewarding;
mod scalar;

pub use beliefs::{BetaBelief, ConstraintWindow, GriddedBelief, SignalUptake};
pub use distribution::OpinionDistribution;
pub use error::{Error, Result};
pub use game::{GameParams, Side};
pub use organizations::OrgType;
pub use scalar::Scalar;

/// Scalar used by the simulation layers.
pub type Real = f64;
pub type Game = GameParams<Real>;
pub type Belief = BetaBelief<Real>;
pub type Window = ConstraintWindow<Real>;
