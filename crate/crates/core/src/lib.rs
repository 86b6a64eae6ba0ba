//! Outage analysis of two-hop cooperative networks whose decode-and-forward
//! relays run entirely on RF energy harvested from the source.
//!
//! The crate has two independent routes to the outage probability of a
//! relay-selection policy:
//!
//! * [`simulator`] evolves every relay battery slot by slot under a seeded
//!   Rayleigh channel and counts outage slots.
//! * [`dtmc`] builds the Markov chain over quantized battery levels, solves
//!   its steady state, and averages the per-state outage probability.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the CLI and the
//! acceptance suite use.

// `!(x > 0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod dtmc;
mod error;
pub mod model;
mod real;
pub mod selection;
pub mod simulator;

pub use battery::{BatteryLevel, LevelBoundaries};
pub use error::{Error, Result};
pub use model::{ChannelDraw, SystemParams, SystemParamsBuilder};
pub use real::Real;
pub use selection::{Action, Policy, SlotOutcome};
pub use simulator::{OutageEstimate, SimConfig, SweepAxis, SweepValue};

/// Scenario parameters in double precision.
pub type Params = SystemParams<f64>;
/// Channel realization in double precision.
pub type Draw = ChannelDraw<f64>;
/// Battery grid in double precision.
pub type Boundaries = LevelBoundaries<f64>;
/// Simulation configuration in double precision.
pub type Config = SimConfig<f64>;
/// Transition matrix in double precision.
pub type Matrix = dtmc::TransitionMatrix<f64>;
/// Stationary distribution in double precision.
pub type Stationary = dtmc::SteadyState<f64>;

/// Single-precision variants.
pub mod single {
    pub type Params = crate::SystemParams<f32>;
    pub type Draw = crate::ChannelDraw<f32>;
    pub type Config = crate::SimConfig<f32>;
    pub type Matrix = crate::dtmc::TransitionMatrix<f32>;
}
