//! Simulation of spatially controlled amplify-and-forward relay beamforming
//! over a spatiotemporally correlated log-normal channel field.
//!
//! * [`field`] generates ground-truth channels by sequential Gaussian
//!   conditioning as the relays move.
//! * [`posterior`] conditions a candidate position on the causal history and
//!   evaluates the closed-form surrogate objective.
//! * [`beamformer`] solves the per-slot power-minimizing beamformer.
//! * [`controller`] picks the next relay positions.
//! * [`harness`] runs the slot loop, Monte Carlo campaigns and result output.

pub mod beamformer;
pub mod controller;
pub mod error;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod params;
pub mod posterior;
pub mod validation;

pub use error::{Error, Result};
pub use geometry::{Point, Rect};
pub use params::{ChannelParams, NetworkGeometry};
