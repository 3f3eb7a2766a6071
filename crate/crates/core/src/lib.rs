//! Stackelberg power control for two-tier femtocell networks.
//!
//! A macro base station prices the cross-tier interference that femtocell
//! links cause it; the links choose transmit powers that maximise energy
//! efficiency minus the interference charge. The crate provides the network
//! model, continuous and discrete follower games, leader pricing, oracles,
//! and an experiment harness.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod harness;
pub mod network;
pub mod payoff;
pub mod pricing;
pub mod units;
pub mod verification;

pub use error::{Error, Result};
pub use network::{NetworkInstance, ScenarioParams, TopologyConfig};
pub use payoff::{PowerProfile, PriceVector};
