//! Age-of-information analysis for a three-node source, relay, destination
//! slotted link.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the domain types and the one-slot age dynamics.
//! * [`rules`] wraps the scheduling rules behind the [`rules::DecisionRule`]
//!   trait and keeps them in a name registry.
//! * [`analytic`] evaluates the closed-form average age for both protocols.
//! * [`optimizer`] finds the age-minimising generation probability.
//! * [`simulator`] is the Monte Carlo engine.
//! * [`mdp`] solves for the optimal stationary schedule on a truncated state
//!   space.
//! * [`chain`] computes the exact stationary average age of a rule on a
//!   truncated state space without sampling.

pub mod analytic;
pub mod chain;
pub mod error;
pub mod mdp;
pub mod model;
pub mod optimizer;
pub mod rules;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{AoiState, ChannelParams, GenProb, OpSet, Operation, SlotOutcome};
pub use rules::{DecisionRule, Protocol, RuleRegistry};
