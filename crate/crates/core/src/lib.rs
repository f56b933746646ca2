//! Timeliness of gossip networks.
//!
//! The crate pairs an exact analytical engine for the age and version age of
//! gossip networks with a discrete-event Monte Carlo simulator that runs the
//! same networks under a family of gossip protocols, so that every closed
//! form has an independent empirical check.
//!
//! Node indices are `1..=n`; index `0` is the source everywhere.
//!
//! * [`topology`] builds and perturbs rate graphs.
//! * [`protocols`] holds the pure merge rules applied when a packet lands.
//! * [`engine`] simulates the superposed update processes.
//! * [`analytic`] solves the subset recursion, closed forms and bounds.
//! * [`mdp`] solves the energy-harvesting caching problem.
//! * [`bayesopt`] allocates source rates with GP-UCB.

pub mod analytic;
pub mod bayesopt;
pub mod engine;
mod error;
pub mod mdp;
pub mod protocols;
pub mod rng;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
pub use topology::{Network, NodeId, TopologyKind};
