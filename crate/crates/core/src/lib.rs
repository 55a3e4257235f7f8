//! Approximate probabilistic bisimulation and finite-horizon trace distances
//! for labelled Markov chains.
//!
//! - [`lmc`]: finite labelled Markov chains, validation, direct sums, trace
//!   probabilities and simulation.
//! - [`bisim`]: exact and ε-approximate bisimulation, including the weaker
//!   closed-set notion.
//! - [`traces`]: exact trace distributions, total-variation trace distance,
//!   the `1 − (1 − ε)^k` bound and the distinguishability game.
//! - [`ltl`]: bounded LTL parsing and exact model checking.
//! - [`abstraction`]: finite abstractions of continuous-state chains, with the
//!   weather case study.

pub mod abstraction;
pub mod bisim;
pub mod builtin;
pub mod error;
mod flow;
pub mod lmc;
pub mod ltl;
pub mod traces;

pub use error::{Error, Result};
pub use lmc::{FiniteLmc, Observation, Trace, TraceSet};
