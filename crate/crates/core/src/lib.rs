//! Exact and Monte Carlo laboratory for weak-concentration bounds on hitting
//! times of increasing set-valued Markov processes.
//!
//! The crate is organised around the processes it studies:
//!
//! * [`graph`] / [`families`]: weighted graphs, multigraphs and minimum cuts.
//! * [`chain`]: exact hitting-time analysis of increasing chains.
//! * [`fpp`]: first passage percolation with Exponential traversal times.
//! * [`multigraph`]: Poisson multigraph growth, spanning-tree and triangle
//!   packings.
//! * [`coverage`]: lattice growth and graph coverage processes.
//! * [`stats`]: estimators, the L0 norm and the lower-bound machinery.
//! * [`scenario`]: JSON scenarios, the check catalog and report emission.

pub mod chain;
pub mod coverage;
pub mod error;
pub mod families;
pub mod fpp;
pub mod graph;
pub mod multigraph;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
