//! Simulation engine for distributed stochastic Frank-Wolfe over a network
//! of agents, with deterministic (DenFW) and centralized (CenFW) baselines.
//!
//! The pieces, bottom up:
//!
//! - [`graph`]: topologies, Metropolis mixing matrices, spectral gap.
//! - [`constraint`]: the l1 ball and its linear minimization oracle.
//! - [`problem`]: LIBSVM ingestion, partitioning, logistic losses.
//! - [`sampling`]: epoch lengths and per-iteration mini-batch sizes.
//! - [`solvers`]: the round engines and step-size rules.
//! - [`metrics`]: FW-gap, consensus error, CSV output.
//! - [`runner`]: flat `key=value` configuration and experiment wiring.

pub mod constraint;
pub mod graph;
pub mod metrics;
pub mod problem;
pub mod runner;
pub mod sampling;
pub mod solvers;
