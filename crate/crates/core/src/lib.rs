//! Peak age of information for a generate-at-will source whose updates cross a
//! random-delay channel and are then processed by an edge server.
//!
//! The crate evaluates and optimizes threshold generation policies for a
//! non-preemptive server (one waiting slot) and a preemptive server, and checks
//! every analytic value against a packet-level simulator.

pub mod distributions;
pub mod error;
pub mod nonpreemptive;
pub mod numerics;
pub mod preemptive;
pub mod simulator;

pub use distributions::{DistributionSpec, TransformPair};
pub use error::{Error, Result};
pub use nonpreemptive::{OptimizationResult, Threshold, WopEvaluation};
pub use preemptive::{DinkelbachTrace, WaitFunction, WpEvaluation};
pub use simulator::{Discipline, PolicySpec, SimResult, SystemConfig};
