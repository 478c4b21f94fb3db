//! Multi-object tracking with labeled random finite sets under generic
//! observation models.
//!
//! The crate provides three filter recursions over labeled multi-object
//! densities — the exact mixture-form filter, its KLD-optimal labeled
//! multi-Bernoulli collapse, and a grouping-parallelized variant — together
//! with sequential Monte Carlo numerics, two simulated non-standard sensors
//! (pixeled track-before-detect imagery and an acoustic amplitude network),
//! OSPA evaluation, and a Monte-Carlo benchmark harness.
//!
//! Modules map onto the moving parts:
//!
//! - [`rfs`]: labeled-RFS domain types, labeled PHDs, the multi-Bernoulli
//!   collapse and its discrete-space divergence oracle,
//! - [`motion`]: the standard survival/birth transition kernel,
//! - [`sensors`]: observation models, likelihoods and frame simulators,
//! - [`smc`]: seedable streams, resampling, weight utilities,
//! - [`filters`]: the three recursions,
//! - [`grouping`]: dynamic track/observation partitioning,
//! - [`discrete`]: exact enumeration on finite toy spaces,
//! - [`metrics`]: OSPA and cardinality statistics,
//! - [`harness`]: scenario simulation, experiment driver and file outputs.

pub mod discrete;
pub mod error;
pub mod filters;
pub mod grouping;
pub mod harness;
pub mod metrics;
pub mod motion;
pub mod rfs;
pub mod sensors;
pub mod smc;

pub use error::{Error, Result};
pub use rfs::Kinematic;
