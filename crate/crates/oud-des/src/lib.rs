//! Discrete-event simulation of individual opioid-use trajectories.
//!
//! People move between active use, inactive use, the criminal justice system,
//! hospital and treatment until they die. Three policy gates (arrest
//! diversion, overdose diversion, re-entry case management) redirect some of
//! them to treatment. Around the engine sit the estimation routines that
//! produce the default parameters, the replication statistics, a cost model
//! and a Sobol/PRCC sensitivity pipeline.
//!
//! The numerical kernels (`dist`, `estimation`, `lifetable`) are generic over
//! [`Real`]; the engine and the statistics are `f64` throughout. The aliases
//! below name the `f64` instantiations used by the engine.

// `!(x > 0)` is how NaN gets rejected; the AS241 coefficients are quoted
// as published.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod calibration;
pub mod dist;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod lifetable;
pub mod real;
pub mod rng;
pub mod scenario;
pub mod sensitivity;
pub mod stats;
pub mod tally;

pub use error::{Error, Result};
pub use real::Real;

/// Sampling law in `f64`.
pub type Distribution = dist::DistributionSpec<f64>;
/// Life table in `f64`.
pub type LifeTable = lifetable::LifeTable<f64>;
/// Mode/quantile fit input in `f64`.
pub type ModeQuantile = estimation::ModeQuantileInput<f64>;
/// Prevalence aggregates in `f64`.
pub type Prevalence = estimation::PrevalenceRecord<f64>;

/// Days per simulated year. The calendar has no leap days.
pub const DAYS_PER_YEAR: f64 = 365.25;
