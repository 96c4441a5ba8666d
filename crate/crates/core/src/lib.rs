//! Peak age-of-information outage analysis for an `n`-source system where all
//! sources are sampled in bulk every `n·b` time units and a single server
//! polls them in round-robin order.
//!
//! The crate is `no_std` (it needs `alloc`) and is split into:
//!
//! - [`distributions`]: transmission-time models with exact sampling, moments
//!   and closed-form log-moment generating functions.
//! - [`engine`]: simulators for the FCFS and single-packet queue disciplines,
//!   closed-form cross-checks, and the age sample-path reconstruction.
//! - [`bounds`]: Legendre-type rate functions, finite-`n` Chernoff bounds and
//!   asymptotic decay rates.
//! - [`estimate`]: outage-probability estimation with batch-means confidence
//!   intervals and log-linear slope fitting.
//! - [`seed`]: deterministic seed derivation for replications.
#![no_std]
#![deny(rust_2018_idioms)]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod distributions;
pub mod engine;
pub mod estimate;
pub mod seed;

pub use bounds::{BoundKind, BoundValue, BoundsError, Constraint, RateResult};
pub use distributions::{DistError, Family, ThetaDomain, TransmissionModel};
pub use engine::{
    Discipline, EngineError, PeakAgeRecord, RunStats, SampledRounds, ServiceMatrix, ServiceSource,
    SystemConfig,
};
pub use estimate::{EstimateError, LineFit, OutageCounter, OutageEstimate};
