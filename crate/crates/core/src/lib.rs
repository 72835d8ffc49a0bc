//! Deterministic analytics and simulation toolkit for an edge-to-ledger
//! health data pipeline.
//!
//! Four computational cores and their shared plumbing:
//!
//! - [`monitor`]: per-window biosignal feature extraction, a percent-scaled
//!   change indicator against a cohort baseline, and the Major/Minor/Repeat
//!   share rule at the edge.
//! - [`queueing`]: priority assignment for entity transactions and
//!   closed-form sojourn times for the equal-priority and preemptive-resume
//!   priority disciplines.
//! - [`optimizer`]: latency/security/cost metric models, a weighted
//!   normalized utility, the closed-form block size, a greedy validator
//!   selection, and an exhaustive-search oracle.
//! - [`channels`]: transaction intake, urgency/security channel allocation,
//!   per-channel configuration binding, and block formation.
//! - [`des`]: a seeded discrete-event simulator that validates the queue
//!   formulas and drives the end-to-end pipeline.
//! - [`scenario`] and [`cohort`]: strict scenario files, signal CSV
//!   ingestion, and a synthetic cohort generator.
//!
//! The `edgeledger` binary exposes the same functionality as subcommands;
//! the crate's `examples/` directory shows one runnable program per
//! capability.

pub mod channels;
pub mod cohort;
pub mod des;
pub mod error;
pub mod harness;
pub mod monitor;
pub mod optimizer;
pub mod queueing;
pub mod scenario;

pub use error::{Error, Result};
