//! Seeded discrete-event simulator.
//!
//! Serves two purposes: an independent oracle for the closed-form sojourn
//! analytics (preemptive-resume priority M/M/1) and an end-to-end pipeline
//! simulation from entity arrivals through priority service, channel
//! allocation, block formation, and verification delay to commit.
//!
//! Every run is strictly single-threaded and bit-deterministic for a given
//! (configuration, seed). Random streams are split per entity and per
//! purpose from the master seed with a fixed mixing rule, so adding an
//! entity never perturbs the other entities' draws.

mod pipeline;
mod queue_sim;
mod stats;

pub use pipeline::{
    run_pipeline_sim, run_pipeline_sim_logged, PipelineEntity, PipelineInput, PipelineOutcome,
};
pub use queue_sim::{run_queue_sim, run_queue_sim_logged, QueueDiscipline};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queueing::DisciplineKind;

/// Logged event kinds, in tie-break precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Arrival,
    ServiceStart,
    Preemption,
    ServiceComplete,
    BlockFormed,
    BlockCommitted,
}

/// One entry of the simulation event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub subject: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Stop after this many served (queue sim) or committed (pipeline)
    /// transactions.
    Events(u64),
    /// Stop once simulated time passes this point (seconds).
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: Horizon,
    /// Fraction of the horizon discarded from statistics.
    pub warmup_fraction: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Events(0) => {
                return Err(Error::InvalidInput("event horizon must be positive".into()))
            }
            Horizon::Time(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::InvalidInput(format!(
                    "time horizon must be finite and positive, got {t}"
                )))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidInput(format!(
                "warmup fraction must be in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }
}

/// Empirical per-entity sojourn summary (batch-means confidence interval).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntitySojourn {
    pub entity_id: u32,
    pub count: u64,
    pub mean: f64,
    pub ci_half_width: f64,
}

/// Per-channel commit latency summary (creation to commit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLatency {
    pub channel_id: u32,
    pub count: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub discipline: DisciplineKind,
    pub served: u64,
    pub entities: Vec<EntitySojourn>,
    pub channels: Vec<ChannelLatency>,
}

const STREAM_INTERARRIVAL: u64 = 1;
const STREAM_SERVICE: u64 = 2;
const STREAM_SYNTH: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed stream-splitting rule: one generator per (seed, subject, purpose).
pub(crate) fn stream_rng(master: u64, subject: u64, purpose: u64) -> ChaCha12Rng {
    use rand::SeedableRng;
    let mixed = splitmix64(master ^ splitmix64(subject ^ splitmix64(purpose)));
    ChaCha12Rng::seed_from_u64(mixed)
}

pub(crate) fn interarrival_rng(master: u64, entity: u64) -> ChaCha12Rng {
    stream_rng(master, entity, STREAM_INTERARRIVAL)
}

pub(crate) fn service_rng(master: u64, entity: u64) -> ChaCha12Rng {
    stream_rng(master, entity, STREAM_SERVICE)
}

pub(crate) fn synth_rng(master: u64, subject: u64) -> ChaCha12Rng {
    stream_rng(master, subject, STREAM_SYNTH)
}

/// A scheduled engine event. Ordering is (time, kind precedence, subject,
/// sequence number), so the event loop is a deterministic total order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scheduled<P: Copy> {
    pub time: f64,
    pub kind: EventKind,
    pub subject: u64,
    pub seq: u64,
    pub payload: P,
}

impl<P: Copy> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P: Copy> Eq for Scheduled<P> {}

impl<P: Copy> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P: Copy> Ord for Scheduled<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.subject.cmp(&other.subject))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Min-heap event queue with a monotone sequence number for total ordering.
pub(crate) struct EventQueue<P: Copy> {
    heap: BinaryHeap<std::cmp::Reverse<Scheduled<P>>>,
    seq: u64,
}

impl<P: Copy> EventQueue<P> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind, subject: u64, payload: P) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(std::cmp::Reverse(Scheduled {
            time,
            kind,
            subject,
            seq,
            payload,
        }));
    }

    pub fn pop(&mut self) -> Option<Scheduled<P>> {
        self.heap.pop().map(|r| r.0)
    }
}
