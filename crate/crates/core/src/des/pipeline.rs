//! End-to-end pipeline simulation: entity arrivals, priority service at the
//! manager, channel allocation, block formation with a timeout flush, a
//! per-channel verification delay, and commit.

use std::collections::VecDeque;

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};

use super::stats::{mean_and_ci, RangeStat};
use super::{
    ChannelLatency, EntitySojourn, EventKind, EventQueue, Horizon, SimConfig, SimEvent, SimReport,
};
use crate::channels::{Block, BmState, Channel, DispatchRecord, SecurityNeed, Transaction, TxKind};
use crate::error::{Error, Result};
use crate::queueing::{assign_priorities, DisciplineKind, EntityProfile, Urgency};

/// One transaction-producing entity of the pipeline with its data profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineEntity {
    pub profile: EntityProfile,
    pub security: SecurityNeed,
}

impl PipelineEntity {
    fn tx_kind(&self) -> TxKind {
        match self.profile.urgency {
            Urgency::Urgent => TxKind::EmergencyNotification,
            Urgency::Normal => TxKind::FeatureSummary,
            Urgency::NonUrgent => TxKind::LegalDocument,
        }
    }
}

/// Everything the pipeline needs: entities, the manager's service rate,
/// bound channels, the block flush timeout, and the transaction size.
#[derive(Debug, Clone)]
pub struct PipelineInput {
    pub entities: Vec<PipelineEntity>,
    pub service_rate: f64,
    pub channels: Vec<Channel>,
    pub flush_timeout: f64,
    pub tx_size_bits: f64,
}

impl PipelineInput {
    fn validate(&self) -> Result<()> {
        if self.entities.is_empty() {
            return Err(Error::Config {
                path: "entities".into(),
                message: "pipeline needs at least one entity".into(),
            });
        }
        for e in &self.entities {
            e.profile.validate()?;
        }
        if !self.service_rate.is_finite() || self.service_rate <= 0.0 {
            return Err(Error::Config {
                path: "queue.service_rate".into(),
                message: format!("must be finite and positive, got {}", self.service_rate),
            });
        }
        if !self.flush_timeout.is_finite() || self.flush_timeout <= 0.0 {
            return Err(Error::Config {
                path: "sim.flush_timeout".into(),
                message: format!("must be finite and positive, got {}", self.flush_timeout),
            });
        }
        if !self.tx_size_bits.is_finite() || self.tx_size_bits <= 0.0 {
            return Err(Error::Config {
                path: "chain.transaction_size_bits".into(),
                message: format!("must be finite and positive, got {}", self.tx_size_bits),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub report: SimReport,
    pub dispatch: Vec<DispatchRecord>,
    pub blocks_formed: u64,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival { entity_idx: usize },
    Completion { token: u64 },
    Flush { channel_idx: usize, token: u64 },
    Commit { block_idx: usize },
}

#[derive(Debug, Clone)]
struct BmJob {
    tx: Transaction,
    remaining: f64,
}

#[derive(Debug, Clone)]
struct InService {
    job: BmJob,
    class: usize,
    quantum_start: f64,
    token: u64,
}

/// Runs the full pipeline under the given discipline.
pub fn run_pipeline_sim(
    input: &PipelineInput,
    discipline: DisciplineKind,
    cfg: &SimConfig,
) -> Result<PipelineOutcome> {
    run_inner(input, discipline, cfg, None)
}

/// As [`run_pipeline_sim`], additionally returning the event log.
pub fn run_pipeline_sim_logged(
    input: &PipelineInput,
    discipline: DisciplineKind,
    cfg: &SimConfig,
) -> Result<(PipelineOutcome, Vec<SimEvent>)> {
    let mut log = Vec::new();
    let outcome = run_inner(input, discipline, cfg, Some(&mut log))?;
    Ok((outcome, log))
}

fn run_inner(
    input: &PipelineInput,
    discipline: DisciplineKind,
    cfg: &SimConfig,
    mut log: Option<&mut Vec<SimEvent>>,
) -> Result<PipelineOutcome> {
    cfg.validate()?;
    input.validate()?;

    let entities = &input.entities;
    let n = entities.len();

    let class_of: Vec<usize> = match discipline {
        DisciplineKind::EqualPriority => vec![0; n],
        DisciplineKind::UrgencyPriority => {
            let profiles: Vec<EntityProfile> =
                entities.iter().map(|e| e.profile.clone()).collect();
            let order = assign_priorities(&profiles)?;
            entities
                .iter()
                .map(|e| order.rank_of(e.profile.id).expect("order covers entities") - 1)
                .collect()
        }
    };
    let class_count = match discipline {
        DisciplineKind::EqualPriority => 1,
        DisciplineKind::UrgencyPriority => n,
    };

    let mut bm = BmState::new(input.channels.clone())?;
    let channel_ids: Vec<u32> = bm.channels().iter().map(|c| c.id).collect();
    let channel_latency: Vec<f64> = bm.channels().iter().map(|c| c.config.latency).collect();
    let channel_index = |id: u32| channel_ids.iter().position(|c| *c == id).expect("known id");

    let service_dist = Exp::new(input.service_rate).expect("validated positive");
    let mut inter_rngs: Vec<Option<(Exp<f64>, ChaCha12Rng)>> = Vec::with_capacity(n);
    let mut service_rngs: Vec<ChaCha12Rng> = Vec::with_capacity(n);
    for e in entities {
        if e.profile.arrival_rate > 0.0 {
            let dist = Exp::new(e.profile.arrival_rate).expect("positive rate");
            inter_rngs.push(Some((
                dist,
                super::interarrival_rng(cfg.seed, e.profile.id as u64),
            )));
        } else {
            inter_rngs.push(None);
        }
        service_rngs.push(super::service_rng(cfg.seed, e.profile.id as u64));
    }

    let mut events: EventQueue<Ev> = EventQueue::new();
    for (idx, slot) in inter_rngs.iter_mut().enumerate() {
        if let Some((dist, rng)) = slot {
            let first = dist.sample(rng);
            events.schedule(
                first,
                EventKind::Arrival,
                entities[idx].profile.id as u64,
                Ev::Arrival { entity_idx: idx },
            );
        }
    }

    let mut classes: Vec<VecDeque<BmJob>> = (0..class_count).map(|_| VecDeque::new()).collect();
    let mut current: Option<InService> = None;
    let mut token_counter: u64 = 0;
    let mut tx_counter: u64 = 0;
    let mut committed: u64 = 0;
    let mut blocks: Vec<Block> = Vec::new();
    let mut flush_tokens: Vec<u64> = vec![0; channel_ids.len()];
    let mut entity_sojourns: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut channel_stats: Vec<RangeStat> = vec![RangeStat::new(); channel_ids.len()];
    let entity_idx_of: std::collections::BTreeMap<u32, usize> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.profile.id, i))
        .collect();

    let warm_events = match cfg.horizon {
        Horizon::Events(cap) => (cfg.warmup_fraction * cap as f64).floor() as u64,
        Horizon::Time(_) => 0,
    };
    let warm_time = match cfg.horizon {
        Horizon::Time(t) => cfg.warmup_fraction * t,
        Horizon::Events(_) => 0.0,
    };

    'main: while let Some(ev) = events.pop() {
        let now = ev.time;
        if let Horizon::Time(t) = cfg.horizon {
            if now > t {
                break;
            }
        }
        match ev.payload {
            Ev::Arrival { entity_idx } => {
                if let Some((dist, rng)) = inter_rngs[entity_idx].as_mut() {
                    let gap = dist.sample(rng);
                    events.schedule(
                        now + gap,
                        EventKind::Arrival,
                        entities[entity_idx].profile.id as u64,
                        Ev::Arrival { entity_idx },
                    );
                }
                let e = &entities[entity_idx];
                tx_counter += 1;
                let tx = Transaction::new(
                    tx_counter,
                    e.profile.id,
                    e.tx_kind(),
                    e.profile.urgency,
                    e.security,
                    input.tx_size_bits,
                    now,
                )?;
                if let Some(log) = log.as_deref_mut() {
                    log.push(SimEvent {
                        time: now,
                        kind: EventKind::Arrival,
                        subject: tx.id,
                    });
                }
                let job = BmJob {
                    tx,
                    remaining: service_dist.sample(&mut service_rngs[entity_idx]),
                };
                let class = class_of[entity_idx];
                match current.as_mut() {
                    None => start(job, class, now, &mut current, &mut token_counter, &mut events, &mut log),
                    Some(cur) if class < cur.class => {
                        cur.job.remaining -= now - cur.quantum_start;
                        if let Some(log) = log.as_deref_mut() {
                            log.push(SimEvent {
                                time: now,
                                kind: EventKind::Preemption,
                                subject: cur.job.tx.id,
                            });
                        }
                        let preempted = cur.clone();
                        classes[preempted.class].push_front(preempted.job);
                        current = None;
                        start(job, class, now, &mut current, &mut token_counter, &mut events, &mut log);
                    }
                    Some(_) => classes[class].push_back(job),
                }
            }
            Ev::Completion { token } => {
                let valid = current.as_ref().map_or(false, |c| c.token == token);
                if !valid {
                    continue;
                }
                let done = current.take().expect("validated above");
                if let Some(log) = log.as_deref_mut() {
                    log.push(SimEvent {
                        time: now,
                        kind: EventKind::ServiceComplete,
                        subject: done.job.tx.id,
                    });
                }
                let channel_id = bm.accept(done.job.tx, now)?;
                let cidx = channel_index(channel_id);
                if bm.queue_len(channel_id) == 1 {
                    flush_tokens[cidx] += 1;
                    events.schedule(
                        now + input.flush_timeout,
                        EventKind::BlockFormed,
                        channel_id as u64,
                        Ev::Flush {
                            channel_idx: cidx,
                            token: flush_tokens[cidx],
                        },
                    );
                }
                if let Some(block) = bm.form_if_full(channel_id, now) {
                    dispatch_block(
                        block,
                        cidx,
                        now,
                        &channel_latency,
                        &mut flush_tokens,
                        &mut blocks,
                        &mut events,
                        &mut log,
                    );
                }
                if let Some(next) = classes.iter_mut().find_map(VecDeque::pop_front) {
                    let class = class_of[entity_idx_of[&next.tx.entity_id]];
                    start(next, class, now, &mut current, &mut token_counter, &mut events, &mut log);
                }
            }
            Ev::Flush { channel_idx, token } => {
                if flush_tokens[channel_idx] != token {
                    continue;
                }
                let channel_id = channel_ids[channel_idx];
                if let Some(block) = bm.flush(channel_id, now) {
                    dispatch_block(
                        block,
                        channel_idx,
                        now,
                        &channel_latency,
                        &mut flush_tokens,
                        &mut blocks,
                        &mut events,
                        &mut log,
                    );
                }
            }
            Ev::Commit { block_idx } => {
                let block = blocks[block_idx].clone();
                bm.mark_committed(&block, now);
                if let Some(log) = log.as_deref_mut() {
                    log.push(SimEvent {
                        time: now,
                        kind: EventKind::BlockCommitted,
                        subject: block_idx as u64,
                    });
                }
                let cidx = channel_index(block.channel_id);
                for tx in &block.transactions {
                    committed += 1;
                    let keep = match cfg.horizon {
                        Horizon::Events(_) => committed > warm_events,
                        Horizon::Time(_) => now >= warm_time,
                    };
                    if keep {
                        let sojourn = now - tx.created_at;
                        entity_sojourns[entity_idx_of[&tx.entity_id]].push(sojourn);
                        channel_stats[cidx].push(sojourn);
                    }
                    if let Horizon::Events(cap) = cfg.horizon {
                        if committed >= cap {
                            break 'main;
                        }
                    }
                }
            }
        }
    }

    let mut per_entity: Vec<EntitySojourn> = entities
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            let (count, mean, ci_half_width) = mean_and_ci(&entity_sojourns[idx]);
            EntitySojourn {
                entity_id: e.profile.id,
                count,
                mean,
                ci_half_width,
            }
        })
        .collect();
    per_entity.sort_by_key(|e| e.entity_id);

    let per_channel: Vec<ChannelLatency> = channel_ids
        .iter()
        .zip(channel_stats.iter())
        .map(|(id, s)| ChannelLatency {
            channel_id: *id,
            count: s.count,
            mean: s.mean(),
            min: if s.count == 0 { 0.0 } else { s.min },
            max: if s.count == 0 { 0.0 } else { s.max },
        })
        .collect();

    Ok(PipelineOutcome {
        report: SimReport {
            discipline,
            served: committed,
            entities: per_entity,
            channels: per_channel,
        },
        dispatch: bm.dispatch_log().to_vec(),
        blocks_formed: bm.block_count(),
    })
}

#[allow(clippy::too_many_arguments)]
fn dispatch_block(
    block: Block,
    channel_idx: usize,
    now: f64,
    channel_latency: &[f64],
    flush_tokens: &mut [u64],
    blocks: &mut Vec<Block>,
    events: &mut EventQueue<Ev>,
    log: &mut Option<&mut Vec<SimEvent>>,
) {
    // a freshly formed block supersedes any pending flush for the channel
    flush_tokens[channel_idx] += 1;
    let block_idx = blocks.len();
    if let Some(log) = log.as_deref_mut() {
        log.push(SimEvent {
            time: now,
            kind: EventKind::BlockFormed,
            subject: block_idx as u64,
        });
    }
    events.schedule(
        now + channel_latency[channel_idx],
        EventKind::BlockCommitted,
        block_idx as u64,
        Ev::Commit { block_idx },
    );
    blocks.push(block);
}

fn start(
    job: BmJob,
    class: usize,
    now: f64,
    current: &mut Option<InService>,
    token_counter: &mut u64,
    events: &mut EventQueue<Ev>,
    log: &mut Option<&mut Vec<SimEvent>>,
) {
    *token_counter += 1;
    let token = *token_counter;
    events.schedule(
        now + job.remaining,
        EventKind::ServiceComplete,
        job.tx.id,
        Ev::Completion { token },
    );
    if let Some(log) = log.as_deref_mut() {
        log.push(SimEvent {
            time: now,
            kind: EventKind::ServiceStart,
            subject: job.tx.id,
        });
    }
    *current = Some(InService {
        job,
        class,
        quantum_start: now,
        token,
    });
}
