//! Preemptive-resume priority M/M/1 simulation of the manager's intake
//! queue, used as an independent oracle for the closed-form sojourn
//! formulas.

use std::collections::VecDeque;

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};

use super::stats::mean_and_ci;
use super::{EntitySojourn, EventKind, EventQueue, Horizon, SimConfig, SimEvent, SimReport};
use crate::error::{Error, Result};
use crate::queueing::{DisciplineKind, PriorityOrder, QueueSystem};

/// Service discipline for a queue-only run.
#[derive(Debug, Clone, Copy)]
pub enum QueueDiscipline<'a> {
    /// Single FIFO class; every entity shares one line.
    Equal,
    /// One preemptive-resume class per entity, rank 1 highest.
    Priority(&'a PriorityOrder),
}

#[derive(Debug, Clone, Copy)]
struct Job {
    id: u64,
    entity_idx: usize,
    arrival: f64,
    remaining: f64,
}

#[derive(Debug, Clone, Copy)]
struct InService {
    job: Job,
    class: usize,
    quantum_start: f64,
    token: u64,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival { entity_idx: usize },
    Completion { token: u64 },
}

/// Runs the queue simulation and reports per-entity mean sojourn times.
pub fn run_queue_sim(
    system: &QueueSystem,
    discipline: QueueDiscipline<'_>,
    cfg: &SimConfig,
) -> Result<SimReport> {
    run_inner(system, discipline, cfg, None)
}

/// As [`run_queue_sim`], additionally returning the full event log.
pub fn run_queue_sim_logged(
    system: &QueueSystem,
    discipline: QueueDiscipline<'_>,
    cfg: &SimConfig,
) -> Result<(SimReport, Vec<SimEvent>)> {
    let mut log = Vec::new();
    let report = run_inner(system, discipline, cfg, Some(&mut log))?;
    Ok((report, log))
}

fn run_inner(
    system: &QueueSystem,
    discipline: QueueDiscipline<'_>,
    cfg: &SimConfig,
    mut log: Option<&mut Vec<SimEvent>>,
) -> Result<SimReport> {
    cfg.validate()?;
    if !system.is_stable() {
        // an unstable system has no steady state to compare against
        return Err(Error::Unstable {
            arrival: system.total_arrival_rate(),
            service: system.service_rate(),
        });
    }

    let entities = system.entities();
    let n = entities.len();

    // class per entity: rank index under priority, one shared class otherwise
    let (class_count, class_of, kind) = match discipline {
        QueueDiscipline::Equal => (1usize, vec![0usize; n], DisciplineKind::EqualPriority),
        QueueDiscipline::Priority(order) => {
            let mut ids: Vec<u32> = entities.iter().map(|e| e.id).collect();
            ids.sort_unstable();
            let mut ranked = order.ranked_ids().to_vec();
            ranked.sort_unstable();
            if ids != ranked {
                return Err(Error::InvalidInput(
                    "priority order is not a permutation of the system's entity ids".into(),
                ));
            }
            let classes = entities
                .iter()
                .map(|e| order.rank_of(e.id).expect("permutation checked") - 1)
                .collect();
            (n, classes, DisciplineKind::UrgencyPriority)
        }
    };

    let service_dist = Exp::new(system.service_rate()).expect("service rate validated positive");
    let mut inter_rngs: Vec<Option<(Exp<f64>, ChaCha12Rng)>> = Vec::with_capacity(n);
    let mut service_rngs: Vec<ChaCha12Rng> = Vec::with_capacity(n);
    for e in entities {
        if e.arrival_rate > 0.0 {
            let dist = Exp::new(e.arrival_rate).expect("positive rate");
            inter_rngs.push(Some((dist, super::interarrival_rng(cfg.seed, e.id as u64))));
        } else {
            inter_rngs.push(None); // silent entity
        }
        service_rngs.push(super::service_rng(cfg.seed, e.id as u64));
    }

    let mut events: EventQueue<Ev> = EventQueue::new();
    for (idx, slot) in inter_rngs.iter_mut().enumerate() {
        if let Some((dist, rng)) = slot {
            let first = dist.sample(rng);
            events.schedule(
                first,
                EventKind::Arrival,
                entities[idx].id as u64,
                Ev::Arrival { entity_idx: idx },
            );
        }
    }

    let mut classes: Vec<VecDeque<Job>> = (0..class_count).map(|_| VecDeque::new()).collect();
    let mut current: Option<InService> = None;
    let mut token_counter: u64 = 0;
    let mut job_counter: u64 = 0;
    let mut served: u64 = 0;
    let mut sojourns: Vec<Vec<f64>> = vec![Vec::new(); n];

    let warm_events = match cfg.horizon {
        Horizon::Events(cap) => (cfg.warmup_fraction * cap as f64).floor() as u64,
        Horizon::Time(_) => 0,
    };
    let warm_time = match cfg.horizon {
        Horizon::Time(t) => cfg.warmup_fraction * t,
        Horizon::Events(_) => 0.0,
    };

    while let Some(ev) = events.pop() {
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
                        entities[entity_idx].id as u64,
                        Ev::Arrival { entity_idx },
                    );
                }
                job_counter += 1;
                let job = Job {
                    id: job_counter,
                    entity_idx,
                    arrival: now,
                    remaining: service_dist.sample(&mut service_rngs[entity_idx]),
                };
                if let Some(log) = log.as_deref_mut() {
                    log.push(SimEvent {
                        time: now,
                        kind: EventKind::Arrival,
                        subject: job.id,
                    });
                }
                let class = class_of[entity_idx];
                match current.as_mut() {
                    None => {
                        start(job, class, now, &mut current, &mut token_counter, &mut events, &mut log);
                    }
                    Some(cur) if class < cur.class => {
                        // higher priority: freeze the running job's progress
                        cur.job.remaining -= now - cur.quantum_start;
                        if let Some(log) = log.as_deref_mut() {
                            log.push(SimEvent {
                                time: now,
                                kind: EventKind::Preemption,
                                subject: cur.job.id,
                            });
                        }
                        let preempted = *cur;
                        classes[preempted.class].push_front(preempted.job);
                        current = None;
                        start(job, class, now, &mut current, &mut token_counter, &mut events, &mut log);
                    }
                    Some(_) => classes[class].push_back(job),
                }
            }
            Ev::Completion { token } => {
                let valid = current.map_or(false, |c| c.token == token);
                if !valid {
                    continue; // superseded by a preemption
                }
                let done = current.take().expect("validated above");
                if let Some(log) = log.as_deref_mut() {
                    log.push(SimEvent {
                        time: now,
                        kind: EventKind::ServiceComplete,
                        subject: done.job.id,
                    });
                }
                served += 1;
                let keep = match cfg.horizon {
                    Horizon::Events(_) => served > warm_events,
                    Horizon::Time(_) => now >= warm_time,
                };
                if keep {
                    sojourns[done.job.entity_idx].push(now - done.job.arrival);
                }
                if let Horizon::Events(cap) = cfg.horizon {
                    if served >= cap {
                        break;
                    }
                }
                if let Some(next) = classes.iter_mut().find_map(VecDeque::pop_front) {
                    let class = class_of[next.entity_idx];
                    start(next, class, now, &mut current, &mut token_counter, &mut events, &mut log);
                }
            }
        }
    }

    let mut per_entity: Vec<EntitySojourn> = entities
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            let (count, mean, ci_half_width) = mean_and_ci(&sojourns[idx]);
            EntitySojourn {
                entity_id: e.id,
                count,
                mean,
                ci_half_width,
            }
        })
        .collect();
    per_entity.sort_by_key(|e| e.entity_id);

    Ok(SimReport {
        discipline: kind,
        served,
        entities: per_entity,
        channels: Vec::new(),
    })
}

fn start(
    job: Job,
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
        job.id,
        Ev::Completion { token },
    );
    if let Some(log) = log.as_deref_mut() {
        log.push(SimEvent {
            time: now,
            kind: EventKind::ServiceStart,
            subject: job.id,
        });
    }
    *current = Some(InService {
        job,
        class,
        quantum_start: now,
        token,
    });
}
