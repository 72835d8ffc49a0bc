//! Priority assignment and closed-form sojourn analytics at the transaction
//! manager.
//!
//! Entities submit transactions at Poisson rates to a single exponential
//! server. Under equal priorities the system is a plain M/M/1; under the
//! urgency discipline each entity is its own preemptive-resume priority
//! class, ordered by urgency, then entity weight, then id.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Urgency {
    Urgent,
    Normal,
    NonUrgent,
}

impl Urgency {
    /// Lower rank value means higher priority.
    pub fn rank(self) -> u8 {
        match self {
            Urgency::Urgent => 0,
            Urgency::Normal => 1,
            Urgency::NonUrgent => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Urgency::Urgent => "urgent",
            Urgency::Normal => "normal",
            Urgency::NonUrgent => "non_urgent",
        }
    }
}

/// One transaction-producing entity (hospital, clinic, registry, ...).
///
/// `weight` expresses the entity's influence on the wider system and only
/// breaks ties within an urgency level. A zero arrival rate is allowed and
/// means the entity is silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub id: u32,
    pub arrival_rate: f64,
    pub urgency: Urgency,
    pub weight: f64,
}

impl EntityProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.arrival_rate.is_finite() || self.arrival_rate < 0.0 {
            return Err(Error::InvalidInput(format!(
                "entity {}: arrival rate must be finite and non-negative, got {}",
                self.id, self.arrival_rate
            )));
        }
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(Error::InvalidInput(format!(
                "entity {}: weight must be finite and non-negative, got {}",
                self.id, self.weight
            )));
        }
        Ok(())
    }
}

/// A set of entities feeding one exponential server.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSystem {
    entities: Vec<EntityProfile>,
    service_rate: f64,
}

impl QueueSystem {
    pub fn new(entities: Vec<EntityProfile>, service_rate: f64) -> Result<Self> {
        if entities.is_empty() {
            return Err(Error::InvalidInput("queue system needs entities".into()));
        }
        if !service_rate.is_finite() || service_rate <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "service rate must be finite and positive, got {service_rate}"
            )));
        }
        let mut ids: Vec<u32> = entities.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != entities.len() {
            return Err(Error::InvalidInput("duplicate entity ids".into()));
        }
        for e in &entities {
            e.validate()?;
        }
        Ok(Self {
            entities,
            service_rate,
        })
    }

    pub fn entities(&self) -> &[EntityProfile] {
        &self.entities
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.entities.iter().map(|e| e.arrival_rate).sum()
    }

    pub fn is_stable(&self) -> bool {
        self.total_arrival_rate() < self.service_rate
    }

    fn ensure_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                arrival: self.total_arrival_rate(),
                service: self.service_rate,
            })
        }
    }
}

/// Service-rate headroom; callers treat a non-positive margin as unstable.
pub fn stability_margin(system: &QueueSystem) -> f64 {
    system.service_rate() - system.total_arrival_rate()
}

/// Entity ids ranked from highest priority (rank 1) downward.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityOrder {
    ranked: Vec<u32>,
}

impl PriorityOrder {
    pub fn from_ranked_ids(ranked: Vec<u32>) -> Result<Self> {
        if ranked.is_empty() {
            return Err(Error::InvalidInput("empty priority order".into()));
        }
        let mut dedup = ranked.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() != ranked.len() {
            return Err(Error::InvalidInput("priority order repeats an id".into()));
        }
        Ok(Self { ranked })
    }

    pub fn ranked_ids(&self) -> &[u32] {
        &self.ranked
    }

    pub fn rank_of(&self, id: u32) -> Option<usize> {
        self.ranked.iter().position(|r| *r == id).map(|i| i + 1)
    }
}

/// Deterministic total order: urgency first, heavier entities next,
/// ascending id as the final tiebreak.
pub fn assign_priorities(entities: &[EntityProfile]) -> Result<PriorityOrder> {
    if entities.is_empty() {
        return Err(Error::InvalidInput("no entities to rank".into()));
    }
    for e in entities {
        e.validate()?;
    }
    let mut order: Vec<&EntityProfile> = entities.iter().collect();
    order.sort_by(|a, b| {
        a.urgency
            .rank()
            .cmp(&b.urgency.rank())
            .then(b.weight.total_cmp(&a.weight))
            .then(a.id.cmp(&b.id))
    });
    PriorityOrder::from_ranked_ids(order.into_iter().map(|e| e.id).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisciplineKind {
    EqualPriority,
    UrgencyPriority,
}

impl DisciplineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DisciplineKind::EqualPriority => "equal",
            DisciplineKind::UrgencyPriority => "priority",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SojournEntry {
    pub entity_id: u32,
    pub rank: u32,
    pub sojourn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SojournReport {
    pub discipline: DisciplineKind,
    pub entries: Vec<SojournEntry>,
}

impl SojournReport {
    pub fn sojourn_of(&self, entity_id: u32) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.entity_id == entity_id)
            .map(|e| e.sojourn)
    }
}

/// Mean sojourn time under equal priorities: every entity sees the plain
/// M/M/1 response time `1 / (mu - total arrival rate)`.
pub fn sojourn_equal(system: &QueueSystem) -> Result<SojournReport> {
    system.ensure_stable()?;
    let sojourn = 1.0 / stability_margin(system);
    let entries = system
        .entities()
        .iter()
        .enumerate()
        .map(|(i, e)| SojournEntry {
            entity_id: e.id,
            rank: i as u32 + 1,
            sojourn,
        })
        .collect();
    Ok(SojournReport {
        discipline: DisciplineKind::EqualPriority,
        entries,
    })
}

/// Mean sojourn times under preemptive-resume priorities, one class per
/// entity in `order`. For rank i with cumulative load `L_i` of ranks 1..=i:
///
/// `S_i = L_i / ((mu - L_i)(mu - L_{i-1})) + 1 / (mu - L_{i-1})`
///
/// The first term is the backlog of work from classes at or above rank i,
/// the second the entity's own service stretched by preemptions from
/// strictly higher classes. At rank 1 this collapses to `1 / (mu - lambda_1)`
/// and with a single merged class it equals the equal-priority formula.
pub fn sojourn_priority(system: &QueueSystem, order: &PriorityOrder) -> Result<SojournReport> {
    system.ensure_stable()?;

    let mut ids: Vec<u32> = system.entities().iter().map(|e| e.id).collect();
    ids.sort_unstable();
    let mut ranked_sorted = order.ranked_ids().to_vec();
    ranked_sorted.sort_unstable();
    if ids != ranked_sorted {
        return Err(Error::InvalidInput(
            "priority order is not a permutation of the system's entity ids".into(),
        ));
    }

    let mu = system.service_rate();
    let mut entries = Vec::with_capacity(order.ranked_ids().len());
    let mut load_above = 0.0; // cumulative arrival rate of ranks 1..i-1
    for (i, id) in order.ranked_ids().iter().enumerate() {
        let entity = system
            .entities()
            .iter()
            .find(|e| e.id == *id)
            .expect("permutation checked above");
        let load = load_above + entity.arrival_rate;
        let backlog = load / ((mu - load) * (mu - load_above));
        let service = 1.0 / (mu - load_above);
        entries.push(SojournEntry {
            entity_id: *id,
            rank: i as u32 + 1,
            sojourn: backlog + service,
        });
        load_above = load;
    }
    Ok(SojournReport {
        discipline: DisciplineKind::UrgencyPriority,
        entries,
    })
}

/// The 21-entity urgency grouping used by the service-rate sweep preset:
/// ids 1-8 urgent, 9-12 normal, 13-21 non-urgent, all with equal weight
/// and the given constant arrival rate.
pub fn grouped_entities(arrival_rate: f64) -> Vec<EntityProfile> {
    (1..=21)
        .map(|id| EntityProfile {
            id,
            arrival_rate,
            urgency: match id {
                1..=8 => Urgency::Urgent,
                9..=12 => Urgency::Normal,
                _ => Urgency::NonUrgent,
            },
            weight: 1.0,
        })
        .collect()
}
