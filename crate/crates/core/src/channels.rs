//! Transaction intake, channel allocation, per-channel configuration
//! binding, and block formation at the transaction manager.
//!
//! Three canonical channels exist: channel 1 carries urgent data, channel 2
//! carries non-urgent data that needs a high security level, and channel 3
//! carries everything else. Additional channels (for example an operator-
//! pinned one) may sit alongside them.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{
    self, ChainConfig, ChainParams, MetricWeights, NormalizationBounds, ValidatorProfile,
};
use crate::queueing::Urgency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    EmergencyNotification,
    RawData,
    FeatureSummary,
    LegalDocument,
}

impl TxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TxKind::EmergencyNotification => "emergency_notification",
            TxKind::RawData => "raw_data",
            TxKind::FeatureSummary => "feature_summary",
            TxKind::LegalDocument => "legal_document",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurityNeed {
    Standard,
    High,
}

/// One unit of data flowing from an entity into a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub id: u64,
    pub entity_id: u32,
    pub kind: TxKind,
    pub urgency: Urgency,
    pub security_need: SecurityNeed,
    pub size_bits: f64,
    pub created_at: f64,
}

impl Transaction {
    pub fn new(
        id: u64,
        entity_id: u32,
        kind: TxKind,
        urgency: Urgency,
        security_need: SecurityNeed,
        size_bits: f64,
        created_at: f64,
    ) -> Result<Self> {
        if !size_bits.is_finite() || size_bits <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "transaction {id}: size must be positive, got {size_bits}"
            )));
        }
        if kind == TxKind::EmergencyNotification && urgency != Urgency::Urgent {
            return Err(Error::InvalidInput(format!(
                "transaction {id}: emergency notifications must be urgent"
            )));
        }
        Ok(Self {
            id,
            entity_id,
            kind,
            urgency,
            security_need,
            size_bits,
            created_at,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Minimum validator count: lowest verification latency.
    Restricted,
    /// Maximum validator count: highest security level.
    FullyRestricted,
    /// Greedy-optimized configuration for the channel's weights.
    Optimized,
    /// Operator-pinned validator count and block size, taken verbatim.
    Fixed,
}

impl ChannelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelMode::Restricted => "restricted",
            ChannelMode::FullyRestricted => "fully_restricted",
            ChannelMode::Optimized => "optimized",
            ChannelMode::Fixed => "fixed",
        }
    }
}

/// A channel bound to a concrete configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub id: u32,
    pub mode: ChannelMode,
    pub weights: MetricWeights,
    pub config: ChainConfig,
}

/// Operator-supplied values for a fixed-mode channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    pub validators: usize,
    pub block_txs: u32,
}

/// Unbound channel description.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub id: u32,
    pub mode: ChannelMode,
    pub weights: MetricWeights,
    pub fixed: Option<FixedConfig>,
    /// Optional pinned validator selection (fixed mode only).
    pub validator_ids: Option<Vec<u32>>,
}

/// Routes a transaction to a channel id: urgent data to channel 1,
/// high-security non-urgent data to channel 2, the rest to channel 3.
/// Pure in (urgency, security_need); arrival order never matters.
pub fn allocate_channel(tx: &Transaction, channels: &[Channel]) -> Result<u32> {
    for required in [1u32, 2, 3] {
        if !channels.iter().any(|c| c.id == required) {
            return Err(Error::Config {
                path: "channels".into(),
                message: format!("canonical channel {required} is missing"),
            });
        }
    }
    Ok(if tx.urgency == Urgency::Urgent {
        1
    } else if tx.security_need == SecurityNeed::High {
        2
    } else {
        3
    })
}

/// Binds a channel spec to a concrete configuration against the given
/// validator pool.
pub fn bind_channel_config(
    spec: &ChannelSpec,
    params: &ChainParams,
    validators: &[ValidatorProfile],
    bounds: &NormalizationBounds,
) -> Result<Channel> {
    let config = match spec.mode {
        ChannelMode::Restricted => optimizer::config_for_count(
            params,
            &spec.weights,
            validators,
            bounds,
            params.min_validators,
        )?,
        ChannelMode::FullyRestricted => optimizer::config_for_count(
            params,
            &spec.weights,
            validators,
            bounds,
            params.max_validators.min(validators.len()),
        )?,
        ChannelMode::Optimized => {
            optimizer::bco(params, &spec.weights, validators, bounds)?.config
        }
        ChannelMode::Fixed => {
            let fixed = spec.fixed.ok_or_else(|| Error::Config {
                path: format!("channels[{}].fixed", spec.id),
                message: "fixed mode needs operator-supplied validators and block_txs".into(),
            })?;
            if let Some(ids) = &spec.validator_ids {
                let selection = ids
                    .iter()
                    .map(|id| {
                        validators
                            .iter()
                            .find(|v| v.id == *id)
                            .cloned()
                            .ok_or_else(|| Error::Config {
                                path: format!("channels[{}].validator_ids", spec.id),
                                message: format!("unknown validator id {id}"),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if selection.len() != fixed.validators {
                    return Err(Error::Config {
                        path: format!("channels[{}].validator_ids", spec.id),
                        message: format!(
                            "pinned {} validators but fixed.validators = {}",
                            selection.len(),
                            fixed.validators
                        ),
                    });
                }
                let l = optimizer::latency(params, &selection, fixed.block_txs)?;
                let s = optimizer::security(params, selection.len());
                let c = optimizer::cost(&selection, fixed.block_txs)?;
                let u = optimizer::utility(l, s, c, &spec.weights, bounds)?;
                ChainConfig {
                    validators: selection.len(),
                    block_txs: fixed.block_txs,
                    selected_ids: ids.clone(),
                    latency: l,
                    security: s,
                    cost: c,
                    utility: u,
                }
            } else {
                optimizer::config_fixed(
                    params,
                    &spec.weights,
                    validators,
                    bounds,
                    fixed.validators,
                    fixed.block_txs,
                )?
            }
        }
    };
    Ok(Channel {
        id: spec.id,
        mode: spec.mode,
        weights: spec.weights,
        config,
    })
}

/// Priority-then-FIFO intake queue of one channel.
#[derive(Debug, Clone, Default)]
pub struct ChannelQueue {
    lanes: [VecDeque<Transaction>; 3],
}

impl ChannelQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tx: Transaction) {
        self.lanes[tx.urgency.rank() as usize].push_back(tx);
    }

    pub fn len(&self) -> usize {
        self.lanes.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.iter().all(VecDeque::is_empty)
    }

    fn drain_up_to(&mut self, limit: usize) -> Vec<Transaction> {
        let mut out = Vec::with_capacity(limit.min(self.len()));
        for lane in &mut self.lanes {
            while out.len() < limit {
                match lane.pop_front() {
                    Some(tx) => out.push(tx),
                    None => break,
                }
            }
        }
        out
    }
}

/// An unverified block headed for the channel's validators.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub channel_id: u32,
    pub transactions: Vec<Transaction>,
    pub formed_at: f64,
}

/// Dequeues up to the channel's block size in priority-then-FIFO order;
/// an empty queue forms nothing. Underfull blocks are allowed (flush).
pub fn form_block(queue: &mut ChannelQueue, channel: &Channel, now: f64) -> Option<Block> {
    if queue.is_empty() {
        return None;
    }
    let transactions = queue.drain_up_to(channel.config.block_txs as usize);
    Some(Block {
        channel_id: channel.id,
        transactions,
        formed_at: now,
    })
}

/// One transaction's routing and commit timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchRecord {
    pub tx_id: u64,
    pub entity_id: u32,
    pub channel_id: u32,
    pub created_at: f64,
    pub enqueued_at: f64,
    pub committed_at: Option<f64>,
}

/// Single-writer manager state: channel table, per-channel intake queues,
/// and the dispatch log. Every accepted transaction is either in exactly
/// one queue or accounted to a formed block.
#[derive(Debug, Clone)]
pub struct BmState {
    channels: Vec<Channel>,
    queues: BTreeMap<u32, ChannelQueue>,
    dispatch: Vec<DispatchRecord>,
    dispatch_index: BTreeMap<u64, usize>,
    accepted: u64,
    in_blocks: u64,
    next_block_id: u64,
}

impl BmState {
    pub fn new(mut channels: Vec<Channel>) -> Result<Self> {
        channels.sort_by_key(|c| c.id);
        let mut ids: Vec<u32> = channels.iter().map(|c| c.id).collect();
        ids.dedup();
        if ids.len() != channels.len() {
            return Err(Error::Config {
                path: "channels".into(),
                message: "duplicate channel ids".into(),
            });
        }
        let queues = channels.iter().map(|c| (c.id, ChannelQueue::new())).collect();
        Ok(Self {
            channels,
            queues,
            dispatch: Vec::new(),
            dispatch_index: BTreeMap::new(),
            accepted: 0,
            in_blocks: 0,
            next_block_id: 0,
        })
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, id: u32) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    /// Routes and enqueues one transaction; returns the channel id.
    pub fn accept(&mut self, tx: Transaction, now: f64) -> Result<u32> {
        let channel_id = allocate_channel(&tx, &self.channels)?;
        self.dispatch_index.insert(tx.id, self.dispatch.len());
        self.dispatch.push(DispatchRecord {
            tx_id: tx.id,
            entity_id: tx.entity_id,
            channel_id,
            created_at: tx.created_at,
            enqueued_at: now,
            committed_at: None,
        });
        self.queues
            .get_mut(&channel_id)
            .expect("queue exists for every channel")
            .push(tx);
        self.accepted += 1;
        Ok(channel_id)
    }

    pub fn queue_len(&self, channel_id: u32) -> usize {
        self.queues.get(&channel_id).map_or(0, ChannelQueue::len)
    }

    fn take_block(&mut self, channel_id: u32, now: f64) -> Option<Block> {
        let channel = self.channels.iter().find(|c| c.id == channel_id)?.clone();
        let queue = self.queues.get_mut(&channel_id)?;
        let block = form_block(queue, &channel, now)?;
        self.in_blocks += block.transactions.len() as u64;
        self.next_block_id += 1;
        Some(block)
    }

    /// Forms a block only once the queue holds a full block's worth.
    pub fn form_if_full(&mut self, channel_id: u32, now: f64) -> Option<Block> {
        let full = {
            let channel = self.channels.iter().find(|c| c.id == channel_id)?;
            self.queue_len(channel_id) >= channel.config.block_txs as usize
        };
        if full {
            self.take_block(channel_id, now)
        } else {
            None
        }
    }

    /// Forms an underfull block from whatever is queued (timeout flush).
    pub fn flush(&mut self, channel_id: u32, now: f64) -> Option<Block> {
        self.take_block(channel_id, now)
    }

    /// Stamps commit times onto the block's dispatch records.
    pub fn mark_committed(&mut self, block: &Block, now: f64) {
        for tx in &block.transactions {
            if let Some(&idx) = self.dispatch_index.get(&tx.id) {
                self.dispatch[idx].committed_at = Some(now);
            }
        }
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn queued_total(&self) -> u64 {
        self.queues.values().map(|q| q.len() as u64).sum()
    }

    pub fn in_blocks(&self) -> u64 {
        self.in_blocks
    }

    pub fn block_count(&self) -> u64 {
        self.next_block_id
    }

    pub fn dispatch_log(&self) -> &[DispatchRecord] {
        &self.dispatch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn params() -> ChainParams {
        ChainParams {
            transaction_size_bits: 500.0,
            verification_workload: 100.0,
            feedback_size_bits: 5e5,
            downlink_bps: 1.2e6,
            uplink_bps: 1.3e6,
            broadcast_coeff: 1e-6,
            security_coeff: 1.0,
            network_scale_exp: 4.0,
            min_validators: 4,
            max_validators: 12,
            min_block_txs: 1,
            max_block_txs: 20,
        }
    }

    fn pool(count: usize, seed: u64) -> Vec<ValidatorProfile> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                ValidatorProfile::new(
                    i as u32 + 1,
                    rng.random_range(20.0..100.0),
                    rng.random_range(0.01..0.1),
                )
            })
            .collect()
    }

    fn tx(id: u64, urgency: Urgency, security: SecurityNeed) -> Transaction {
        let kind = match urgency {
            Urgency::Urgent => TxKind::EmergencyNotification,
            Urgency::Normal => TxKind::FeatureSummary,
            Urgency::NonUrgent => TxKind::LegalDocument,
        };
        Transaction::new(id, 1, kind, urgency, security, 500.0, 0.0).unwrap()
    }

    fn bound_channels() -> Vec<Channel> {
        let params = params();
        let pool = pool(12, 7);
        let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
        let w = MetricWeights::balanced();
        [
            (1, ChannelMode::Restricted, None),
            (2, ChannelMode::FullyRestricted, None),
            (3, ChannelMode::Optimized, None),
            (
                4,
                ChannelMode::Fixed,
                Some(FixedConfig {
                    validators: 8,
                    block_txs: 80,
                }),
            ),
        ]
        .into_iter()
        .map(|(id, mode, fixed)| {
            bind_channel_config(
                &ChannelSpec {
                    id,
                    mode,
                    weights: w,
                    fixed,
                    validator_ids: None,
                },
                &params,
                &pool,
                &bounds,
            )
            .unwrap()
        })
        .collect()
    }

    #[test]
    fn allocation_follows_urgency_then_security() {
        let channels = bound_channels();
        let urgent = tx(1, Urgency::Urgent, SecurityNeed::Standard);
        assert_eq!(allocate_channel(&urgent, &channels).unwrap(), 1);

        let legal = tx(2, Urgency::NonUrgent, SecurityNeed::High);
        assert_eq!(allocate_channel(&legal, &channels).unwrap(), 2);

        let normal = tx(3, Urgency::Normal, SecurityNeed::Standard);
        assert_eq!(allocate_channel(&normal, &channels).unwrap(), 3);
    }

    #[test]
    fn allocation_requires_canonical_channels() {
        let mut channels = bound_channels();
        channels.retain(|c| c.id != 2);
        let t = tx(1, Urgency::Urgent, SecurityNeed::Standard);
        assert!(matches!(
            allocate_channel(&t, &channels),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn emergency_must_be_urgent() {
        assert!(Transaction::new(
            1,
            1,
            TxKind::EmergencyNotification,
            Urgency::Normal,
            SecurityNeed::Standard,
            500.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn channel_modes_bind_expected_counts() {
        let channels = bound_channels();
        let p = params();
        assert_eq!(channels[0].config.validators, p.min_validators);
        assert_eq!(channels[1].config.validators, p.max_validators);
        assert_eq!(channels[3].config.validators, 8);
        assert_eq!(channels[3].config.block_txs, 80);

        // optimized delegates to the greedy search
        let pool = pool(12, 7);
        let bounds = NormalizationBounds::attainable_max(&p, &pool).unwrap();
        let direct = optimizer::bco(&p, &MetricWeights::balanced(), &pool, &bounds).unwrap();
        assert_eq!(channels[2].config, direct.config);
    }

    #[test]
    fn restricted_is_dominated_by_fully_restricted() {
        let channels = bound_channels();
        let restricted = &channels[0].config;
        let full = &channels[1].config;
        assert!(restricted.validators <= full.validators);
        assert!(restricted.security <= full.security);
        // same ranking, so the slowest of a prefix is no slower than the
        // slowest of a longer prefix
        let p = params();
        let pool = pool(12, 7);
        let ranked = optimizer::order_validators(&pool, &p);
        let max_time = |m: usize| {
            ranked[..m]
                .iter()
                .map(|v| v.verification_time(p.verification_workload))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        assert!(max_time(restricted.validators) <= max_time(full.validators));
    }

    #[test]
    fn block_formation_cases() {
        let channels = bound_channels();
        let fixed = channels.iter().find(|c| c.id == 4).unwrap(); // n = 80

        let mut queue = ChannelQueue::new();
        for i in 0..5 {
            queue.push(tx(i, Urgency::Normal, SecurityNeed::Standard));
        }
        let block = form_block(&mut queue, fixed, 1.0).unwrap();
        assert_eq!(block.transactions.len(), 5);
        assert!(queue.is_empty());

        let mut queue = ChannelQueue::new();
        for i in 0..100 {
            queue.push(tx(i, Urgency::Normal, SecurityNeed::Standard));
        }
        let block = form_block(&mut queue, fixed, 2.0).unwrap();
        assert_eq!(block.transactions.len(), 80);
        assert_eq!(queue.len(), 20);

        let mut empty = ChannelQueue::new();
        assert!(form_block(&mut empty, fixed, 3.0).is_none());
    }

    #[test]
    fn blocks_respect_priority_then_fifo() {
        let channels = bound_channels();
        let fixed = channels.iter().find(|c| c.id == 4).unwrap();
        let mut queue = ChannelQueue::new();
        queue.push(tx(1, Urgency::NonUrgent, SecurityNeed::High));
        queue.push(tx(2, Urgency::Normal, SecurityNeed::Standard));
        queue.push(tx(3, Urgency::NonUrgent, SecurityNeed::High));
        queue.push(tx(4, Urgency::Normal, SecurityNeed::Standard));
        let block = form_block(&mut queue, fixed, 0.0).unwrap();
        let ids: Vec<u64> = block.transactions.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![2, 4, 1, 3]);
    }

    proptest! {
        #[test]
        fn conservation_and_pure_allocation(
            ops in proptest::collection::vec((0u8..3, 0u8..2, 0u8..4), 1..200)
        ) {
            let channels = bound_channels();
            let mut bm = BmState::new(channels.clone()).unwrap();
            let mut formed: u64 = 0;
            let mut id = 0u64;
            for (i, (urg, sec, action)) in ops.iter().enumerate() {
                let urgency = match urg { 0 => Urgency::Urgent, 1 => Urgency::Normal, _ => Urgency::NonUrgent };
                let security = if *sec == 0 { SecurityNeed::Standard } else { SecurityNeed::High };
                id += 1;
                let t = tx(id, urgency, security);
                let expected = if urgency == Urgency::Urgent { 1 }
                    else if security == SecurityNeed::High { 2 } else { 3 };
                let got = bm.accept(t, i as f64).unwrap();
                prop_assert_eq!(got, expected);
                if *action == 0 {
                    let ch = (i % 4) as u32 + 1;
                    if let Some(block) = bm.flush(ch, i as f64) {
                        formed += block.transactions.len() as u64;
                    }
                }
                prop_assert_eq!(bm.accepted(), bm.queued_total() + bm.in_blocks());
            }
            prop_assert_eq!(bm.in_blocks(), formed);
        }
    }
}
