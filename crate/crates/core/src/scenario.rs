//! Scenario configuration: a strict TOML schema with named sections,
//! seeded entity/validator generators, bundled scenarios, and adapters
//! into the analytic and simulation modules.
//!
//! Parsing is strict: unknown keys are errors, so a typo in an experiment
//! file fails loudly instead of silently falling back to a default.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{
    bind_channel_config, Channel, ChannelMode, ChannelSpec, FixedConfig, SecurityNeed,
};
use crate::des::{stream_rng, Horizon, PipelineEntity, PipelineInput, SimConfig};
use crate::error::{Error, Result};
use crate::optimizer::{ChainParams, MetricWeights, NormalizationBounds, ValidatorProfile};
use crate::queueing::{EntityProfile, QueueSystem, Urgency};

/// Bundled reference scenario: 21 entities, a 21-validator pool, four
/// channels (three optimized, one operator-pinned).
pub const PAPER_DEFAULT: &str = "paper_default";
/// Bundled constant-rate scenario for the sojourn-time sweep.
pub const FIG4: &str = "fig4";

const PAPER_DEFAULT_TOML: &str = include_str!("../scenarios/paper_default.toml");
const FIG4_TOML: &str = include_str!("../scenarios/fig4.toml");

pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        PAPER_DEFAULT => Some(PAPER_DEFAULT_TOML),
        FIG4 => Some(FIG4_TOML),
        _ => None,
    }
}

pub fn bundled_names() -> &'static [&'static str] {
    &[PAPER_DEFAULT, FIG4]
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSettings {
    pub service_rate: f64,
    /// Extra service rates for the sojourn sweep (the base rate is always
    /// included).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mu_sweep: Vec<f64>,
    /// Optionally append a derived rate `block_txs / latency` of this
    /// channel's bound configuration to the sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive_mu_from_channel: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalPreset {
    /// Every entity sends a constant 2 transactions per second.
    Constant2,
    /// Per-entity rates drawn uniformly from [0.5, 1.5), mean 1 per second.
    Uniform1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityGenerator {
    pub count: usize,
    /// Ids 1..=urgent are urgent.
    pub urgent: usize,
    /// The next `normal` ids are normal; the rest are non-urgent.
    pub normal: usize,
    pub arrival: ArrivalPreset,
    pub seed: u64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub id: u32,
    pub arrival_rate: f64,
    pub urgency: Urgency,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Defaults to high for non-urgent entities (confidential documents)
    /// and standard otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub security: Option<SecurityNeed>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitiesSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<EntitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<EntityGenerator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorGenerator {
    pub count: usize,
    pub seed: u64,
    pub compute_min: f64,
    pub compute_max: f64,
    pub price_min: f64,
    pub price_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorSpec {
    pub id: u32,
    pub compute: f64,
    pub price: f64,
    /// Defaults to the binding fee `price * compute`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorsSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<ValidatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<ValidatorGenerator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSettings {
    pub id: u32,
    pub mode: ChannelMode,
    pub weights: MetricWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validator_ids: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSettings {
    /// Classification threshold, percent.
    pub zeta: f64,
    pub window_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_events: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_time: Option<f64>,
    pub warmup_fraction: f64,
    /// Timeout flush for underfull blocks, simulated seconds.
    pub flush_timeout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub queue: QueueSettings,
    pub entities: EntitiesSection,
    pub validators: ValidatorsSection,
    pub chain: ChainParams,
    /// Weights for the standalone optimizer run.
    pub optimizer: MetricWeights,
    pub channels: Vec<ChannelSettings>,
    pub signal: SignalSettings,
    pub sim: SimSettings,
}

impl Scenario {
    /// Parses, resolves generators into explicit lists, and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            location: "scenario".into(),
            message: e.to_string(),
        })?;
        scenario.resolve()?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Serializes the resolved form; a written scenario reloads to an equal
    /// value.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config {
            path: "scenario".into(),
            message: format!("cannot serialize: {e}"),
        })
    }

    fn resolve(&mut self) -> Result<()> {
        match (&self.entities.generate, self.entities.list.is_empty()) {
            (Some(g), true) => {
                self.entities.list = resolve_entities(g)?;
                self.entities.generate = None;
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::Config {
                    path: "entities".into(),
                    message: "provide either `list` or `generate`, not both".into(),
                })
            }
            (None, true) => {
                return Err(Error::Config {
                    path: "entities".into(),
                    message: "provide `list` entries or a `generate` block".into(),
                })
            }
        }
        // fill per-entity security defaults so the resolved form is explicit
        for e in &mut self.entities.list {
            if e.security.is_none() {
                e.security = Some(match e.urgency {
                    Urgency::NonUrgent => SecurityNeed::High,
                    _ => SecurityNeed::Standard,
                });
            }
        }
        match (&self.validators.generate, self.validators.list.is_empty()) {
            (Some(g), true) => {
                self.validators.list = resolve_validators(g)?;
                self.validators.generate = None;
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::Config {
                    path: "validators".into(),
                    message: "provide either `list` or `generate`, not both".into(),
                })
            }
            (None, true) => {
                return Err(Error::Config {
                    path: "validators".into(),
                    message: "provide `list` entries or a `generate` block".into(),
                })
            }
        }
        for v in &mut self.validators.list {
            if v.cost.is_none() {
                v.cost = Some(v.price * v.compute);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.queue.service_rate.is_finite() || self.queue.service_rate <= 0.0 {
            return Err(Error::Config {
                path: "queue.service_rate".into(),
                message: format!("must be finite and positive, got {}", self.queue.service_rate),
            });
        }
        for mu in &self.queue.mu_sweep {
            if !mu.is_finite() || *mu <= 0.0 {
                return Err(Error::Config {
                    path: "queue.mu_sweep".into(),
                    message: format!("sweep rates must be finite and positive, got {mu}"),
                });
            }
        }

        let mut ids: Vec<u32> = self.entities.list.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.entities.list.len() {
            return Err(Error::Config {
                path: "entities".into(),
                message: "duplicate entity ids".into(),
            });
        }
        for e in &self.entities.list {
            self.entity_profile(e).validate()?;
        }

        let mut vids: Vec<u32> = self.validators.list.iter().map(|v| v.id).collect();
        vids.sort_unstable();
        vids.dedup();
        if vids.len() != self.validators.list.len() {
            return Err(Error::Config {
                path: "validators".into(),
                message: "duplicate validator ids".into(),
            });
        }
        for v in self.validator_profiles() {
            v.validate()?;
        }

        self.chain.validate()?;
        self.optimizer.validate().map_err(|e| Error::Config {
            path: "optimizer".into(),
            message: e.to_string(),
        })?;

        let mut cids: Vec<u32> = self.channels.iter().map(|c| c.id).collect();
        cids.sort_unstable();
        cids.dedup();
        if cids.len() != self.channels.len() {
            return Err(Error::Config {
                path: "channels".into(),
                message: "duplicate channel ids".into(),
            });
        }
        for c in &self.channels {
            c.weights.validate().map_err(|e| Error::Config {
                path: format!("channels[{}].weights", c.id),
                message: e.to_string(),
            })?;
            match c.mode {
                ChannelMode::Fixed => {
                    if c.fixed.is_none() {
                        return Err(Error::Config {
                            path: format!("channels[{}]", c.id),
                            message: "fixed mode needs a `fixed` block".into(),
                        });
                    }
                }
                _ => {
                    if c.fixed.is_some() {
                        return Err(Error::Config {
                            path: format!("channels[{}]", c.id),
                            message: format!("`fixed` is only valid in fixed mode, not {}", c.mode.as_str()),
                        });
                    }
                    if c.validator_ids.is_some() {
                        return Err(Error::Config {
                            path: format!("channels[{}]", c.id),
                            message: "`validator_ids` is only valid in fixed mode".into(),
                        });
                    }
                }
            }
            if let Some(ids) = &c.validator_ids {
                for id in ids {
                    if !self.validators.list.iter().any(|v| v.id == *id) {
                        return Err(Error::Config {
                            path: format!("channels[{}].validator_ids", c.id),
                            message: format!("unknown validator id {id}"),
                        });
                    }
                }
            }
        }

        if let Some(ch) = self.queue.derive_mu_from_channel {
            if !self.channels.iter().any(|c| c.id == ch) {
                return Err(Error::Config {
                    path: "queue.derive_mu_from_channel".into(),
                    message: format!("unknown channel id {ch}"),
                });
            }
        }

        if !(self.signal.zeta.is_finite() && self.signal.zeta > 0.0) {
            return Err(Error::Config {
                path: "signal.zeta".into(),
                message: format!("must be finite and positive, got {}", self.signal.zeta),
            });
        }
        if self.signal.window_len < 2 {
            return Err(Error::Config {
                path: "signal.window_len".into(),
                message: format!("must be at least 2, got {}", self.signal.window_len),
            });
        }

        match (self.sim.horizon_events, self.sim.horizon_time) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config {
                    path: "sim".into(),
                    message: "set exactly one of horizon_events and horizon_time".into(),
                })
            }
            _ => {}
        }
        self.sim_config().validate().map_err(|e| Error::Config {
            path: "sim".into(),
            message: e.to_string(),
        })?;
        if !(self.sim.flush_timeout.is_finite() && self.sim.flush_timeout > 0.0) {
            return Err(Error::Config {
                path: "sim.flush_timeout".into(),
                message: format!("must be finite and positive, got {}", self.sim.flush_timeout),
            });
        }
        Ok(())
    }

    fn entity_profile(&self, e: &EntitySpec) -> EntityProfile {
        EntityProfile {
            id: e.id,
            arrival_rate: e.arrival_rate,
            urgency: e.urgency,
            weight: e.weight,
        }
    }

    pub fn entity_profiles(&self) -> Vec<EntityProfile> {
        self.entities.list.iter().map(|e| self.entity_profile(e)).collect()
    }

    pub fn validator_profiles(&self) -> Vec<ValidatorProfile> {
        self.validators
            .list
            .iter()
            .map(|v| {
                ValidatorProfile::with_cost(
                    v.id,
                    v.compute,
                    v.price,
                    v.cost.unwrap_or(v.price * v.compute),
                )
            })
            .collect()
    }

    pub fn queue_system(&self, service_rate: f64) -> Result<QueueSystem> {
        QueueSystem::new(self.entity_profiles(), service_rate)
    }

    pub fn normalization_bounds(&self) -> Result<NormalizationBounds> {
        NormalizationBounds::attainable_max(&self.chain, &self.validator_profiles())
    }

    /// Binds every channel against the scenario's validator pool.
    pub fn bound_channels(&self) -> Result<Vec<Channel>> {
        let validators = self.validator_profiles();
        let bounds = self.normalization_bounds()?;
        self.channels
            .iter()
            .map(|c| {
                bind_channel_config(
                    &ChannelSpec {
                        id: c.id,
                        mode: c.mode,
                        weights: c.weights,
                        fixed: c.fixed,
                        validator_ids: c.validator_ids.clone(),
                    },
                    &self.chain,
                    &validators,
                    &bounds,
                )
            })
            .collect()
    }

    pub fn sim_config(&self) -> SimConfig {
        let horizon = match (self.sim.horizon_events, self.sim.horizon_time) {
            (Some(n), _) => Horizon::Events(n),
            (_, Some(t)) => Horizon::Time(t),
            (None, None) => Horizon::Events(1),
        };
        SimConfig {
            seed: self.sim.seed,
            horizon,
            warmup_fraction: self.sim.warmup_fraction,
        }
    }

    /// Everything the pipeline simulation needs, with channels bound.
    pub fn pipeline_input(&self) -> Result<PipelineInput> {
        let entities = self
            .entities
            .list
            .iter()
            .map(|e| PipelineEntity {
                profile: self.entity_profile(e),
                security: e.security.unwrap_or(SecurityNeed::Standard),
            })
            .collect();
        Ok(PipelineInput {
            entities,
            service_rate: self.queue.service_rate,
            channels: self.bound_channels()?,
            flush_timeout: self.sim.flush_timeout,
            tx_size_bits: self.chain.transaction_size_bits,
        })
    }

    /// Service rates for the sojourn sweep: the base rate, the configured
    /// sweep values, and optionally the rate derived from a bound channel
    /// (`block_txs / latency`).
    pub fn sweep_rates(&self) -> Result<Vec<(String, f64)>> {
        let mut rates = Vec::new();
        rates.push(("scenario".to_string(), self.queue.service_rate));
        for mu in &self.queue.mu_sweep {
            if *mu != self.queue.service_rate {
                rates.push(("sweep".to_string(), *mu));
            }
        }
        if let Some(ch) = self.queue.derive_mu_from_channel {
            let channels = self.bound_channels()?;
            let channel = channels
                .iter()
                .find(|c| c.id == ch)
                .expect("validated channel id");
            rates.push((
                format!("derived_ch{ch}"),
                channel.config.block_txs as f64 / channel.config.latency,
            ));
        }
        Ok(rates)
    }
}

fn resolve_entities(g: &EntityGenerator) -> Result<Vec<EntitySpec>> {
    if g.count == 0 {
        return Err(Error::Config {
            path: "entities.generate.count".into(),
            message: "must be positive".into(),
        });
    }
    if g.urgent + g.normal > g.count {
        return Err(Error::Config {
            path: "entities.generate".into(),
            message: format!(
                "urgent ({}) + normal ({}) exceed count ({})",
                g.urgent, g.normal, g.count
            ),
        });
    }
    Ok((1..=g.count as u32)
        .map(|id| {
            let urgency = if id as usize <= g.urgent {
                Urgency::Urgent
            } else if id as usize <= g.urgent + g.normal {
                Urgency::Normal
            } else {
                Urgency::NonUrgent
            };
            let arrival_rate = match g.arrival {
                ArrivalPreset::Constant2 => 2.0,
                ArrivalPreset::Uniform1 => {
                    let mut rng = stream_rng(g.seed, id as u64, 0xA881);
                    rng.random_range(0.5..1.5)
                }
            };
            EntitySpec {
                id,
                arrival_rate,
                urgency,
                weight: g.weight,
                security: None,
            }
        })
        .collect())
}

fn resolve_validators(g: &ValidatorGenerator) -> Result<Vec<ValidatorSpec>> {
    if g.count == 0 {
        return Err(Error::Config {
            path: "validators.generate.count".into(),
            message: "must be positive".into(),
        });
    }
    if !(g.compute_min > 0.0 && g.compute_max > g.compute_min) {
        return Err(Error::Config {
            path: "validators.generate".into(),
            message: "need 0 < compute_min < compute_max".into(),
        });
    }
    if !(g.price_min >= 0.0 && g.price_max > g.price_min) {
        return Err(Error::Config {
            path: "validators.generate".into(),
            message: "need 0 <= price_min < price_max".into(),
        });
    }
    Ok((1..=g.count as u32)
        .map(|id| {
            let mut rng = stream_rng(g.seed, id as u64, 0xA11D);
            let compute = rng.random_range(g.compute_min..g.compute_max);
            let price = rng.random_range(g.price_min..g.price_max);
            ValidatorSpec {
                id,
                compute,
                price,
                cost: None,
            }
        })
        .collect())
}

/// Loads a scenario from a file path.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml_str(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            location: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Resolves a CLI scenario argument: an existing file path first, then a
/// bundled scenario name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    match bundled(arg) {
        Some(text) => Scenario::from_toml_str(text),
        None => Err(Error::Config {
            path: "scenario".into(),
            message: format!(
                "`{arg}` is neither a file nor a bundled scenario (available: {})",
                bundled_names().join(", ")
            ),
        }),
    }
}
