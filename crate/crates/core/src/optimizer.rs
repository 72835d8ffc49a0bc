//! Ledger configuration optimization.
//!
//! Models block-verification latency, validator-count security, and
//! per-transaction cost; combines them into a weighted normalized utility
//! (lower is better); solves the block size in closed form; and selects the
//! validator count with a greedy gain test, checked against an exhaustive
//! grid search.
//!
//! All routines work with *effective* weights that fold the normalization
//! bounds in once: `alpha_eff = alpha / latency_max`,
//! `beta_eff = beta * security_max`, `gamma_eff = gamma / cost_max`. With
//! unit bounds they reduce to the raw weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block validator characterized by its compute capacity, the unit price
/// it pays its compute provider, and the fee it charges per block.
///
/// The fee must cover the provider payment: `cost >= price * compute`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorProfile {
    pub id: u32,
    /// Compute units per second; `workload / compute` is the verification time.
    pub compute: f64,
    /// Currency per compute unit paid to the provider.
    pub price: f64,
    /// Fee charged for one verification task.
    pub cost: f64,
}

impl ValidatorProfile {
    /// Validator charging exactly its provider payment (the binding fee).
    pub fn new(id: u32, compute: f64, price: f64) -> Self {
        Self {
            id,
            compute,
            price,
            cost: price * compute,
        }
    }

    pub fn with_cost(id: u32, compute: f64, price: f64, cost: f64) -> Self {
        Self {
            id,
            compute,
            price,
            cost,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.compute.is_finite() || self.compute <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "validator {}: compute must be positive, got {}",
                self.id, self.compute
            )));
        }
        if !self.price.is_finite() || self.price < 0.0 {
            return Err(Error::InvalidInput(format!(
                "validator {}: price must be non-negative, got {}",
                self.id, self.price
            )));
        }
        if !self.cost.is_finite() || self.cost < 0.0 {
            return Err(Error::InvalidInput(format!(
                "validator {}: cost must be non-negative, got {}",
                self.id, self.cost
            )));
        }
        self.check_covers_payment()
    }

    /// The fee-coverage constraint; the binding fee `cost == price * compute`
    /// is accepted.
    pub fn check_covers_payment(&self) -> Result<()> {
        if self.cost < self.price * self.compute {
            return Err(Error::ConstraintViolation(format!(
                "validator {}: fee {} does not cover provider payment {}",
                self.id,
                self.cost,
                self.price * self.compute
            )));
        }
        Ok(())
    }

    pub fn verification_time(&self, workload: f64) -> f64 {
        workload / self.compute
    }
}

/// Static parameters of one ledger deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    /// Transaction size in bits.
    pub transaction_size_bits: f64,
    /// Verification workload per block, in compute units.
    pub verification_workload: f64,
    /// Verification feedback size in bits.
    pub feedback_size_bits: f64,
    /// Downlink rate (manager to validators), bits/s.
    pub downlink_bps: f64,
    /// Uplink rate (validators to manager), bits/s.
    pub uplink_bps: f64,
    /// Broadcast-and-compare coefficient, seconds per bit per validator.
    pub broadcast_coeff: f64,
    /// Security scale coefficient.
    pub security_coeff: f64,
    /// Network-scale exponent (at least 2).
    pub network_scale_exp: f64,
    /// Minimum validators per configuration.
    pub min_validators: usize,
    /// Maximum validators per configuration.
    pub max_validators: usize,
    /// Minimum transactions per block.
    pub min_block_txs: u32,
    /// Maximum transactions per block.
    pub max_block_txs: u32,
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("transaction_size_bits", self.transaction_size_bits),
            ("verification_workload", self.verification_workload),
            ("feedback_size_bits", self.feedback_size_bits),
            ("downlink_bps", self.downlink_bps),
            ("uplink_bps", self.uplink_bps),
            ("security_coeff", self.security_coeff),
        ];
        for (name, v) in positives {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config {
                    path: format!("chain.{name}"),
                    message: format!("must be finite and positive, got {v}"),
                });
            }
        }
        if !self.broadcast_coeff.is_finite() || self.broadcast_coeff < 0.0 {
            return Err(Error::Config {
                path: "chain.broadcast_coeff".into(),
                message: format!("must be finite and non-negative, got {}", self.broadcast_coeff),
            });
        }
        if !self.network_scale_exp.is_finite() || self.network_scale_exp < 2.0 {
            return Err(Error::Config {
                path: "chain.network_scale_exp".into(),
                message: format!("must be at least 2, got {}", self.network_scale_exp),
            });
        }
        if self.min_validators == 0 || self.min_validators > self.max_validators {
            return Err(Error::Config {
                path: "chain.min_validators".into(),
                message: format!(
                    "need 1 <= min_validators <= max_validators, got {} and {}",
                    self.min_validators, self.max_validators
                ),
            });
        }
        if self.min_block_txs == 0 || self.min_block_txs > self.max_block_txs {
            return Err(Error::Config {
                path: "chain.min_block_txs".into(),
                message: format!(
                    "need 1 <= min_block_txs <= max_block_txs, got {} and {}",
                    self.min_block_txs, self.max_block_txs
                ),
            });
        }
        Ok(())
    }
}

/// Relative importance of latency, security, and cost; must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MetricWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn balanced() -> Self {
        Self {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 - 2.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights must sum to 1 (got {sum})"
            )));
        }
        Ok(())
    }
}

/// Per-metric maxima used to normalize the utility terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub latency_max: f64,
    pub security_max: f64,
    pub cost_max: f64,
}

impl NormalizationBounds {
    pub fn new(latency_max: f64, security_max: f64, cost_max: f64) -> Result<Self> {
        for (name, v) in [
            ("latency_max", latency_max),
            ("security_max", security_max),
            ("cost_max", cost_max),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(Self {
            latency_max,
            security_max,
            cost_max,
        })
    }

    /// Unit bounds; the normalized utility then equals the raw weighted sum.
    pub fn unit() -> Self {
        Self {
            latency_max: 1.0,
            security_max: 1.0,
            cost_max: 1.0,
        }
    }

    /// Attainable maxima over the feasible box: latency at the largest
    /// admissible configuration (all box-maximum validators, maximum block),
    /// security at the validator ceiling, cost at the full pool and the
    /// minimum block size.
    pub fn attainable_max(params: &ChainParams, validators: &[ValidatorProfile]) -> Result<Self> {
        params.validate()?;
        if validators.is_empty() {
            return Err(Error::InvalidInput("empty validator pool".into()));
        }
        let ranked = order_validators(validators, params);
        let m_eff = params.max_validators.min(ranked.len());
        let selection = &ranked[..m_eff];
        let latency_max = latency(params, selection, params.max_block_txs)?;
        let security_max = security(params, params.max_validators);
        let cost_max = cost(selection, params.min_block_txs)?;
        Self::new(latency_max, security_max, cost_max)
    }
}

/// Block verification latency in seconds: block transmission downlink, the
/// slowest selected validator's verification time, result broadcast and
/// comparison across the selection, and the feedback uplink.
pub fn latency(params: &ChainParams, selected: &[ValidatorProfile], block_txs: u32) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::InvalidInput(
            "latency needs a non-empty validator selection".into(),
        ));
    }
    if block_txs == 0 {
        return Err(Error::InvalidInput("block size must be at least 1".into()));
    }
    let block_bits = block_txs as f64 * params.transaction_size_bits;
    let verify = selected
        .iter()
        .map(|v| v.verification_time(params.verification_workload))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(block_bits / params.downlink_bps
        + verify
        + params.broadcast_coeff * block_bits * selected.len() as f64
        + params.feedback_size_bits / params.uplink_bps)
}

/// Security level: a power law in the validator count.
pub fn security(params: &ChainParams, validators: usize) -> f64 {
    params.security_coeff * (validators as f64).powf(params.network_scale_exp)
}

/// Cost per transaction: the selection's fees spread over one block.
/// Every selected validator must satisfy the fee-coverage constraint.
pub fn cost(selected: &[ValidatorProfile], block_txs: u32) -> Result<f64> {
    if block_txs == 0 {
        return Err(Error::InvalidInput("block size must be at least 1".into()));
    }
    for v in selected {
        v.check_covers_payment()?;
    }
    Ok(selected.iter().map(|v| v.cost).sum::<f64>() / block_txs as f64)
}

/// Weighted normalized utility; lower is better. Latency and cost count
/// relative to their maxima, security through its normalized reciprocal.
pub fn utility(
    latency: f64,
    security: f64,
    cost: f64,
    weights: &MetricWeights,
    bounds: &NormalizationBounds,
) -> Result<f64> {
    if security <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "security must be positive, got {security}"
        )));
    }
    Ok(weights.alpha * latency / bounds.latency_max
        + weights.beta * bounds.security_max / security
        + weights.gamma * cost / bounds.cost_max)
}

/// Continuous block-size solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSizeSolution {
    pub n: f64,
    /// False when the latency weight is zero, in which case there is no
    /// interior stationary point and the box maximum is returned.
    pub interior: bool,
}

/// Stationary block size of the continuous objective for a fixed selection:
///
/// `n = sqrt(gamma_eff * sum(price_i * compute_i) / (alpha_eff * (B/r_d + psi*B*m)))`
///
/// Callers round half-up and clamp to the block-size box. A zero cost weight
/// yields 0 (clamps to the minimum); a zero latency weight has no interior
/// optimum and returns the maximum with `interior = false`.
pub fn closed_form_n(
    params: &ChainParams,
    weights: &MetricWeights,
    bounds: &NormalizationBounds,
    selected: &[ValidatorProfile],
) -> Result<BlockSizeSolution> {
    if selected.is_empty() {
        return Err(Error::InvalidInput(
            "block-size solution needs a non-empty selection".into(),
        ));
    }
    let alpha_eff = weights.alpha / bounds.latency_max;
    let gamma_eff = weights.gamma / bounds.cost_max;
    if alpha_eff == 0.0 {
        return Ok(BlockSizeSolution {
            n: params.max_block_txs as f64,
            interior: false,
        });
    }
    let payment: f64 = selected.iter().map(|v| v.price * v.compute).sum();
    let b = params.transaction_size_bits;
    let slope = alpha_eff * (b / params.downlink_bps + params.broadcast_coeff * b * selected.len() as f64);
    Ok(BlockSizeSolution {
        n: (gamma_eff * payment / slope).sqrt(),
        interior: true,
    })
}

/// Round half-up, then clamp into the block-size box.
pub fn clamp_block_txs(n: f64, params: &ChainParams) -> u32 {
    let nint = (n + 0.5).floor();
    if nint < params.min_block_txs as f64 {
        params.min_block_txs
    } else if nint > params.max_block_txs as f64 {
        params.max_block_txs
    } else {
        nint as u32
    }
}

/// Validators sorted by verification time ascending (fastest first),
/// ties broken by ascending id. The workload cancels, so this is simply
/// descending compute capacity.
pub fn order_validators(validators: &[ValidatorProfile], params: &ChainParams) -> Vec<ValidatorProfile> {
    let mut ranked = validators.to_vec();
    ranked.sort_by(|a, b| {
        a.verification_time(params.verification_workload)
            .total_cmp(&b.verification_time(params.verification_workload))
            .then(a.id.cmp(&b.id))
    });
    ranked
}

/// One evaluated `(m, n)` candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub validators: usize,
    pub block_txs: u32,
    pub latency: f64,
    pub security: f64,
    pub cost: f64,
    pub utility: f64,
}

fn evaluate_prefix(
    params: &ChainParams,
    weights: &MetricWeights,
    bounds: &NormalizationBounds,
    ranked: &[ValidatorProfile],
    m: usize,
) -> Result<EvalPoint> {
    let selection = &ranked[..m];
    let solution = closed_form_n(params, weights, bounds, selection)?;
    let n = clamp_block_txs(solution.n, params);
    evaluate_at(params, weights, bounds, ranked, m, n)
}

fn evaluate_at(
    params: &ChainParams,
    weights: &MetricWeights,
    bounds: &NormalizationBounds,
    ranked: &[ValidatorProfile],
    m: usize,
    n: u32,
) -> Result<EvalPoint> {
    let selection = &ranked[..m];
    let l = latency(params, selection, n)?;
    let s = security(params, m);
    let c = cost(selection, n)?;
    let u = utility(l, s, c, weights, bounds)?;
    Ok(EvalPoint {
        validators: m,
        block_txs: n,
        latency: l,
        security: s,
        cost: c,
        utility: u,
    })
}

/// A fully specified channel configuration with its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub validators: usize,
    pub block_txs: u32,
    pub selected_ids: Vec<u32>,
    pub latency: f64,
    pub security: f64,
    pub cost: f64,
    pub utility: f64,
}

impl ChainConfig {
    fn from_point(point: &EvalPoint, ranked: &[ValidatorProfile]) -> Self {
        Self {
            validators: point.validators,
            block_txs: point.block_txs,
            selected_ids: ranked[..point.validators].iter().map(|v| v.id).collect(),
            latency: point.latency,
            security: point.security,
            cost: point.cost,
            utility: point.utility,
        }
    }
}

/// Result of an optimization run, with the per-candidate trace for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub config: ChainConfig,
    pub trace: Vec<EvalPoint>,
    /// Gain tests executed (greedy) or grid points visited (exhaustive).
    pub iterations: usize,
    pub evaluations: usize,
}

fn rank_and_check(
    params: &ChainParams,
    weights: &MetricWeights,
    validators: &[ValidatorProfile],
) -> Result<Vec<ValidatorProfile>> {
    params.validate()?;
    weights.validate()?;
    for v in validators {
        v.validate()?;
    }
    let ranked = order_validators(validators, params);
    if ranked.len() < params.min_validators + 1 {
        return Err(Error::Infeasible(format!(
            "need at least {} validators, pool has {}",
            params.min_validators + 1,
            ranked.len()
        )));
    }
    Ok(ranked)
}

/// Greedy configuration search: walk the ranked validator list upward from
/// the minimum count, solving the block size in closed form at each step,
/// and stop as soon as the security gain of the latest validator no longer
/// pays for the latency and cost it adds. Runs at most
/// `max_validators - min_validators` gain tests.
pub fn bco(
    params: &ChainParams,
    weights: &MetricWeights,
    validators: &[ValidatorProfile],
    bounds: &NormalizationBounds,
) -> Result<OptimizeOutcome> {
    let ranked = rank_and_check(params, weights, validators)?;
    let m_top = params.max_validators.min(ranked.len());
    let beta_eff = weights.beta * bounds.security_max;
    let alpha_eff = weights.alpha / bounds.latency_max;
    let gamma_eff = weights.gamma / bounds.cost_max;

    let mut prev = evaluate_prefix(params, weights, bounds, &ranked, params.min_validators)?;
    let mut trace = vec![prev];
    let mut iterations = 0;
    for m in params.min_validators + 1..=m_top {
        iterations += 1;
        let current = evaluate_prefix(params, weights, bounds, &ranked, m)?;
        trace.push(current);
        let gain = beta_eff * (1.0 / prev.security - 1.0 / current.security);
        let rise = (alpha_eff * current.latency + gamma_eff * current.cost)
            - (alpha_eff * prev.latency + gamma_eff * prev.cost);
        if gain < rise {
            break;
        }
        prev = current;
    }
    let evaluations = trace.len();
    Ok(OptimizeOutcome {
        config: ChainConfig::from_point(&prev, &ranked),
        trace,
        iterations,
        evaluations,
    })
}

/// Oracle search over the whole `(m, n)` grid; ties broken by the smaller
/// validator count, then the smaller block size.
pub fn exhaustive_search(
    params: &ChainParams,
    weights: &MetricWeights,
    validators: &[ValidatorProfile],
    bounds: &NormalizationBounds,
) -> Result<OptimizeOutcome> {
    let ranked = rank_and_check(params, weights, validators)?;
    let m_top = params.max_validators.min(ranked.len());

    let mut best: Option<EvalPoint> = None;
    let mut trace = Vec::new();
    for m in params.min_validators..=m_top {
        for n in params.min_block_txs..=params.max_block_txs {
            let point = evaluate_at(params, weights, bounds, &ranked, m, n)?;
            trace.push(point);
            let better = match &best {
                None => true,
                Some(b) => point.utility < b.utility,
            };
            if better {
                best = Some(point);
            }
        }
    }
    let best = best.expect("grid is non-empty");
    let evaluations = trace.len();
    Ok(OptimizeOutcome {
        config: ChainConfig::from_point(&best, &ranked),
        trace,
        iterations: evaluations,
        evaluations,
    })
}

/// Configuration for a forced validator count: the `m` fastest validators
/// with the closed-form block size clamped into the box.
pub fn config_for_count(
    params: &ChainParams,
    weights: &MetricWeights,
    validators: &[ValidatorProfile],
    bounds: &NormalizationBounds,
    m: usize,
) -> Result<ChainConfig> {
    params.validate()?;
    weights.validate()?;
    for v in validators {
        v.validate()?;
    }
    let ranked = order_validators(validators, params);
    if m == 0 || m > ranked.len() {
        return Err(Error::Infeasible(format!(
            "cannot select {m} validators from a pool of {}",
            ranked.len()
        )));
    }
    let point = evaluate_prefix(params, weights, bounds, &ranked, m)?;
    Ok(ChainConfig::from_point(&point, &ranked))
}

/// Configuration with operator-pinned `(m, n)`, metrics computed verbatim.
/// The block size is taken as given and not clamped into the optimizer box.
pub fn config_fixed(
    params: &ChainParams,
    weights: &MetricWeights,
    validators: &[ValidatorProfile],
    bounds: &NormalizationBounds,
    m: usize,
    n: u32,
) -> Result<ChainConfig> {
    params.validate()?;
    weights.validate()?;
    for v in validators {
        v.validate()?;
    }
    let ranked = order_validators(validators, params);
    if m == 0 || m > ranked.len() {
        return Err(Error::Infeasible(format!(
            "cannot select {m} validators from a pool of {}",
            ranked.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("fixed block size must be at least 1".into()));
    }
    let point = evaluate_at(params, weights, bounds, &ranked, m, n)?;
    Ok(ChainConfig::from_point(&point, &ranked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn unit_params() -> ChainParams {
        // degenerate feedback/broadcast terms: checks the formula shape only
        ChainParams {
            transaction_size_bits: 1.0,
            verification_workload: 1.0,
            feedback_size_bits: 0.0,
            downlink_bps: 1.0,
            uplink_bps: 1.0,
            broadcast_coeff: 0.0,
            security_coeff: 1.0,
            network_scale_exp: 4.0,
            min_validators: 1,
            max_validators: 8,
            min_block_txs: 1,
            max_block_txs: 100,
        }
    }

    fn reference_params() -> ChainParams {
        ChainParams {
            transaction_size_bits: 500.0,
            verification_workload: 100.0,
            feedback_size_bits: 5e5,
            downlink_bps: 1.2e6,
            uplink_bps: 1.3e6,
            broadcast_coeff: 1e-6,
            security_coeff: 1.0,
            network_scale_exp: 4.0,
            min_validators: 1,
            max_validators: 21,
            min_block_txs: 1,
            max_block_txs: 20,
        }
    }

    #[test]
    fn latency_with_unit_parameters() {
        let params = unit_params();
        let sel = [ValidatorProfile::new(1, 1.0, 0.0)];
        assert_eq!(latency(&params, &sel, 1).unwrap(), 2.0);
    }

    #[test]
    fn latency_with_reference_parameters() {
        let params = reference_params();
        let sel = [ValidatorProfile::new(1, 50.0, 0.01)];
        let l = latency(&params, &sel, 10).unwrap();
        let expected = 10.0 * 500.0 / 1.2e6 + 100.0 / 50.0 + 1e-6 * 5000.0 + 5e5 / 1.3e6;
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 2.39378).abs() < 1e-5);
    }

    #[test]
    fn latency_grows_when_the_max_validator_slows() {
        let params = reference_params();
        let fast = [
            ValidatorProfile::new(1, 50.0, 0.01),
            ValidatorProfile::new(2, 40.0, 0.01),
        ];
        let slower = [
            ValidatorProfile::new(1, 50.0, 0.01),
            ValidatorProfile::new(2, 30.0, 0.01),
        ];
        assert!(latency(&params, &slower, 10).unwrap() > latency(&params, &fast, 10).unwrap());
    }

    #[test]
    fn security_power_law() {
        let params = reference_params();
        assert_eq!(security(&params, 1), 1.0);
        assert_eq!(security(&params, 8), 4096.0);
        let m = 5;
        assert!((security(&params, 2 * m) / security(&params, m) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn cost_examples() {
        let v = ValidatorProfile::with_cost(1, 10.0, 0.5, 10.0);
        assert_eq!(cost(&[v.clone()], 10).unwrap(), 1.0);

        // binding fee accepted
        let binding = ValidatorProfile::new(2, 10.0, 0.5);
        assert!(cost(&[binding], 1).is_ok());

        let violating = ValidatorProfile::with_cost(3, 10.0, 0.5, 4.9);
        assert!(matches!(
            cost(&[violating], 1),
            Err(Error::ConstraintViolation(_))
        ));

        let c1 = cost(&[v.clone()], 5).unwrap();
        let c2 = cost(&[v], 10).unwrap();
        assert!((c1 / c2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn utility_is_one_at_the_normalization_point() {
        let bounds = NormalizationBounds::new(4.0, 100.0, 2.5).unwrap();
        let w = MetricWeights::new(0.2, 0.5, 0.3).unwrap();
        let u = utility(4.0, 100.0, 2.5, &w, &bounds).unwrap();
        assert!((u - 1.0).abs() < 1e-12);

        let w = MetricWeights::new(1.0, 0.0, 0.0).unwrap();
        let u = utility(2.0, 100.0, 2.5, &w, &bounds).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
    }

    #[test]
    fn utility_rewards_security() {
        let bounds = NormalizationBounds::unit();
        let w = MetricWeights::balanced();
        let low = utility(1.0, 10.0, 1.0, &w, &bounds).unwrap();
        let high = utility(1.0, 20.0, 1.0, &w, &bounds).unwrap();
        assert!(high < low);
    }

    #[test]
    fn closed_form_n_unit_ratio() {
        // choose gamma * payment == alpha * (B/r_d + psi*B*m)  =>  n = 1
        let mut params = unit_params();
        params.downlink_bps = 1.0;
        params.broadcast_coeff = 0.0;
        let sel = [ValidatorProfile::new(1, 2.0, 0.5)]; // payment = 1
        let w = MetricWeights::new(0.5, 0.0, 0.5).unwrap();
        let sol = closed_form_n(&params, &w, &NormalizationBounds::unit(), &sel).unwrap();
        assert!(sol.interior);
        assert!((sol.n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_n_degenerate_weights() {
        let params = reference_params();
        let sel = [ValidatorProfile::new(1, 50.0, 0.05)];
        let bounds = NormalizationBounds::unit();

        let cost_free = MetricWeights::new(1.0, 0.0, 0.0).unwrap();
        let sol = closed_form_n(&params, &cost_free, &bounds, &sel).unwrap();
        assert!(sol.interior);
        assert_eq!(sol.n, 0.0);
        assert_eq!(clamp_block_txs(sol.n, &params), params.min_block_txs);

        let latency_free = MetricWeights::new(0.0, 0.5, 0.5).unwrap();
        let sol = closed_form_n(&params, &latency_free, &bounds, &sel).unwrap();
        assert!(!sol.interior);
        assert_eq!(sol.n, params.max_block_txs as f64);
    }

    #[test]
    fn finite_difference_stationarity() {
        let mut rng = ChaCha12Rng::seed_from_u64(0x51A7);
        for _ in 0..100 {
            let mut params = reference_params();
            params.broadcast_coeff = rng.random_range(1e-7..1e-5);
            params.max_block_txs = 1_000_000; // keep the stationary point interior
            let validators: Vec<ValidatorProfile> = (0..rng.random_range(1..10))
                .map(|i| {
                    ValidatorProfile::new(
                        i + 1,
                        rng.random_range(20.0..100.0),
                        rng.random_range(0.01..0.1),
                    )
                })
                .collect();
            let alpha = rng.random_range(0.1..0.8);
            let gamma = rng.random_range(0.1..(1.0 - alpha) - 1e-6);
            let beta = 1.0 - alpha - gamma;
            let w = MetricWeights::new(alpha, beta, gamma).unwrap();
            let bounds =
                NormalizationBounds::new(rng.random_range(0.5..10.0), rng.random_range(1.0..1e6), rng.random_range(0.5..100.0))
                    .unwrap();

            let sol = closed_form_n(&params, &w, &bounds, &validators).unwrap();
            assert!(sol.interior && sol.n > 0.0);

            let m = validators.len();
            let objective = |n: f64| {
                let block_bits = n * params.transaction_size_bits;
                let verify = validators
                    .iter()
                    .map(|v| v.verification_time(params.verification_workload))
                    .fold(f64::NEG_INFINITY, f64::max);
                let l = block_bits / params.downlink_bps
                    + verify
                    + params.broadcast_coeff * block_bits * m as f64
                    + params.feedback_size_bits / params.uplink_bps;
                let c = validators.iter().map(|v| v.cost).sum::<f64>() / n;
                let s = security(&params, m);
                w.alpha * l / bounds.latency_max
                    + w.beta * bounds.security_max / s
                    + w.gamma * c / bounds.cost_max
            };

            let h = 1e-3 * sol.n;
            let fd = (objective(sol.n + h) - objective(sol.n - h)) / (2.0 * h);
            let f = objective(sol.n);
            assert!(
                fd.abs() < 1e-6 * f.abs(),
                "finite difference {fd} too large relative to {f} at n = {}",
                sol.n
            );
        }
    }

    #[test]
    fn order_validators_by_speed_then_id() {
        let params = reference_params();
        let pool = vec![
            ValidatorProfile::new(1, 10.0, 0.01),
            ValidatorProfile::new(2, 50.0, 0.01),
            ValidatorProfile::new(3, 20.0, 0.01),
        ];
        let ranked = order_validators(&pool, &params);
        let ids: Vec<u32> = ranked.iter().map(|v| v.id).collect();
        assert_eq!(ids, vec![2, 3, 1]);

        let equal = vec![
            ValidatorProfile::new(9, 10.0, 0.01),
            ValidatorProfile::new(4, 10.0, 0.01),
        ];
        let ranked = order_validators(&equal, &params);
        let ids: Vec<u32> = ranked.iter().map(|v| v.id).collect();
        assert_eq!(ids, vec![4, 9]);
    }

    fn seeded_pool(count: usize, seed: u64) -> Vec<ValidatorProfile> {
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

    #[test]
    fn bco_degenerate_range_runs_one_iteration() {
        let mut params = reference_params();
        params.min_validators = 20;
        params.max_validators = 21;
        let pool = seeded_pool(21, 7);
        let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
        let outcome = bco(&params, &MetricWeights::balanced(), &pool, &bounds).unwrap();
        assert_eq!(outcome.iterations, 1);
        assert!(outcome.iterations <= params.max_validators);
    }

    #[test]
    fn bco_matches_exhaustive_on_reference_grid() {
        let params = reference_params();
        let pool = seeded_pool(21, 7);
        let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
        let w = MetricWeights::balanced();
        let greedy = bco(&params, &w, &pool, &bounds).unwrap();
        let oracle = exhaustive_search(&params, &w, &pool, &bounds).unwrap();
        assert_eq!(oracle.evaluations, 420);
        assert!(greedy.iterations <= params.max_validators);
        let rel = (greedy.config.utility - oracle.config.utility).abs()
            / oracle.config.utility.abs();
        assert!(rel <= 1e-12, "relative utility gap {rel}");
    }

    #[test]
    fn exhaustive_single_candidate() {
        let mut params = reference_params();
        params.min_validators = 3;
        params.max_validators = 3;
        params.min_block_txs = 7;
        params.max_block_txs = 7;
        let pool = seeded_pool(4, 9);
        let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
        let out = exhaustive_search(&params, &MetricWeights::balanced(), &pool, &bounds).unwrap();
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.config.validators, 3);
        assert_eq!(out.config.block_txs, 7);
    }

    #[test]
    fn exhaustive_result_beats_every_grid_point() {
        let mut params = reference_params();
        params.max_validators = 8;
        params.max_block_txs = 10;
        let pool = seeded_pool(8, 3);
        let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
        let w = MetricWeights::new(0.5, 0.2, 0.3).unwrap();
        let out = exhaustive_search(&params, &w, &pool, &bounds).unwrap();
        for point in &out.trace {
            assert!(out.config.utility <= point.utility + 1e-15);
        }
    }

    #[test]
    fn bco_requires_min_plus_one_validators() {
        let params = reference_params();
        let pool = seeded_pool(1, 5);
        let bounds = NormalizationBounds::unit();
        assert!(matches!(
            bco(&params, &MetricWeights::balanced(), &pool, &bounds),
            Err(Error::Infeasible(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metric_monotonicity(
            seed in 0u64..1_000_000,
            m in 1usize..8,
            n in 1u32..200,
        ) {
            let mut params = reference_params();
            params.max_validators = 10;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            params.broadcast_coeff = rng.random_range(1e-8..1e-4);
            let pool = seeded_pool(10, seed);
            let ranked = order_validators(&pool, &params);

            let l = latency(&params, &ranked[..m], n).unwrap();
            let l_n = latency(&params, &ranked[..m], n + 1).unwrap();
            prop_assert!(l_n > l);
            let l_m = latency(&params, &ranked[..m + 1], n).unwrap();
            prop_assert!(l_m > l); // strict because broadcast_coeff > 0

            let c = cost(&ranked[..m], n).unwrap();
            prop_assert!(cost(&ranked[..m], n + 1).unwrap() < c);
            prop_assert!(cost(&ranked[..m + 1], n).unwrap() >= c);

            prop_assert!(security(&params, m + 1) > security(&params, m));
        }

        #[test]
        fn bco_config_respects_constraints(seed in 0u64..100_000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut params = reference_params();
            params.min_validators = rng.random_range(1..4);
            params.max_validators = rng.random_range(params.min_validators + 1..12);
            params.min_block_txs = rng.random_range(1..5);
            params.max_block_txs = rng.random_range(params.min_block_txs..40);
            let pool = seeded_pool(params.max_validators + 2, seed ^ 0xABCD);
            let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
            let alpha = rng.random_range(0.05..0.9);
            let beta = rng.random_range(0.05..(1.0 - alpha));
            let w = MetricWeights::new(alpha, beta, 1.0 - alpha - beta).unwrap();

            let out = bco(&params, &w, &pool, &bounds).unwrap();
            prop_assert!(out.config.validators >= params.min_validators);
            prop_assert!(out.config.validators <= params.max_validators);
            prop_assert!(out.config.block_txs >= params.min_block_txs);
            prop_assert!(out.config.block_txs <= params.max_block_txs);
            prop_assert_eq!(out.config.selected_ids.len(), out.config.validators);
            prop_assert!(out.iterations <= params.max_validators);
            for id in &out.config.selected_ids {
                prop_assert!(pool.iter().any(|v| v.id == *id));
            }
        }

        #[test]
        fn bco_equals_oracle_when_unimodal(seed in 0u64..100_000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut params = reference_params();
            params.max_validators = rng.random_range(4..12);
            params.max_block_txs = rng.random_range(5..40);
            params.broadcast_coeff = rng.random_range(1e-7..1e-4);
            let pool = seeded_pool(params.max_validators, seed ^ 0x5EED);
            let bounds = NormalizationBounds::attainable_max(&params, &pool).unwrap();
            let alpha = rng.random_range(0.05..0.9);
            let beta = rng.random_range(0.05..(1.0 - alpha));
            let w = MetricWeights::new(alpha, beta, 1.0 - alpha - beta).unwrap();

            let greedy = bco(&params, &w, &pool, &bounds).unwrap();
            let oracle = exhaustive_search(&params, &w, &pool, &bounds).unwrap();

            // per-count utilities along the greedy path (closed-form n)
            let ranked = order_validators(&pool, &params);
            let series: Vec<f64> = (params.min_validators
                ..=params.max_validators.min(ranked.len()))
                .map(|m| evaluate_prefix(&params, &w, &bounds, &ranked, m).unwrap().utility)
                .collect();
            let mut rises = 0;
            let mut unimodal = true;
            for pair in series.windows(2) {
                if pair[1] > pair[0] {
                    rises += 1;
                } else if rises > 0 {
                    unimodal = false; // fell again after rising
                }
            }
            // the greedy stop rule is exact only when the per-count series is
            // unimodal AND rounding hits the per-count integer optimum; assert
            // the always-true bound, the conditional equality, and log the
            // measured gap for everything else
            prop_assert!(greedy.config.utility >= oracle.config.utility - 1e-15);
            let best_m = oracle.config.validators;
            let series_at_best_m = evaluate_prefix(&params, &w, &bounds, &ranked, best_m).unwrap();
            let rounding_agrees = series_at_best_m.block_txs == oracle.config.block_txs;
            let rel = (greedy.config.utility - oracle.config.utility).abs()
                / oracle.config.utility.abs().max(1e-300);
            if unimodal && rounding_agrees {
                prop_assert!(rel <= 1e-12, "greedy gap {rel:.3e} on a unimodal instance");
            } else if rel > 1e-12 {
                eprintln!(
                    "greedy gap {rel:.3e} on a non-unimodal or rounding-mismatch instance (seed {seed})"
                );
            }
        }
    }
}
