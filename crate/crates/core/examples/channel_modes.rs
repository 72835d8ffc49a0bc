//! Bind one channel in each mode against the same validator pool and
//! compare the resulting latency, security, and cost.
//!
//! Run with: cargo run --example channel_modes

use edgeledger::channels::{bind_channel_config, ChannelMode, ChannelSpec, FixedConfig};
use edgeledger::optimizer::MetricWeights;
use edgeledger::scenario::resolve_scenario;

fn main() -> edgeledger::Result<()> {
    let scenario = resolve_scenario("paper_default")?;
    let validators = scenario.validator_profiles();
    let bounds = scenario.normalization_bounds()?;
    let weights = MetricWeights::balanced();

    let specs = [
        (ChannelMode::Restricted, None),
        (ChannelMode::FullyRestricted, None),
        (ChannelMode::Optimized, None),
        (
            ChannelMode::Fixed,
            Some(FixedConfig {
                validators: 8,
                block_txs: 80,
            }),
        ),
    ];

    println!("mode              m   n   latency    security   cost/tx");
    for (i, (mode, fixed)) in specs.into_iter().enumerate() {
        let channel = bind_channel_config(
            &ChannelSpec {
                id: i as u32 + 1,
                mode,
                weights,
                fixed,
                validator_ids: None,
            },
            &scenario.chain,
            &validators,
            &bounds,
        )?;
        let c = &channel.config;
        println!(
            "{:<16} {:>2} {:>3} {:>9.4} {:>10.0} {:>9.4}",
            mode.as_str(),
            c.validators,
            c.block_txs,
            c.latency,
            c.security,
            c.cost
        );
    }
    println!("\nrestricted trades security for the lowest verification latency;");
    println!("fully restricted does the opposite; optimized balances the weights.");
    Ok(())
}
