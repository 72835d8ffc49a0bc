//! Greedy ledger configuration search versus the exhaustive oracle on the
//! bundled reference scenario, with the per-iteration utility trace.
//!
//! Run with: cargo run --example optimize_chain

use edgeledger::optimizer::{bco, exhaustive_search};
use edgeledger::scenario::resolve_scenario;

fn main() -> edgeledger::Result<()> {
    let scenario = resolve_scenario("paper_default")?;
    let validators = scenario.validator_profiles();
    let bounds = scenario.normalization_bounds()?;

    let greedy = bco(&scenario.chain, &scenario.optimizer, &validators, &bounds)?;
    let oracle = exhaustive_search(&scenario.chain, &scenario.optimizer, &validators, &bounds)?;

    println!("greedy walk over the ranked validator list:");
    println!("  step  m   n   latency    security   cost      utility");
    for (i, p) in greedy.trace.iter().enumerate() {
        println!(
            "  {:>4} {:>2} {:>3} {:>9.4} {:>10.0} {:>9.4} {:>9.6}",
            i, p.validators, p.block_txs, p.latency, p.security, p.cost, p.utility
        );
    }
    println!(
        "\ngreedy:     m={} n={} utility={:.12} after {} gain tests",
        greedy.config.validators, greedy.config.block_txs, greedy.config.utility, greedy.iterations
    );
    println!(
        "exhaustive: m={} n={} utility={:.12} after {} grid points",
        oracle.config.validators, oracle.config.block_txs, oracle.config.utility, oracle.evaluations
    );
    println!(
        "utility gap: {:e}",
        (greedy.config.utility - oracle.config.utility).abs()
    );
    Ok(())
}
