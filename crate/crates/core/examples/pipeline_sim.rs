//! Full pipeline simulation on the bundled reference scenario: arrivals,
//! priority service, channel allocation, block formation, verification
//! delay, commit. Runs the same seed with and without priority assignment
//! and compares per-channel end-to-end latency.
//!
//! Run with: cargo run --release --example pipeline_sim

use edgeledger::des::run_pipeline_sim;
use edgeledger::queueing::DisciplineKind;
use edgeledger::scenario::resolve_scenario;

fn main() -> edgeledger::Result<()> {
    let scenario = resolve_scenario("paper_default")?;
    let input = scenario.pipeline_input()?;
    let cfg = scenario.sim_config();

    println!("channels:");
    for c in &input.channels {
        println!(
            "  {} ({}): m={} n={} verification latency {:.3} s",
            c.id,
            c.mode.as_str(),
            c.config.validators,
            c.config.block_txs,
            c.config.latency
        );
    }

    let with = run_pipeline_sim(&input, DisciplineKind::UrgencyPriority, &cfg)?;
    let without = run_pipeline_sim(&input, DisciplineKind::EqualPriority, &cfg)?;

    println!(
        "\ncommitted {} transactions over {} blocks (priority) / {} blocks (equal), seed {}",
        with.report.served, with.blocks_formed, without.blocks_formed, cfg.seed
    );
    println!("\nper-channel mean end-to-end latency (creation to commit):");
    println!("  channel   with priority   without   transactions");
    for (w, wo) in with.report.channels.iter().zip(without.report.channels.iter()) {
        println!(
            "  {:>7} {:>15.4} {:>9.4} {:>14}",
            w.channel_id, w.mean, wo.mean, w.count
        );
    }

    let mean_of = |report: &edgeledger::des::SimReport, ids: std::ops::RangeInclusive<u32>| {
        let xs: Vec<f64> = report
            .entities
            .iter()
            .filter(|e| ids.contains(&e.entity_id))
            .map(|e| e.mean)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    println!("\nurgent entities (1-8) mean sojourn:");
    println!(
        "  with priority {:.4} s, without {:.4} s",
        mean_of(&with.report, 1..=8),
        mean_of(&without.report, 1..=8)
    );
    Ok(())
}
