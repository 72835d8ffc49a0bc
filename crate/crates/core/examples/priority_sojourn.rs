//! Closed-form sojourn times for 21 entities at 2 tx/s under the equal and
//! preemptive-resume priority disciplines, across three service rates.
//!
//! Run with: cargo run --example priority_sojourn

use edgeledger::queueing::{
    assign_priorities, grouped_entities, sojourn_equal, sojourn_priority, QueueSystem,
};

fn main() -> edgeledger::Result<()> {
    let entities = grouped_entities(2.0);
    let order = assign_priorities(&entities)?;

    for mu in [45.0, 50.0, 60.0] {
        let system = QueueSystem::new(entities.clone(), mu)?;
        let equal = sojourn_equal(&system)?.entries[0].sojourn;
        let priority = sojourn_priority(&system, &order)?;

        println!("service rate {mu} tx/s (equal-priority sojourn {equal:.4} s):");
        println!("  rank entity urgency     sojourn   vs equal");
        for entry in &priority.entries {
            let e = system.entities().iter().find(|e| e.id == entry.entity_id).unwrap();
            let cmp = if entry.sojourn < equal { "better" } else { "worse" };
            println!(
                "  {:>4} {:>6} {:<10} {:>9.4} s {:>8}",
                entry.rank,
                entry.entity_id,
                e.urgency.as_str(),
                entry.sojourn,
                cmp
            );
        }
        println!();
    }
    Ok(())
}
