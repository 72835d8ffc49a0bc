//! Validate the closed-form sojourn formulas against the discrete-event
//! simulator: a randomized stable system, one million served transactions,
//! per-entity relative errors.
//!
//! Run with: cargo run --release --example queue_validation

use edgeledger::des::{run_queue_sim, Horizon, QueueDiscipline, SimConfig};
use edgeledger::queueing::{
    assign_priorities, sojourn_equal, sojourn_priority, EntityProfile, QueueSystem, Urgency,
};

fn main() -> edgeledger::Result<()> {
    let entities = vec![
        EntityProfile { id: 1, arrival_rate: 1.2, urgency: Urgency::Urgent, weight: 1.0 },
        EntityProfile { id: 2, arrival_rate: 0.8, urgency: Urgency::Urgent, weight: 0.5 },
        EntityProfile { id: 3, arrival_rate: 1.5, urgency: Urgency::Normal, weight: 1.0 },
        EntityProfile { id: 4, arrival_rate: 0.9, urgency: Urgency::NonUrgent, weight: 1.0 },
        EntityProfile { id: 5, arrival_rate: 1.1, urgency: Urgency::NonUrgent, weight: 0.2 },
    ];
    let system = QueueSystem::new(entities, 8.0)?;
    let order = assign_priorities(system.entities())?;
    let cfg = SimConfig {
        seed: 99,
        horizon: Horizon::Events(1_000_000),
        warmup_fraction: 0.1,
    };

    let analytic = sojourn_priority(&system, &order)?;
    let simulated = run_queue_sim(&system, QueueDiscipline::Priority(&order), &cfg)?;
    println!("preemptive-resume priority, 10^6 served transactions:");
    println!("  entity  analytic   simulated   rel err   95% ci");
    for entry in &analytic.entries {
        let emp = simulated
            .entities
            .iter()
            .find(|e| e.entity_id == entry.entity_id)
            .unwrap();
        println!(
            "  {:>6} {:>9.5} {:>11.5} {:>8.3}% {:>9.5}",
            entry.entity_id,
            entry.sojourn,
            emp.mean,
            100.0 * (emp.mean - entry.sojourn).abs() / entry.sojourn,
            emp.ci_half_width,
        );
    }

    let eq_value = sojourn_equal(&system)?.entries[0].sojourn;
    let fifo = run_queue_sim(&system, QueueDiscipline::Equal, &cfg)?;
    println!("\nequal priority (analytic {eq_value:.5} s for everyone):");
    for e in &fifo.entities {
        println!(
            "  entity {}: simulated {:.5} ({:.3}% off)",
            e.entity_id,
            e.mean,
            100.0 * (e.mean - eq_value).abs() / eq_value
        );
    }
    Ok(())
}
