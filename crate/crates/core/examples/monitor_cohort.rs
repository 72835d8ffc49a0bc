//! End-to-end monitoring pipeline on a synthetic cohort: generate signals,
//! window them, build the cohort baseline, classify every patient, and show
//! what each one would share on the ledger.
//!
//! Run with: cargo run --example monitor_cohort

use edgeledger::cohort::{analyze_synthetic, SynthParams};
use edgeledger::monitor::SharePayload;

fn main() -> edgeledger::Result<()> {
    // one injected-change channel per patient: the classifier should ask
    // for repeated measurements rather than raise an emergency
    let params = SynthParams {
        patients: 6,
        channels: 14,
        window_len: 256,
        injected_channels: 1,
        seed: 2024,
        ..SynthParams::default()
    };
    let zeta = 30.0;
    let analysis = analyze_synthetic(&params, zeta)?;

    println!(
        "cohort of {} patients, baseline delta_bar = {:.3}",
        analysis.patients.len(),
        analysis.baseline.delta_bar()
    );
    for p in &analysis.patients {
        let exceeding = p.profile.exceeding_channels(zeta);
        print!(
            "  {}: status {:>6}, channels over threshold: {:?}",
            p.patient_id,
            p.status.as_str(),
            exceeding
        );
        match &p.payload {
            SharePayload::EmergencyNotificationWithRaw { raw, features } => {
                println!(" -> emergency: sharing {} raw windows + {} feature rows", raw.len(), features.len())
            }
            SharePayload::FeaturesOnly { features } => {
                println!(" -> sharing {} feature rows only", features.len())
            }
            SharePayload::PhysicianRepeatNotice { channels } => {
                println!(" -> asking the physician to repeat channels {channels:?}")
            }
        }
    }
    Ok(())
}
