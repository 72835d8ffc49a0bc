//! Extract the six per-window statistics from a synthetic signal window and
//! combine them into the per-channel change statistic.
//!
//! Run with: cargo run --example extract_features

use edgeledger::monitor::{delta, extract_features, Session, SignalWindow};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> edgeledger::Result<()> {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    let normal = Normal::new(40.0, 5.0).expect("valid parameters");
    let samples: Vec<f64> = (0..1920).map(|_| normal.sample(&mut rng)).collect();

    let window = SignalWindow::new("p01", 3, Session::Before, samples)?;
    let fv = extract_features(&window);

    println!("window: patient {} channel {} ({} samples)", window.patient_id(), window.channel_id(), window.len());
    println!("  mean     = {:>10.4} uV", fv.mean);
    println!("  variance = {:>10.4} uV^2", fv.variance);
    println!("  rms      = {:>10.4} uV", fv.rms);
    println!("  kurtosis = {:>10.4}", fv.kurtosis);
    println!("  min      = {:>10.4} uV", fv.min);
    println!("  max      = {:>10.4} uV", fv.max);
    println!("  delta    = {:>10.4}  (plain sum of the six)", delta(&fv));

    // a flat-lined channel is flagged instead of crashing on 0/0 kurtosis
    let flat = SignalWindow::new("p01", 4, Session::Before, vec![2.0; 64])?;
    let flat_fv = extract_features(&flat);
    println!(
        "flat-lined channel: variance = {}, kurtosis reported as {} (degenerate = {})",
        flat_fv.variance, flat_fv.kurtosis, flat_fv.degenerate
    );
    Ok(())
}
