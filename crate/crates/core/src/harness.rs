//! Command implementations behind the CLI: each takes validated inputs,
//! writes CSV files with stable headers and full round-trip float
//! precision, and returns a human-readable summary whose last line carries
//! the headline result.
//!
//! Output schemas (column order is part of the contract):
//!
//! - `features.csv`: patient,channel,session,window_index,mean,variance,rms,kurtosis,min,max,degenerate
//! - `deltas.csv`: patient,channel,delta_before,delta_during,delta_after
//! - `kappa.csv`: patient,channel,kappa
//! - `status.csv`: patient,status,exceed_count,offending_channels,payload,feature_count,raw_window_count
//! - `sojourn.csv`: mu_label,mu,entity,rank,urgency,arrival_rate,sojourn_priority,sojourn_equal
//! - `bco_trace.csv` / `exhaustive_trace.csv`: iteration,validators,block_txs,latency,security,cost,utility
//! - `channels.csv`: channel,mode,iteration,validators,block_txs,latency,security,cost,utility
//! - `entity_sojourn.csv`: discipline,entity,count,mean,ci_half_width
//! - `channel_latency.csv`: discipline,channel,count,mean,min,max
//! - `dispatch.csv`: discipline,tx,entity,channel,created_at,enqueued_at,committed_at

use std::fmt::Write as _;
use std::path::Path;

use crate::cohort::{
    analyze_cohort, generate_synthetic_cohort, ingest_signals, write_signals_csv, SynthParams,
};
use crate::des::{run_pipeline_sim, QueueDiscipline};
use crate::error::Result;
use crate::monitor::SharePayload;
use crate::optimizer::{bco, exhaustive_search, EvalPoint, OptimizeOutcome};
use crate::queueing::{assign_priorities, sojourn_equal, sojourn_priority, DisciplineKind};
use crate::scenario::Scenario;
use crate::{channels::ChannelMode, des::run_queue_sim};

fn fnum(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// Per-window features of a signal file.
pub fn run_features(signals: &Path, window_len: usize, out_dir: &Path) -> Result<String> {
    let ingested = ingest_signals(signals, window_len)?;
    let mut w = writer(&out_dir.join("features.csv"))?;
    w.write_record([
        "patient",
        "channel",
        "session",
        "window_index",
        "mean",
        "variance",
        "rms",
        "kurtosis",
        "min",
        "max",
        "degenerate",
    ])?;
    let mut rows = 0u64;
    for (key, windows) in &ingested.groups {
        for (i, window) in windows.iter().enumerate() {
            let fv = crate::monitor::extract_features(window);
            w.write_record([
                key.patient_id.as_str(),
                &key.channel_id.to_string(),
                key.session.as_str(),
                &i.to_string(),
                &fnum(fv.mean),
                &fnum(fv.variance),
                &fnum(fv.rms),
                &fnum(fv.kurtosis),
                &fnum(fv.min),
                &fnum(fv.max),
                &fv.degenerate.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(format!(
        "features: {rows} windows ({} samples dropped from partial windows) -> {}",
        ingested.dropped_samples,
        out_dir.join("features.csv").display()
    ))
}

/// Full monitoring pipeline over a signal file.
pub fn run_monitor(signals: &Path, zeta: f64, window_len: usize, out_dir: &Path) -> Result<String> {
    let ingested = ingest_signals(signals, window_len)?;
    let analysis = analyze_cohort(&ingested.groups, zeta)?;

    let mut deltas = writer(&out_dir.join("deltas.csv"))?;
    deltas.write_record(["patient", "channel", "delta_before", "delta_during", "delta_after"])?;
    let mut kappa = writer(&out_dir.join("kappa.csv"))?;
    kappa.write_record(["patient", "channel", "kappa"])?;
    let mut status = writer(&out_dir.join("status.csv"))?;
    status.write_record([
        "patient",
        "status",
        "exceed_count",
        "offending_channels",
        "payload",
        "feature_count",
        "raw_window_count",
    ])?;

    let mut majors = 0u32;
    let mut minors = 0u32;
    let mut repeats = 0u32;
    for p in &analysis.patients {
        for (c, d) in p.channel_ids.iter().zip(p.session_deltas.iter()) {
            deltas.write_record([
                p.patient_id.as_str(),
                &c.to_string(),
                &fnum(d[0]),
                &fnum(d[1]),
                &fnum(d[2]),
            ])?;
        }
        for (c, k) in p.channel_ids.iter().zip(p.profile.kappa().iter()) {
            kappa.write_record([p.patient_id.as_str(), &c.to_string(), &fnum(*k)])?;
        }
        let offending = p.profile.exceeding_channels(zeta);
        let offending_str = offending
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let (feature_count, raw_count) = match &p.payload {
            SharePayload::EmergencyNotificationWithRaw { features, raw } => {
                majors += 1;
                (features.len(), raw.len())
            }
            SharePayload::FeaturesOnly { features } => {
                minors += 1;
                (features.len(), 0)
            }
            SharePayload::PhysicianRepeatNotice { .. } => {
                repeats += 1;
                (0, 0)
            }
        };
        status.write_record([
            p.patient_id.as_str(),
            p.status.as_str(),
            &offending.len().to_string(),
            &offending_str,
            p.payload.kind(),
            &feature_count.to_string(),
            &raw_count.to_string(),
        ])?;
    }
    deltas.flush()?;
    kappa.flush()?;
    status.flush()?;

    Ok(format!(
        "monitor: baseline delta_bar = {}, {} patients -> {} major / {} minor / {} repeat",
        fnum(analysis.baseline.delta_bar()),
        analysis.patients.len(),
        majors,
        minors,
        repeats
    ))
}

/// Analytic sojourn table across the scenario's service-rate sweep.
pub fn run_queue(scenario: &Scenario, out_dir: &Path) -> Result<String> {
    let order = assign_priorities(&scenario.entity_profiles())?;
    let mut w = writer(&out_dir.join("sojourn.csv"))?;
    w.write_record([
        "mu_label",
        "mu",
        "entity",
        "rank",
        "urgency",
        "arrival_rate",
        "sojourn_priority",
        "sojourn_equal",
    ])?;
    let mut lines = Vec::new();
    for (label, mu) in scenario.sweep_rates()? {
        let system = scenario.queue_system(mu)?;
        let equal = sojourn_equal(&system)?;
        let priority = sojourn_priority(&system, &order)?;
        let equal_value = equal.entries[0].sojourn;
        for entry in &priority.entries {
            let profile = system
                .entities()
                .iter()
                .find(|e| e.id == entry.entity_id)
                .expect("entry ids come from the system");
            w.write_record([
                label.as_str(),
                &fnum(mu),
                &entry.entity_id.to_string(),
                &entry.rank.to_string(),
                profile.urgency.as_str(),
                &fnum(profile.arrival_rate),
                &fnum(entry.sojourn),
                &fnum(equal_value),
            ])?;
        }
        lines.push(format!(
            "mu = {} ({label}): equal sojourn {}, rank-1 {}, rank-{} {}",
            fnum(mu),
            fnum(equal_value),
            fnum(priority.entries[0].sojourn),
            priority.entries.len(),
            fnum(priority.entries.last().expect("non-empty").sojourn),
        ));
    }
    w.flush()?;
    Ok(format!("queue: wrote {}\n{}", out_dir.join("sojourn.csv").display(), lines.join("\n")))
}

fn write_trace(path: &Path, trace: &[EvalPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "iteration",
        "validators",
        "block_txs",
        "latency",
        "security",
        "cost",
        "utility",
    ])?;
    for (i, p) in trace.iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.validators.to_string(),
            p.block_txs.to_string(),
            fnum(p.latency),
            fnum(p.security),
            fnum(p.cost),
            fnum(p.utility),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Greedy configuration search against the exhaustive oracle.
pub fn run_optimize(scenario: &Scenario, out_dir: &Path) -> Result<String> {
    let validators = scenario.validator_profiles();
    let bounds = scenario.normalization_bounds()?;
    let greedy = bco(&scenario.chain, &scenario.optimizer, &validators, &bounds)?;
    let oracle = exhaustive_search(&scenario.chain, &scenario.optimizer, &validators, &bounds)?;
    write_trace(&out_dir.join("bco_trace.csv"), &greedy.trace)?;
    write_trace(&out_dir.join("exhaustive_trace.csv"), &oracle.trace)?;
    Ok(format!(
        "optimize: traces -> {}\nbco m={} n={} U={} iterations={} | exhaustive m={} n={} U={} evaluations={}",
        out_dir.display(),
        greedy.config.validators,
        greedy.config.block_txs,
        fnum(greedy.config.utility),
        greedy.iterations,
        oracle.config.validators,
        oracle.config.block_txs,
        fnum(oracle.config.utility),
        oracle.evaluations,
    ))
}

/// Per-channel configuration traces.
pub fn run_channels(scenario: &Scenario, out_dir: &Path) -> Result<String> {
    let validators = scenario.validator_profiles();
    let bounds = scenario.normalization_bounds()?;
    let bound = scenario.bound_channels()?;

    let mut w = writer(&out_dir.join("channels.csv"))?;
    w.write_record([
        "channel",
        "mode",
        "iteration",
        "validators",
        "block_txs",
        "latency",
        "security",
        "cost",
        "utility",
    ])?;
    let mut lines = Vec::new();
    for (settings, channel) in scenario.channels.iter().zip(bound.iter()) {
        let trace: Vec<EvalPoint> = match settings.mode {
            ChannelMode::Optimized => {
                let OptimizeOutcome { trace, .. } =
                    bco(&scenario.chain, &settings.weights, &validators, &bounds)?;
                trace
            }
            _ => vec![EvalPoint {
                validators: channel.config.validators,
                block_txs: channel.config.block_txs,
                latency: channel.config.latency,
                security: channel.config.security,
                cost: channel.config.cost,
                utility: channel.config.utility,
            }],
        };
        for (i, p) in trace.iter().enumerate() {
            w.write_record([
                channel.id.to_string(),
                channel.mode.as_str().to_string(),
                i.to_string(),
                p.validators.to_string(),
                p.block_txs.to_string(),
                fnum(p.latency),
                fnum(p.security),
                fnum(p.cost),
                fnum(p.utility),
            ])?;
        }
        lines.push(format!(
            "channel {} ({}): m={} n={} L={} eta={} C={}",
            channel.id,
            channel.mode.as_str(),
            channel.config.validators,
            channel.config.block_txs,
            fnum(channel.config.latency),
            fnum(channel.config.security),
            fnum(channel.config.cost),
        ));
    }
    w.flush()?;
    Ok(format!(
        "channels: wrote {}\n{}",
        out_dir.join("channels.csv").display(),
        lines.join("\n")
    ))
}

/// Pipeline simulation under both disciplines with the same seed, plus the
/// closed-form queue oracle check data.
pub fn run_simulate(scenario: &Scenario, seed_override: Option<u64>, out_dir: &Path) -> Result<String> {
    let input = scenario.pipeline_input()?;
    let mut cfg = scenario.sim_config();
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }

    let mut entity_w = writer(&out_dir.join("entity_sojourn.csv"))?;
    entity_w.write_record(["discipline", "entity", "count", "mean", "ci_half_width"])?;
    let mut channel_w = writer(&out_dir.join("channel_latency.csv"))?;
    channel_w.write_record(["discipline", "channel", "count", "mean", "min", "max"])?;
    let mut dispatch_w = writer(&out_dir.join("dispatch.csv"))?;
    dispatch_w.write_record([
        "discipline",
        "tx",
        "entity",
        "channel",
        "created_at",
        "enqueued_at",
        "committed_at",
    ])?;

    let mut summary = String::new();
    for discipline in [DisciplineKind::UrgencyPriority, DisciplineKind::EqualPriority] {
        let outcome = run_pipeline_sim(&input, discipline, &cfg)?;
        let name = discipline.as_str();
        for e in &outcome.report.entities {
            entity_w.write_record([
                name.to_string(),
                e.entity_id.to_string(),
                e.count.to_string(),
                fnum(e.mean),
                fnum(e.ci_half_width),
            ])?;
        }
        for c in &outcome.report.channels {
            channel_w.write_record([
                name.to_string(),
                c.channel_id.to_string(),
                c.count.to_string(),
                fnum(c.mean),
                fnum(c.min),
                fnum(c.max),
            ])?;
        }
        for r in &outcome.dispatch {
            dispatch_w.write_record([
                name.to_string(),
                r.tx_id.to_string(),
                r.entity_id.to_string(),
                r.channel_id.to_string(),
                fnum(r.created_at),
                fnum(r.enqueued_at),
                r.committed_at.map(fnum).unwrap_or_default(),
            ])?;
        }
        let _ = writeln!(
            summary,
            "simulate [{name}]: {} committed over {} blocks (seed {})",
            outcome.report.served, outcome.blocks_formed, cfg.seed
        );
    }
    entity_w.flush()?;
    channel_w.flush()?;
    dispatch_w.flush()?;

    // side-by-side closed-form vs simulated sojourn for the base rate
    let system = scenario.queue_system(scenario.queue.service_rate)?;
    let order = assign_priorities(system.entities())?;
    let analytic = sojourn_priority(&system, &order)?;
    let sim = run_queue_sim(&system, QueueDiscipline::Priority(&order), &cfg)?;
    let mut oracle_w = writer(&out_dir.join("queue_oracle.csv"))?;
    oracle_w.write_record(["entity", "rank", "analytic", "simulated", "rel_err"])?;
    for entry in &analytic.entries {
        let empirical = sim
            .entities
            .iter()
            .find(|e| e.entity_id == entry.entity_id)
            .expect("same entity set");
        let rel = (empirical.mean - entry.sojourn).abs() / entry.sojourn;
        oracle_w.write_record([
            entry.entity_id.to_string(),
            entry.rank.to_string(),
            fnum(entry.sojourn),
            fnum(empirical.mean),
            fnum(rel),
        ])?;
    }
    oracle_w.flush()?;

    summary.push_str(&format!("simulate: outputs -> {}", out_dir.display()));
    Ok(summary)
}

/// Synthetic cohort CSV.
pub fn run_synth(params: &SynthParams, out_file: &Path) -> Result<String> {
    let records = generate_synthetic_cohort(params)?;
    if let Some(parent) = out_file.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(out_file)?;
    write_signals_csv(&records, file)?;
    Ok(format!(
        "synth: {} records ({} patients x {} channels x 3 sessions x {} samples) -> {}",
        records.len(),
        params.patients,
        params.channels,
        params.window_len,
        out_file.display()
    ))
}
