//! Signal-record ingestion, windowing, synthetic cohort generation, and the
//! cohort-level monitoring pipeline (features, deltas, baseline,
//! classification, share decisions).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand_distr::{Distribution, Normal};

use crate::des::synth_rng;
use crate::error::{Error, Result};
use crate::monitor::{
    change_profile, classify, cohort_baseline, delta, extract_features, share_decision,
    ChangeProfile, CohortBaseline, FeatureVector, PatientStatus, Session, SharePayload,
    SignalWindow,
};

/// Expected header of a signal CSV, in order.
pub const SIGNALS_HEADER: [&str; 5] = ["patient", "channel", "session", "sample_index", "value"];

/// One row of a signal CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub patient_id: String,
    pub channel_id: u32,
    pub session: Session,
    pub sample_index: u64,
    pub value: f64,
}

/// Windows grouped by (patient, channel, session).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub patient_id: String,
    pub channel_id: u32,
    pub session: Session,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub groups: BTreeMap<GroupKey, Vec<SignalWindow>>,
    /// Samples dropped from trailing partial windows.
    pub dropped_samples: u64,
    pub window_len: usize,
}

/// Reads a signal CSV from a file and windows it.
pub fn ingest_signals(path: &Path, window_len: usize) -> Result<IngestOutcome> {
    let file = std::fs::File::open(path)?;
    ingest_signals_from(file, window_len)
}

/// Reads a signal CSV from any reader and windows it. Rows may arrive in
/// any order; per group the sample indices must be unique and contiguous
/// from zero. Trailing samples that do not fill a window are dropped and
/// counted.
pub fn ingest_signals_from(reader: impl Read, window_len: usize) -> Result<IngestOutcome> {
    if window_len < 2 {
        return Err(Error::InvalidInput(format!(
            "window length must be at least 2, got {window_len}"
        )));
    }
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = csv_reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != SIGNALS_HEADER {
            return Err(Error::Parse {
                location: "header".into(),
                message: format!("expected columns {SIGNALS_HEADER:?}, got {got:?}"),
            });
        }
    }

    // value and blame row per (group, sample index)
    let mut samples: BTreeMap<GroupKey, BTreeMap<u64, (f64, u64)>> = BTreeMap::new();
    for (i, row) in csv_reader.records().enumerate() {
        let row_no = i as u64 + 2; // header is line 1
        let record = row.map_err(|e| Error::Parse {
            location: format!("row {row_no}"),
            message: e.to_string(),
        })?;
        if record.len() != SIGNALS_HEADER.len() {
            return Err(Error::Parse {
                location: format!("row {row_no}"),
                message: format!("expected {} fields, got {}", SIGNALS_HEADER.len(), record.len()),
            });
        }
        let parse_err = |field: &str, value: &str| Error::Parse {
            location: format!("row {row_no}"),
            message: format!("cannot parse {field} from `{value}`"),
        };
        let patient_id = record[0].to_string();
        let channel_id: u32 = record[1].parse().map_err(|_| parse_err("channel", &record[1]))?;
        let session = Session::parse(&record[2]).ok_or_else(|| Error::Parse {
            location: format!("row {row_no}"),
            message: format!(
                "unknown session `{}` (expected before, during, or after)",
                &record[2]
            ),
        })?;
        let sample_index: u64 = record[3]
            .parse()
            .map_err(|_| parse_err("sample_index", &record[3]))?;
        let value: f64 = record[4].parse().map_err(|_| parse_err("value", &record[4]))?;

        let key = GroupKey {
            patient_id,
            channel_id,
            session,
        };
        let group = samples.entry(key).or_default();
        if group.insert(sample_index, (value, row_no)).is_some() {
            return Err(Error::Parse {
                location: format!("row {row_no}"),
                message: format!("duplicate sample_index {sample_index} in its group"),
            });
        }
    }

    let mut groups: BTreeMap<GroupKey, Vec<SignalWindow>> = BTreeMap::new();
    let mut dropped: u64 = 0;
    for (key, indexed) in samples {
        let mut values = Vec::with_capacity(indexed.len());
        for (expected, (idx, (value, row_no))) in indexed.iter().enumerate() {
            if *idx != expected as u64 {
                return Err(Error::Parse {
                    location: format!("row {row_no}"),
                    message: format!(
                        "non-contiguous sample_index {idx} (expected {expected}) for patient {} channel {} session {}",
                        key.patient_id, key.channel_id, key.session.as_str()
                    ),
                });
            }
            values.push(*value);
        }
        let full_windows = values.len() / window_len;
        dropped += (values.len() - full_windows * window_len) as u64;
        let mut windows = Vec::with_capacity(full_windows);
        for w in 0..full_windows {
            windows.push(SignalWindow::new(
                key.patient_id.clone(),
                key.channel_id,
                key.session,
                values[w * window_len..(w + 1) * window_len].to_vec(),
            )?);
        }
        groups.insert(key, windows);
    }

    Ok(IngestOutcome {
        groups,
        dropped_samples: dropped,
        window_len,
    })
}

/// Parameters of the synthetic cohort generator that stands in for a real
/// recording campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub patients: usize,
    pub channels: usize,
    pub window_len: usize,
    /// Channels per patient whose during/after sessions are shifted.
    pub injected_channels: usize,
    /// Mean shift applied to injected channels (microvolts); sized so the
    /// change indicator clears any sensible threshold by construction.
    pub offset: f64,
    pub seed: u64,
    pub base_mean: f64,
    pub base_sd: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            patients: 30,
            channels: 14,
            window_len: 1920,
            injected_channels: 0,
            offset: 80.0,
            seed: 1,
            base_mean: 40.0,
            base_sd: 5.0,
        }
    }
}

/// Deterministic synthetic cohort: Gaussian baseline signals, with the
/// during and after sessions of `injected_channels` randomly chosen
/// channels (per patient) shifted by `offset`. Each (patient, channel,
/// session) series draws from its own random stream, so records never
/// depend on generation order.
pub fn generate_synthetic_cohort(params: &SynthParams) -> Result<Vec<SignalRecord>> {
    if params.injected_channels > params.channels {
        return Err(Error::InvalidInput(format!(
            "cannot inject {} of {} channels",
            params.injected_channels, params.channels
        )));
    }
    if params.window_len < 2 || params.patients == 0 || params.channels == 0 {
        return Err(Error::InvalidInput(
            "need window length >= 2 and at least one patient and channel".into(),
        ));
    }
    if !(params.base_sd.is_finite() && params.base_sd > 0.0) || !params.offset.is_finite() {
        return Err(Error::InvalidInput(
            "base_sd must be positive and offset finite".into(),
        ));
    }

    let width = params.patients.to_string().len();
    let mut records =
        Vec::with_capacity(params.patients * params.channels * 3 * params.window_len);
    for p in 1..=params.patients {
        // choose which channels carry the injected change for this patient
        let mut pick_rng = synth_rng(params.seed, p as u64);
        let mut channels: Vec<u32> = (1..=params.channels as u32).collect();
        let mut injected = Vec::with_capacity(params.injected_channels);
        for _ in 0..params.injected_channels {
            use rand::Rng;
            let i = pick_rng.random_range(0..channels.len());
            injected.push(channels.swap_remove(i));
        }

        let patient_id = format!("p{p:0width$}");
        for c in 1..=params.channels as u32 {
            for session in Session::ALL {
                let shift = if injected.contains(&c) && session != Session::Before {
                    params.offset
                } else {
                    0.0
                };
                let normal = Normal::new(params.base_mean + shift, params.base_sd)
                    .expect("sd validated positive");
                let stream_id = (p as u64) << 32 | (c as u64) << 8 | session.index() as u64;
                let mut rng = synth_rng(params.seed ^ 0x5159_CA11, stream_id);
                for k in 0..params.window_len as u64 {
                    records.push(SignalRecord {
                        patient_id: patient_id.clone(),
                        channel_id: c,
                        session,
                        sample_index: k,
                        value: normal.sample(&mut rng),
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Writes signal records as CSV with the canonical header.
pub fn write_signals_csv(records: &[SignalRecord], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SIGNALS_HEADER)?;
    for r in records {
        w.write_record([
            r.patient_id.as_str(),
            &r.channel_id.to_string(),
            r.session.as_str(),
            &r.sample_index.to_string(),
            &format!("{}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-patient result of the cohort pipeline.
#[derive(Debug, Clone)]
pub struct PatientOutcome {
    pub patient_id: String,
    /// Channel ids in ascending order, aligned with `session_deltas` and
    /// the profile's indicator vector.
    pub channel_ids: Vec<u32>,
    /// Per channel: [before, during, after] session deltas.
    pub session_deltas: Vec<[f64; 3]>,
    pub profile: ChangeProfile,
    pub status: PatientStatus,
    pub payload: SharePayload,
}

/// Cohort-level analysis output.
#[derive(Debug, Clone)]
pub struct CohortAnalysis {
    pub baseline: CohortBaseline,
    pub patients: Vec<PatientOutcome>,
}

/// Per-window features for one group, in window order.
pub fn group_features(windows: &[SignalWindow]) -> Vec<FeatureVector> {
    windows.iter().map(extract_features).collect()
}

/// Runs the full monitoring pipeline over ingested windows.
///
/// Every patient must provide all three sessions for every channel of the
/// cohort's channel set; each session's delta is the mean of its windows'
/// deltas. The baseline is the frozen cohort mean over all per-session
/// deltas.
pub fn analyze_cohort(
    groups: &BTreeMap<GroupKey, Vec<SignalWindow>>,
    zeta: f64,
) -> Result<CohortAnalysis> {
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "classification threshold must be positive, got {zeta}"
        )));
    }

    let mut patients: Vec<String> = groups.keys().map(|k| k.patient_id.clone()).collect();
    patients.dedup();
    let mut channels: Vec<u32> = groups.keys().map(|k| k.channel_id).collect();
    channels.sort_unstable();
    channels.dedup();
    if patients.is_empty() || channels.is_empty() {
        return Err(Error::IncompleteData("no signal groups to analyze".into()));
    }

    // session deltas per (patient, channel): mean of per-window deltas
    let mut deltas: BTreeMap<(String, u32), [Option<f64>; 3]> = BTreeMap::new();
    for (key, windows) in groups {
        if windows.is_empty() {
            return Err(Error::IncompleteData(format!(
                "patient {} channel {} session {} has no complete window",
                key.patient_id,
                key.channel_id,
                key.session.as_str()
            )));
        }
        let mean_delta = windows
            .iter()
            .map(|w| delta(&extract_features(w)))
            .sum::<f64>()
            / windows.len() as f64;
        deltas
            .entry((key.patient_id.clone(), key.channel_id))
            .or_insert([None; 3])[key.session.index()] = Some(mean_delta);
    }

    let mut all_deltas = Vec::with_capacity(3 * channels.len() * patients.len());
    for p in &patients {
        for c in &channels {
            let slots = deltas.get(&(p.clone(), *c)).ok_or_else(|| {
                Error::IncompleteData(format!("patient {p} is missing channel {c}"))
            })?;
            for (s, slot) in slots.iter().enumerate() {
                let v = slot.ok_or_else(|| {
                    Error::IncompleteData(format!(
                        "patient {p} channel {c} is missing the {} session",
                        Session::ALL[s].as_str()
                    ))
                })?;
                all_deltas.push(v);
            }
        }
    }
    let baseline = cohort_baseline(&all_deltas, channels.len(), patients.len())?;

    let mut outcomes = Vec::with_capacity(patients.len());
    for p in &patients {
        let session_deltas: Vec<[f64; 3]> = channels
            .iter()
            .map(|c| {
                let slots = deltas[&(p.clone(), *c)];
                [
                    slots[0].expect("checked above"),
                    slots[1].expect("checked above"),
                    slots[2].expect("checked above"),
                ]
            })
            .collect();
        let profile = change_profile(p.clone(), &session_deltas, &baseline)?;
        let status = classify(&profile, zeta);

        let mut features = Vec::new();
        let mut raw = Vec::new();
        for c in &channels {
            for session in Session::ALL {
                let key = GroupKey {
                    patient_id: p.clone(),
                    channel_id: *c,
                    session,
                };
                if let Some(windows) = groups.get(&key) {
                    features.extend(windows.iter().map(extract_features));
                    if status == PatientStatus::Major {
                        raw.extend(windows.iter().cloned());
                    }
                }
            }
        }
        let payload = share_decision(status, &profile, zeta, features, raw);
        outcomes.push(PatientOutcome {
            patient_id: p.clone(),
            channel_ids: channels.clone(),
            session_deltas,
            profile,
            status,
            payload,
        });
    }

    Ok(CohortAnalysis {
        baseline,
        patients: outcomes,
    })
}

/// Convenience: generate, window, and analyze a synthetic cohort.
pub fn analyze_synthetic(params: &SynthParams, zeta: f64) -> Result<CohortAnalysis> {
    let records = generate_synthetic_cohort(params)?;
    let groups = group_records(&records, params.window_len)?;
    analyze_cohort(&groups, zeta)
}

/// Windows in-memory records exactly like the CSV path does.
pub fn group_records(
    records: &[SignalRecord],
    window_len: usize,
) -> Result<BTreeMap<GroupKey, Vec<SignalWindow>>> {
    if window_len < 2 {
        return Err(Error::InvalidInput(format!(
            "window length must be at least 2, got {window_len}"
        )));
    }
    let mut samples: BTreeMap<GroupKey, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in records {
        let key = GroupKey {
            patient_id: r.patient_id.clone(),
            channel_id: r.channel_id,
            session: r.session,
        };
        if samples
            .entry(key)
            .or_default()
            .insert(r.sample_index, r.value)
            .is_some()
        {
            return Err(Error::InvalidInput(format!(
                "duplicate sample_index {} for patient {} channel {} session {}",
                r.sample_index,
                r.patient_id,
                r.channel_id,
                r.session.as_str()
            )));
        }
    }
    let mut groups = BTreeMap::new();
    for (key, indexed) in samples {
        let mut values = Vec::with_capacity(indexed.len());
        for (expected, (idx, value)) in indexed.iter().enumerate() {
            if *idx != expected as u64 {
                return Err(Error::InvalidInput(format!(
                    "non-contiguous sample_index {idx} for patient {} channel {}",
                    key.patient_id, key.channel_id
                )));
            }
            values.push(*value);
        }
        let full = values.len() / window_len;
        let mut windows = Vec::with_capacity(full);
        for w in 0..full {
            windows.push(SignalWindow::new(
                key.patient_id.clone(),
                key.channel_id,
                key.session,
                values[w * window_len..(w + 1) * window_len].to_vec(),
            )?);
        }
        groups.insert(key, windows);
    }
    Ok(groups)
}

/// The status the generator is constructed to produce for a given number
/// of injected channels.
pub fn expected_status(injected_channels: usize) -> PatientStatus {
    match injected_channels {
        0 => PatientStatus::Minor,
        1 | 2 => PatientStatus::Repeat,
        _ => PatientStatus::Major,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_of(rows: &[(&str, u32, &str, u64, f64)]) -> String {
        let mut s = String::from("patient,channel,session,sample_index,value\n");
        for (p, c, sess, i, v) in rows {
            s.push_str(&format!("{p},{c},{sess},{i},{v}\n"));
        }
        s
    }

    #[test]
    fn ingest_windows_exact_and_partial() {
        let mut rows = Vec::new();
        for i in 0..1920u64 {
            rows.push(("p1", 1u32, "before", i, 1.0 + (i % 7) as f64));
        }
        let csv = csv_of(&rows);
        let out = ingest_signals_from(csv.as_bytes(), 1920).unwrap();
        assert_eq!(out.groups.len(), 1);
        assert_eq!(out.groups.values().next().unwrap().len(), 1);
        assert_eq!(out.dropped_samples, 0);

        let mut rows = Vec::new();
        for i in 0..1930u64 {
            rows.push(("p1", 1u32, "before", i, (i % 3) as f64));
        }
        let csv = csv_of(&rows);
        let out = ingest_signals_from(csv.as_bytes(), 1920).unwrap();
        assert_eq!(out.groups.values().next().unwrap().len(), 1);
        assert_eq!(out.dropped_samples, 10);
    }

    #[test]
    fn ingest_rejects_bad_session_naming_the_row() {
        let csv = csv_of(&[
            ("p1", 1, "before", 0, 1.0),
            ("p1", 1, "middle", 1, 2.0),
        ]);
        match ingest_signals_from(csv.as_bytes(), 2) {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "row 3");
                assert!(message.contains("middle"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_duplicates_and_gaps() {
        let csv = csv_of(&[
            ("p1", 1, "before", 0, 1.0),
            ("p1", 1, "before", 0, 2.0),
        ]);
        assert!(matches!(
            ingest_signals_from(csv.as_bytes(), 2),
            Err(Error::Parse { .. })
        ));

        let csv = csv_of(&[
            ("p1", 1, "before", 0, 1.0),
            ("p1", 1, "before", 2, 2.0),
        ]);
        match ingest_signals_from(csv.as_bytes(), 2) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "row 3"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_wrong_header() {
        let csv = "patient,channel,phase,sample_index,value\np1,1,before,0,1.0\n";
        assert!(matches!(
            ingest_signals_from(csv.as_bytes(), 2),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn synthetic_cohort_is_deterministic_and_order_free() {
        let params = SynthParams {
            patients: 2,
            channels: 3,
            window_len: 64,
            injected_channels: 1,
            ..SynthParams::default()
        };
        let a = generate_synthetic_cohort(&params).unwrap();
        let b = generate_synthetic_cohort(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 3 * 3 * 64);
    }

    #[test]
    fn synthetic_statuses_match_injection_counts() {
        for k in [0usize, 1, 2, 3, 5] {
            let params = SynthParams {
                patients: 4,
                channels: 14,
                window_len: 256,
                injected_channels: k,
                seed: 33,
                ..SynthParams::default()
            };
            let analysis = analyze_synthetic(&params, 30.0).unwrap();
            for p in &analysis.patients {
                assert_eq!(
                    p.status,
                    expected_status(k),
                    "patient {} with k = {k}",
                    p.patient_id
                );
            }
        }
    }

    #[test]
    fn analysis_errors_on_missing_session() {
        let params = SynthParams {
            patients: 1,
            channels: 2,
            window_len: 32,
            ..SynthParams::default()
        };
        let records = generate_synthetic_cohort(&params).unwrap();
        let mut groups = group_records(&records, 32).unwrap();
        groups.retain(|k, _| !(k.channel_id == 2 && k.session == Session::After));
        assert!(matches!(
            analyze_cohort(&groups, 30.0),
            Err(Error::IncompleteData(_))
        ));
    }

    #[test]
    fn repeat_payload_lists_injected_channel() {
        let params = SynthParams {
            patients: 3,
            channels: 14,
            window_len: 128,
            injected_channels: 1,
            seed: 6,
            ..SynthParams::default()
        };
        let analysis = analyze_synthetic(&params, 30.0).unwrap();
        for p in &analysis.patients {
            match &p.payload {
                SharePayload::PhysicianRepeatNotice { channels } => {
                    assert_eq!(channels.len(), 1);
                    let kappa = p.profile.kappa();
                    let ch = channels[0] as usize - 1;
                    assert!(kappa[ch] > 30.0);
                }
                other => panic!("expected repeat notice, got {}", other.kind()),
            }
        }
    }

    #[test]
    fn major_payload_carries_raw_windows() {
        let params = SynthParams {
            patients: 2,
            channels: 14,
            window_len: 128,
            injected_channels: 3,
            seed: 12,
            ..SynthParams::default()
        };
        let analysis = analyze_synthetic(&params, 30.0).unwrap();
        for p in &analysis.patients {
            match &p.payload {
                SharePayload::EmergencyNotificationWithRaw { raw, features } => {
                    assert_eq!(raw.len(), 14 * 3);
                    assert_eq!(features.len(), 14 * 3);
                }
                other => panic!("expected emergency payload, got {}", other.kind()),
            }
        }
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let params = SynthParams {
            patients: 1,
            channels: 2,
            window_len: 16,
            ..SynthParams::default()
        };
        let records = generate_synthetic_cohort(&params).unwrap();
        let mut buf = Vec::new();
        write_signals_csv(&records, &mut buf).unwrap();
        let out = ingest_signals_from(buf.as_slice(), 16).unwrap();
        let regrouped = group_records(&records, 16).unwrap();
        assert_eq!(out.groups, regrouped);
    }
}
