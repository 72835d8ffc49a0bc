//! Edge-side patient monitoring pipeline.
//!
//! Per-window feature extraction over biosignal channels, a per-channel
//! change statistic, a cohort baseline, the percent-scaled change indicator,
//! and the Major/Minor/Repeat classification that drives what the edge node
//! shares on the ledger.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recording session relative to medication intake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Before,
    During,
    After,
}

impl Session {
    pub const ALL: [Session; 3] = [Session::Before, Session::During, Session::After];

    pub fn index(self) -> usize {
        match self {
            Session::Before => 0,
            Session::During => 1,
            Session::After => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Session::Before => "before",
            Session::During => "during",
            Session::After => "after",
        }
    }

    pub fn parse(s: &str) -> Option<Session> {
        match s {
            "before" => Some(Session::Before),
            "during" => Some(Session::During),
            "after" => Some(Session::After),
            _ => None,
        }
    }
}

/// One fixed-length window of samples (microvolts) from a single channel.
///
/// Construction enforces the windowing invariants: at least two samples
/// (variance and kurtosis need them) and all samples finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    patient_id: String,
    channel_id: u32,
    session: Session,
    samples: Vec<f64>,
}

impl SignalWindow {
    pub fn new(
        patient_id: impl Into<String>,
        channel_id: u32,
        session: Session,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "window needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "window contains a non-finite sample".into(),
            ));
        }
        Ok(Self {
            patient_id: patient_id.into(),
            channel_id,
            session,
            samples,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn channel_id(&self) -> u32 {
        self.channel_id
    }

    pub fn session(&self) -> Session {
        self.session
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least two samples
    }
}

/// The six per-window statistics of one channel.
///
/// `kurtosis` is the non-excess ratio of the fourth central moment to the
/// squared second central moment; it is reported as 0 with `degenerate`
/// set when the window has zero variance (flat-lined channel), so the
/// change statistic stays finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: f64,
    pub variance: f64,
    pub rms: f64,
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

/// Population statistics of a window: mean, variance (divisor N), RMS,
/// non-excess kurtosis, minimum, and maximum.
pub fn extract_features(window: &SignalWindow) -> FeatureVector {
    let xs = window.samples();
    let n = xs.len() as f64;

    let mean = xs.iter().sum::<f64>() / n;
    let variance = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let rms = (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let degenerate = variance == 0.0;
    let kurtosis = if degenerate {
        0.0
    } else {
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        m4 / (variance * variance)
    };
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    FeatureVector {
        mean,
        variance,
        rms,
        kurtosis,
        min,
        max,
        degenerate,
    }
}

/// Per-channel change statistic: the plain sum of the six features.
/// The mixed units are deliberate; the statistic is only ever compared
/// against the cohort mean of the same sum.
pub fn delta(fv: &FeatureVector) -> f64 {
    fv.mean + fv.variance + fv.rms + fv.kurtosis + fv.min + fv.max
}

/// Cohort-wide mean of the change statistic, frozen after offline training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortBaseline {
    delta_bar: f64,
    channel_count: usize,
    patient_count: usize,
}

impl CohortBaseline {
    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn patient_count(&self) -> usize {
        self.patient_count
    }
}

/// Mean over exactly `3 * channel_count * patient_count` change statistics
/// (three sessions per channel per patient).
pub fn cohort_baseline(
    deltas: &[f64],
    channel_count: usize,
    patient_count: usize,
) -> Result<CohortBaseline> {
    if channel_count == 0 || patient_count == 0 {
        return Err(Error::InvalidInput(
            "cohort needs at least one channel and one patient".into(),
        ));
    }
    let expected = 3 * channel_count * patient_count;
    if deltas.len() != expected {
        return Err(Error::InvalidInput(format!(
            "expected {expected} delta values (3 x {channel_count} x {patient_count}), got {}",
            deltas.len()
        )));
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidInput("non-finite delta value".into()));
    }
    let delta_bar = deltas.iter().sum::<f64>() / deltas.len() as f64;
    if delta_bar <= 0.0 {
        return Err(Error::DegenerateBaseline(delta_bar));
    }
    Ok(CohortBaseline {
        delta_bar,
        channel_count,
        patient_count,
    })
}

/// Percent-scaled change indicator for one channel: the session-to-session
/// jumps of the change statistic, combined before the single division by
/// the cohort baseline.
pub fn change_indicator(
    delta_before: f64,
    delta_during: f64,
    delta_after: f64,
    baseline: &CohortBaseline,
) -> Result<f64> {
    for (name, v) in [
        ("before", delta_before),
        ("during", delta_during),
        ("after", delta_after),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite {name} delta: {v}"
            )));
        }
    }
    let jumps = (delta_before - delta_during).abs() + (delta_during - delta_after).abs();
    Ok(jumps / baseline.delta_bar() * 100.0)
}

/// Per-patient change indicator vector, one entry per channel (ascending
/// channel order; entry `i` is channel `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeProfile {
    patient_id: String,
    kappa: Vec<f64>,
}

impl ChangeProfile {
    pub fn new(patient_id: impl Into<String>, kappa: Vec<f64>) -> Result<Self> {
        if kappa.is_empty() {
            return Err(Error::InvalidInput("empty change indicator vector".into()));
        }
        if kappa.iter().any(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::InvalidInput(
                "change indicators must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            patient_id: patient_id.into(),
            kappa,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// 1-based ids of the channels whose indicator strictly exceeds `zeta`.
    pub fn exceeding_channels(&self, zeta: f64) -> Vec<u32> {
        self.kappa
            .iter()
            .enumerate()
            .filter(|(_, k)| **k > zeta)
            .map(|(i, _)| i as u32 + 1)
            .collect()
    }
}

/// Builds a patient's change profile from per-channel session deltas
/// ordered `[before, during, after]`.
pub fn change_profile(
    patient_id: impl Into<String>,
    session_deltas: &[[f64; 3]],
    baseline: &CohortBaseline,
) -> Result<ChangeProfile> {
    let kappa = session_deltas
        .iter()
        .map(|d| change_indicator(d[0], d[1], d[2], baseline))
        .collect::<Result<Vec<_>>>()?;
    ChangeProfile::new(patient_id, kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatientStatus {
    Major,
    Minor,
    Repeat,
}

impl PatientStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PatientStatus::Major => "major",
            PatientStatus::Minor => "minor",
            PatientStatus::Repeat => "repeat",
        }
    }
}

/// Classification rule over the clipped indicator vector: counting the
/// channels whose indicator strictly exceeds `zeta`, more than two means
/// Major, none means Minor, and one or two means Repeat (likely a
/// measurement problem on those channels).
pub fn classify(profile: &ChangeProfile, zeta: f64) -> PatientStatus {
    let exceed = profile.kappa().iter().filter(|k| **k > zeta).count();
    match exceed {
        0 => PatientStatus::Minor,
        1 | 2 => PatientStatus::Repeat,
        _ => PatientStatus::Major,
    }
}

/// What the edge node shares for one patient after classification.
#[derive(Debug, Clone, PartialEq)]
pub enum SharePayload {
    /// Emergency: notification plus the raw windows for further review.
    EmergencyNotificationWithRaw {
        features: Vec<FeatureVector>,
        raw: Vec<SignalWindow>,
    },
    /// Minor or no changes: only the extracted features leave the edge.
    FeaturesOnly { features: Vec<FeatureVector> },
    /// Suspected measurement error: ask the physician to repeat the
    /// listed channels; nothing is destined for the ledger.
    PhysicianRepeatNotice { channels: Vec<u32> },
}

impl SharePayload {
    pub fn kind(&self) -> &'static str {
        match self {
            SharePayload::EmergencyNotificationWithRaw { .. } => "emergency_with_raw",
            SharePayload::FeaturesOnly { .. } => "features_only",
            SharePayload::PhysicianRepeatNotice { .. } => "repeat_notice",
        }
    }
}

/// Maps a patient's status to the payload shared on the ledger.
pub fn share_decision(
    status: PatientStatus,
    profile: &ChangeProfile,
    zeta: f64,
    features: Vec<FeatureVector>,
    raw: Vec<SignalWindow>,
) -> SharePayload {
    match status {
        PatientStatus::Major => SharePayload::EmergencyNotificationWithRaw { features, raw },
        PatientStatus::Minor => SharePayload::FeaturesOnly { features },
        PatientStatus::Repeat => SharePayload::PhysicianRepeatNotice {
            channels: profile.exceeding_channels(zeta),
        },
    }
}
