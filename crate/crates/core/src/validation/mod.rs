//! Deterministic audit of model output against transcript evidence.
//!
//! Validators run in a fixed order: locations, speakers, severity,
//! grounding. Each returns the flags it raised; [`run_validation`] merges
//! them into the report without duplicates, keeping first-seen order.

pub mod ner;

use serde::{Deserialize, Serialize};

use crate::extraction::{ExtractionError, Extractor, RawSemanticReport};
use crate::model::{
    find_normalized, normalize_location, EmergencyLevel, FlagKind, SemanticReport, TranscriptBundle, ValidationFlag,
};

pub use ner::{GazetteerNer, HttpNer, NerEntity, NerError, NerLabel, NerProvider};

/// Subject used for flags about the report's emergency level.
pub const LEVEL_SUBJECT: &str = "emergency_level";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPolicy {
    pub escalate_threshold: f64,
    pub deescalate_threshold: f64,
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        CalibrationPolicy {
            escalate_threshold: -0.5,
            deescalate_threshold: 0.2,
        }
    }
}

impl CalibrationPolicy {
    pub fn new(escalate_threshold: f64, deescalate_threshold: f64) -> Result<Self, String> {
        let p = CalibrationPolicy {
            escalate_threshold,
            deescalate_threshold,
        };
        p.check().map(|_| p)
    }

    pub fn check(&self) -> Result<(), String> {
        let range = -1.0..=1.0;
        if !range.contains(&self.escalate_threshold) || !range.contains(&self.deescalate_threshold) {
            return Err("calibration thresholds must lie in [-1, 1]".into());
        }
        if self.escalate_threshold >= self.deescalate_threshold {
            return Err(format!(
                "escalate threshold {} must be below de-escalate threshold {}",
                self.escalate_threshold, self.deescalate_threshold
            ));
        }
        Ok(())
    }
}

/// Classification of one extracted location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationClass {
    /// Uttered and covered by a location entity.
    Confirmed,
    /// Uttered but not recognized as a location.
    Unverified,
    /// Never uttered.
    Hallucinated,
}

pub fn classify_location(location: &str, transcript: &TranscriptBundle, ner: &[NerEntity]) -> LocationClass {
    let spans = find_normalized(transcript.full_text(), location);
    if spans.is_empty() {
        LocationClass::Hallucinated
    } else if spans.iter().any(|&(s, e)| {
        ner.iter()
            .any(|ent| ent.label == NerLabel::Location && ent.overlaps(s, e))
    }) {
        LocationClass::Confirmed
    } else {
        LocationClass::Unverified
    }
}

/// Drops locations never uttered, flags the ones NER cannot confirm, and
/// clears unit references to dropped locations.
pub fn validate_locations(
    report: &mut SemanticReport,
    transcript: &TranscriptBundle,
    ner: &[NerEntity],
) -> Vec<ValidationFlag> {
    let mut flags = Vec::new();
    let mut kept = Vec::with_capacity(report.locations.len());
    let mut dropped = Vec::new();
    for loc in report.locations.drain(..) {
        match classify_location(&loc, transcript, ner) {
            LocationClass::Confirmed => kept.push(loc),
            LocationClass::Unverified => {
                flags.push(ValidationFlag::about(
                    FlagKind::UnverifiedLocation,
                    loc.clone(),
                    format!("`{loc}` appears in the transcript but no location entity covers it"),
                ));
                kept.push(loc);
            }
            LocationClass::Hallucinated => {
                flags.push(ValidationFlag::about(
                    FlagKind::DroppedHallucinatedLocation,
                    loc.clone(),
                    format!("`{loc}` does not appear in the transcript and was removed"),
                ));
                dropped.push(normalize_location(&loc));
            }
        }
    }
    report.locations = kept;
    for unit in &mut report.units {
        if !unit.location.is_empty() && dropped.contains(&normalize_location(&unit.location)) {
            flags.push(ValidationFlag::about(
                FlagKind::DroppedHallucinatedLocation,
                unit.name.clone(),
                format!("location `{}` of {} was removed; unit location cleared", unit.location, unit.name),
            ));
            unit.location.clear();
        }
    }
    flags
}

/// Compares diarized speakers with extracted units. Skipped when the
/// transcript carries no speaker labels.
pub fn reconcile_speakers(report: &SemanticReport, transcript: &TranscriptBundle) -> Option<ValidationFlag> {
    let speakers = transcript.speaker_count();
    if speakers == 0 || speakers == report.units.len() {
        return None;
    }
    Some(ValidationFlag::new(
        FlagKind::SpeakerUnitMismatch,
        format!("{speakers} speakers detected, {} units extracted", report.units.len()),
    ))
}

fn count_gap(report: &SemanticReport, transcript: &TranscriptBundle) -> usize {
    transcript.speaker_count().abs_diff(report.units.len())
}

/// Moves severity at most one step in the direction the mean sentiment
/// indicates. A flag is raised whenever a threshold is crossed, including
/// when the level is already at the end of the scale.
pub fn calibrate_severity(
    level: EmergencyLevel,
    mean_sentiment: Option<f64>,
    policy: &CalibrationPolicy,
) -> (EmergencyLevel, Option<ValidationFlag>) {
    let Some(mean) = mean_sentiment else {
        return (level, None);
    };
    let (new, kind, cmp, threshold) = if mean < policy.escalate_threshold {
        (level.raised(), FlagKind::SeverityEscalated, "below", policy.escalate_threshold)
    } else if mean > policy.deescalate_threshold {
        (level.lowered(), FlagKind::SeverityDeescalated, "above", policy.deescalate_threshold)
    } else {
        return (level, None);
    };
    let detail = if new == level {
        format!("mean sentiment {mean:.2} {cmp} {threshold:.2}; {level} kept (end of scale)")
    } else {
        format!("mean sentiment {mean:.2} {cmp} {threshold:.2}; {level} -> {new}")
    };
    (new, Some(ValidationFlag::about(kind, LEVEL_SUBJECT, detail)))
}

/// Demotes support requests claimed without a justification.
pub fn ground_qos(report: &mut SemanticReport) -> Vec<ValidationFlag> {
    let mut flags = Vec::new();
    for unit in &mut report.units {
        for (field, req) in [("video_support", &mut unit.video_support), ("image_support", &mut unit.image_support)] {
            if req.needed && req.issue.trim().is_empty() {
                req.needed = false;
                flags.push(ValidationFlag::about(
                    FlagKind::MissingJustification,
                    format!("{}.{field}", unit.name),
                    format!("{field} of {} claimed without justification; marked not needed", unit.name),
                ));
            }
        }
    }
    flags
}

/// Re-prompts the model when unit and speaker counts disagree.
pub trait Rectifier {
    fn rectify(
        &self,
        report: &SemanticReport,
        transcript: &TranscriptBundle,
    ) -> Result<Option<SemanticReport>, ExtractionError>;
}

impl Rectifier for Extractor<'_> {
    fn rectify(
        &self,
        report: &SemanticReport,
        transcript: &TranscriptBundle,
    ) -> Result<Option<SemanticReport>, ExtractionError> {
        Extractor::rectify(self, report, transcript)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error("rectification failed: {0}")]
    Rectification(#[from] ExtractionError),
}

/// Runs all validators and returns the audited report.
///
/// Re-running on its own output changes nothing: calibration is skipped
/// once a severity flag or operator override is present, rectification
/// once a mismatch flag is present, and repeated flags are merged.
pub fn run_validation(
    raw: &RawSemanticReport,
    transcript: &TranscriptBundle,
    ner: &[NerEntity],
    policy: &CalibrationPolicy,
    rectifier: Option<&dyn Rectifier>,
) -> Result<SemanticReport, ValidationError> {
    let mut report = raw.report.clone();
    let mut flags = std::mem::take(&mut report.flags);

    let location_flags = validate_locations(&mut report, transcript, ner);
    for appended in &raw.appended_locations {
        let flagged = location_flags.iter().any(|f| f.subject.as_deref() == Some(appended.as_str()));
        if !flagged && report.has_location(appended) {
            flags.push(ValidationFlag::about(
                FlagKind::UnverifiedLocation,
                appended.clone(),
                format!("`{appended}` was cited only as a unit location"),
            ));
        }
    }
    flags.extend(location_flags);

    let already_reconciled = flags.iter().any(|f| f.kind == FlagKind::SpeakerUnitMismatch);
    if let Some(mut mismatch) = reconcile_speakers(&report, transcript) {
        if let (Some(rectifier), false) = (rectifier, already_reconciled) {
            let before = count_gap(&report, transcript);
            match rectifier.rectify(&report, transcript)? {
                Some(mut candidate) if count_gap(&candidate, transcript) < before => {
                    let again = validate_locations(&mut candidate, transcript, ner);
                    mismatch.detail.push_str(&format!("; re-prompt revised units to {}", candidate.units.len()));
                    candidate.emergency_level = report.emergency_level;
                    report = SemanticReport {
                        flags: Vec::new(),
                        geo: std::mem::take(&mut report.geo),
                        ..candidate
                    };
                    flags.extend(again);
                }
                _ => mismatch.detail.push_str("; re-prompt did not reduce the gap"),
            }
        }
        if !already_reconciled {
            flags.push(mismatch);
        }
    }

    let calibrated = flags.iter().any(|f| {
        matches!(f.kind, FlagKind::SeverityEscalated | FlagKind::SeverityDeescalated)
            || (f.kind == FlagKind::OperatorOverride && f.subject.as_deref() == Some(LEVEL_SUBJECT))
    });
    if !calibrated {
        let (level, flag) = calibrate_severity(report.emergency_level, transcript.mean_sentiment(), policy);
        report.emergency_level = level;
        flags.extend(flag);
    }

    flags.extend(ground_qos(&mut report));

    for flag in flags {
        report.push_flag(flag);
    }
    Ok(report)
}
