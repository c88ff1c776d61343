use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    SpeakerUnitMismatch,
    UnverifiedLocation,
    DroppedHallucinatedLocation,
    SeverityEscalated,
    SeverityDeescalated,
    MissingJustification,
    GeocodeAmbiguous,
    GeocodeUnresolved,
    /// A human operator changed the report.
    OperatorOverride,
}

impl FlagKind {
    pub const ALL: [FlagKind; 9] = [
        FlagKind::SpeakerUnitMismatch,
        FlagKind::UnverifiedLocation,
        FlagKind::DroppedHallucinatedLocation,
        FlagKind::SeverityEscalated,
        FlagKind::SeverityDeescalated,
        FlagKind::MissingJustification,
        FlagKind::GeocodeAmbiguous,
        FlagKind::GeocodeUnresolved,
        FlagKind::OperatorOverride,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlagKind::SpeakerUnitMismatch => "speaker_unit_mismatch",
            FlagKind::UnverifiedLocation => "unverified_location",
            FlagKind::DroppedHallucinatedLocation => "dropped_hallucinated_location",
            FlagKind::SeverityEscalated => "severity_escalated",
            FlagKind::SeverityDeescalated => "severity_deescalated",
            FlagKind::MissingJustification => "missing_justification",
            FlagKind::GeocodeAmbiguous => "geocode_ambiguous",
            FlagKind::GeocodeUnresolved => "geocode_unresolved",
            FlagKind::OperatorOverride => "operator_override",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for FlagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Audit finding attached to a report by the validation layer, the
/// geocoder, or an operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValidationFlag {
    pub kind: FlagKind,
    pub detail: String,
    pub subject: Option<String>,
}

impl ValidationFlag {
    pub fn new(kind: FlagKind, detail: impl Into<String>) -> Self {
        ValidationFlag {
            kind,
            detail: detail.into(),
            subject: None,
        }
    }

    pub fn about(kind: FlagKind, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        ValidationFlag {
            kind,
            detail: detail.into(),
            subject: Some(subject.into()),
        }
    }
}
