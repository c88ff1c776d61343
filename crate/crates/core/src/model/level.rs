use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ordinal emergency severity. Ordering follows the discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmergencyLevel {
    Minor = 0,
    Moderate = 1,
    Severe = 2,
    Critical = 3,
}

impl EmergencyLevel {
    pub const ALL: [EmergencyLevel; 4] = [
        EmergencyLevel::Minor,
        EmergencyLevel::Moderate,
        EmergencyLevel::Severe,
        EmergencyLevel::Critical,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        Self::ALL.get(ordinal as usize).copied()
    }

    /// Lowercase label, used in prompts and flag details.
    pub fn as_str(self) -> &'static str {
        match self {
            EmergencyLevel::Minor => "minor",
            EmergencyLevel::Moderate => "moderate",
            EmergencyLevel::Severe => "severe",
            EmergencyLevel::Critical => "critical",
        }
    }

    /// Capitalized label written by the canonical report form.
    pub fn canonical_label(self) -> &'static str {
        match self {
            EmergencyLevel::Minor => "Minor",
            EmergencyLevel::Moderate => "Moderate",
            EmergencyLevel::Severe => "Severe",
            EmergencyLevel::Critical => "Critical",
        }
    }

    /// One step up, saturating at critical.
    pub fn raised(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1).unwrap_or(EmergencyLevel::Critical)
    }

    /// One step down, saturating at minor.
    pub fn lowered(self) -> Self {
        match self.ordinal() {
            0 => EmergencyLevel::Minor,
            n => Self::from_ordinal(n - 1).unwrap_or(EmergencyLevel::Minor),
        }
    }
}

impl fmt::Display for EmergencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown emergency level `{0}` (expected minor, moderate, severe or critical)")]
pub struct UnknownLevel(pub String);

impl FromStr for EmergencyLevel {
    type Err = UnknownLevel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "minor" => Ok(EmergencyLevel::Minor),
            "moderate" => Ok(EmergencyLevel::Moderate),
            "severe" => Ok(EmergencyLevel::Severe),
            "critical" => Ok(EmergencyLevel::Critical),
            _ => Err(UnknownLevel(s.to_string())),
        }
    }
}

impl Serialize for EmergencyLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EmergencyLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
