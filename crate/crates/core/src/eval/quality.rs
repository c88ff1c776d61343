use serde::{Deserialize, Serialize};

use crate::model::{normalize_location, SemanticReport, SupportRequest, Unit};

/// Outcome of one run on the four scored dimensions. Geocoding is not
/// scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunQuality {
    pub location_ok: bool,
    pub unit_ok: bool,
    pub speaker_ok: bool,
    pub qos_ok: bool,
}

fn request_agrees(truth: &SupportRequest, got: &SupportRequest) -> bool {
    truth.needed == got.needed && (!truth.needed || truth.priority == got.priority)
}

fn same_location(a: &Unit, b: &Unit) -> bool {
    normalize_location(&a.location) == normalize_location(&b.location)
}

pub fn score_output(
    report: &SemanticReport,
    truth: &SemanticReport,
    expected_speaker_count: usize,
    observed_speaker_count: usize,
) -> RunQuality {
    let location_ok = truth.locations.iter().all(|l| report.has_location(l));
    let unit_ok = truth
        .units
        .iter()
        .all(|t| report.unit(&t.name).is_some_and(|u| same_location(t, u)));
    let qos_ok = truth.units.iter().all(|t| {
        report.unit(&t.name).is_some_and(|u| {
            request_agrees(&t.video_support, &u.video_support) && request_agrees(&t.image_support, &u.image_support)
        })
    });
    RunQuality {
        location_ok,
        unit_ok,
        speaker_ok: expected_speaker_count == observed_speaker_count,
        qos_ok,
    }
}

/// Success counts over a set of runs of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityScores {
    pub runs: usize,
    pub location: usize,
    pub unit: usize,
    pub speaker: usize,
    pub qos: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("quality rates need at least one run")]
pub struct NoRuns;

impl QualityScores {
    pub fn aggregate(runs: &[RunQuality]) -> Result<Self, NoRuns> {
        if runs.is_empty() {
            return Err(NoRuns);
        }
        let count = |f: fn(&RunQuality) -> bool| runs.iter().filter(|r| f(r)).count();
        Ok(QualityScores {
            runs: runs.len(),
            location: count(|r| r.location_ok),
            unit: count(|r| r.unit_ok),
            speaker: count(|r| r.speaker_ok),
            qos: count(|r| r.qos_ok),
        })
    }

    fn rate(&self, k: usize) -> f64 {
        100.0 * k as f64 / self.runs as f64
    }

    pub fn location_pct(&self) -> f64 {
        self.rate(self.location)
    }

    pub fn unit_pct(&self) -> f64 {
        self.rate(self.unit)
    }

    pub fn speaker_pct(&self) -> f64 {
        self.rate(self.speaker)
    }

    pub fn qos_pct(&self) -> f64 {
        self.rate(self.qos)
    }
}
