use serde::{Deserialize, Serialize};

/// Allowance for work outside the timed stages when checking the partition.
pub const OVERHEAD_BOUND_S: f64 = 0.5;

/// Wall-clock seconds per pipeline stage. Transcription includes
/// diarization; `llm_s` covers extraction and any rectification re-prompt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTiming {
    pub transcription_s: f64,
    pub llm_s: f64,
    #[serde(default)]
    pub validation_s: f64,
    #[serde(default)]
    pub geocoding_s: f64,
    pub total_s: f64,
}

impl StageTiming {
    /// `transcription + llm ≤ total + ε` and `total ≥ every stage`.
    pub fn partition_holds(&self, eps: f64) -> bool {
        let stages = [self.transcription_s, self.llm_s, self.validation_s, self.geocoding_s];
        self.total_s + eps >= self.transcription_s + self.llm_s && stages.iter().all(|s| self.total_s + 1e-9 >= *s)
    }

    /// Upper side: total stays within the stage sum plus the overhead bound.
    pub fn overhead_bounded(&self, bound: f64) -> bool {
        self.total_s <= self.transcription_s + self.llm_s + self.validation_s + self.geocoding_s + bound
    }

    pub fn mean(timings: &[StageTiming]) -> Option<StageTiming> {
        if timings.is_empty() {
            return None;
        }
        let n = timings.len() as f64;
        let sum = timings.iter().fold(StageTiming::default(), |a, t| StageTiming {
            transcription_s: a.transcription_s + t.transcription_s,
            llm_s: a.llm_s + t.llm_s,
            validation_s: a.validation_s + t.validation_s,
            geocoding_s: a.geocoding_s + t.geocoding_s,
            total_s: a.total_s + t.total_s,
        });
        Some(StageTiming {
            transcription_s: sum.transcription_s / n,
            llm_s: sum.llm_s / n,
            validation_s: sum.validation_s / n,
            geocoding_s: sum.geocoding_s / n,
            total_s: sum.total_s / n,
        })
    }
}
