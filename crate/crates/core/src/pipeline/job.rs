use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::asr::AsrBackendDescriptor;
use crate::eval::StageTiming;
use crate::extraction::{ExtractionPolicy, LlmBackendDescriptor};
use crate::geo::RegionConstraint;
use crate::model::SemanticReport;
use crate::validation::CalibrationPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Transcribing,
    Extracting,
    Validating,
    Geocoding,
    Done,
    Failed,
}

impl JobState {
    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Transcribing => "transcribing",
            JobState::Extracting => "extracting",
            JobState::Validating => "validating",
            JobState::Geocoding => "geocoding",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Forward along the stage sequence (stages may be skipped), or to
    /// failed from any non-terminal state.
    pub fn can_move_to(self, next: JobState) -> bool {
        if self.is_terminal() {
            return false;
        }
        next == JobState::Failed || next > self
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobInput {
    Audio(PathBuf),
    /// A JSONL transcript in the replay fixture format; skips ASR.
    Transcript(PathBuf),
}

impl JobInput {
    pub fn path(&self) -> &std::path::Path {
        match self {
            JobInput::Audio(p) | JobInput::Transcript(p) => p,
        }
    }
}

/// Everything a job needs besides shared services, stored with the job so a
/// log replay knows exactly how it ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOptions {
    pub asr: AsrBackendDescriptor,
    pub llm: LlmBackendDescriptor,
    #[serde(default)]
    pub calibration: CalibrationPolicy,
    #[serde(default)]
    pub region: Option<RegionConstraint>,
    #[serde(default)]
    pub rectify: bool,
    #[serde(default)]
    pub extraction: ExtractionPolicy,
}

impl JobOptions {
    pub fn replay() -> Self {
        JobOptions {
            asr: AsrBackendDescriptor::replay("sidecar"),
            llm: LlmBackendDescriptor::scripted("sidecar"),
            calibration: CalibrationPolicy::default(),
            region: None,
            rectify: false,
            extraction: ExtractionPolicy::default(),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        self.asr.check()?;
        self.calibration.check()?;
        if let Some(r) = &self.region {
            r.check().map_err(|e| e.to_string())?;
        }
        if self.llm.endpoint.trim().is_empty() {
            return Err("LLM backend endpoint is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct JobError {
    pub stage: JobState,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub input: JobInput,
    pub options: JobOptions,
    pub state: JobState,
    pub submitted_at: String,
    #[serde(default)]
    pub timings: StageTiming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SemanticReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<JobError>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_only_move_forward() {
        use JobState::*;
        assert!(Queued.can_move_to(Transcribing));
        assert!(Queued.can_move_to(Extracting));
        assert!(Geocoding.can_move_to(Done));
        assert!(Extracting.can_move_to(Failed));
        assert!(!Extracting.can_move_to(Transcribing));
        assert!(!Done.can_move_to(Failed));
        assert!(!Failed.can_move_to(Queued));
        assert!(!Validating.can_move_to(Validating));
    }
}
