use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Dataset descriptor for one scenario. Paths are stored relative to the
/// scenario directory in the manifest file and resolved on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub id: String,
    pub language: String,
    pub audio_clean: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_noisy: Option<PathBuf>,
    pub reference_transcript: PathBuf,
    pub ground_truth_report: PathBuf,
    pub expected_speaker_count: usize,
    pub duration_s: f64,
    /// Scripted extraction responses for hermetic runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_script: Option<PathBuf>,
}

impl ScenarioManifest {
    pub fn resolved_against(mut self, dir: &Path) -> Self {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        join(&mut self.audio_clean);
        if let Some(p) = self.audio_noisy.as_mut() {
            join(p);
        }
        join(&mut self.reference_transcript);
        join(&mut self.ground_truth_report);
        if let Some(p) = self.llm_script.as_mut() {
            join(p);
        }
        self
    }

    /// Every referenced path that does not exist.
    pub fn missing_paths(&self) -> Vec<&Path> {
        let mut all: Vec<&Path> = vec![&self.audio_clean, &self.reference_transcript, &self.ground_truth_report];
        all.extend(self.audio_noisy.as_deref());
        all.extend(self.llm_script.as_deref());
        all.into_iter().filter(|p| !p.exists()).collect()
    }
}
