use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::audio::{wav_duration_s, AudioError};
use crate::canonical::parse_report;
use crate::model::{Rejection, ScenarioManifest};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CLEAN_AUDIO: &str = "clean.wav";
pub const NOISY_AUDIO: &str = "noisy.wav";
pub const REFERENCE: &str = "reference.txt";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const LLM_SCRIPT: &str = "llm_script.json";
/// Optional overrides: `{"id", "language", "expected_speaker_count"}`.
pub const SCENARIO_INFO: &str = "scenario.json";

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("scenario {dir}: missing {file}")]
    MissingArtifact { dir: PathBuf, file: &'static str },
    #[error("{path}: ground truth is not a valid report: {source}")]
    GroundTruth {
        path: PathBuf,
        #[source]
        source: Rejection,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioInfo {
    id: Option<String>,
    language: Option<String>,
    expected_speaker_count: Option<usize>,
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Assembles and writes `manifest.json` for a scenario directory holding
/// `clean.wav`, `reference.txt` and `ground_truth.json`, plus optional
/// `noisy.wav`, `llm_script.json` and `scenario.json`.
///
/// Without an explicit speaker count, the ground truth's unit count is
/// used: each unit is one radio voice.
pub fn build_manifest(dir: &Path) -> Result<ScenarioManifest, ManifestError> {
    let require = |file: &'static str| {
        let p = dir.join(file);
        if p.is_file() {
            Ok(p)
        } else {
            Err(ManifestError::MissingArtifact {
                dir: dir.to_path_buf(),
                file,
            })
        }
    };
    let clean = require(CLEAN_AUDIO)?;
    require(REFERENCE)?;
    let truth_path = require(GROUND_TRUTH)?;
    let truth = parse_report(&read(&truth_path)?).map_err(|source| ManifestError::GroundTruth {
        path: truth_path.clone(),
        source,
    })?;
    let info_path = dir.join(SCENARIO_INFO);
    let info: ScenarioInfo = if info_path.is_file() {
        serde_json::from_str(&read(&info_path)?).map_err(|e| ManifestError::Invalid {
            path: info_path.clone(),
            message: e.to_string(),
        })?
    } else {
        ScenarioInfo::default()
    };
    let duration_s = wav_duration_s(&clean)?;
    let optional = |file: &str| dir.join(file).is_file().then(|| PathBuf::from(file));
    let manifest = ScenarioManifest {
        id: info
            .id
            .or_else(|| dir.file_name().and_then(|n| n.to_str()).map(str::to_string))
            .unwrap_or_else(|| "scenario".into()),
        language: info.language.unwrap_or_else(|| "en".into()),
        audio_clean: CLEAN_AUDIO.into(),
        audio_noisy: optional(NOISY_AUDIO),
        reference_transcript: REFERENCE.into(),
        ground_truth_report: GROUND_TRUTH.into(),
        expected_speaker_count: info.expected_speaker_count.unwrap_or(truth.units.len()),
        duration_s,
        llm_script: optional(LLM_SCRIPT),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let out = dir.join(MANIFEST_FILE);
    std::fs::write(&out, text).map_err(|source| ManifestError::Io { path: out, source })?;
    Ok(manifest.resolved_against(dir))
}

/// Reads `manifest.json` from a scenario directory, with paths resolved.
pub fn load_manifest(dir: &Path) -> Result<ScenarioManifest, ManifestError> {
    let path = dir.join(MANIFEST_FILE);
    let m: ScenarioManifest = serde_json::from_str(&read(&path)?).map_err(|e| ManifestError::Invalid {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let m = m.resolved_against(dir);
    if let Some(missing) = m.missing_paths().first() {
        return Err(ManifestError::Invalid {
            path,
            message: format!("{} does not exist", missing.display()),
        });
    }
    Ok(m)
}

/// Every scenario under `root`: each subdirectory with a manifest, or
/// with the artifacts to build one, sorted by directory name.
pub fn discover_manifests(root: &Path) -> Result<Vec<ScenarioManifest>, ManifestError> {
    let entries = std::fs::read_dir(root).map_err(|source| ManifestError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir() && (p.join(MANIFEST_FILE).is_file() || p.join(CLEAN_AUDIO).is_file()))
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| {
            if d.join(MANIFEST_FILE).is_file() {
                load_manifest(d)
            } else {
                build_manifest(d)
            }
        })
        .collect()
}
