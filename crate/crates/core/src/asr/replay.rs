//! Replay fixtures: one transcript segment per line, as JSON.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! {"speaker": "SPK1", "text": "Unit Alpha to command.", "start_ms": 0, "end_ms": 1800, "sentiment": -0.2}
//! ```
//!
//! `speaker` and `sentiment` may be omitted. Segments are reordered by
//! `start_ms` (stable) when the bundle is built.

use std::path::{Path, PathBuf};

use crate::model::{TranscriptBundle, TranscriptSegment};

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Invalid { path: PathBuf, line: usize, message: String },
}

pub fn load_replay_fixture(path: &Path) -> Result<TranscriptBundle, FixtureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_replay_fixture(&text).map_err(|(line, message)| FixtureError::Invalid {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses fixture text. Errors carry the 1-based line number.
pub fn parse_replay_fixture(text: &str) -> Result<TranscriptBundle, (usize, String)> {
    let mut segments = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let seg: TranscriptSegment = serde_json::from_str(trimmed).map_err(|e| (i + 1, e.to_string()))?;
        seg.check().map_err(|e| (i + 1, e.to_string()))?;
        segments.push(seg);
        lines.push(i + 1);
    }
    TranscriptBundle::new(segments).map_err(|(idx, e)| (lines[idx], e.to_string()))
}

/// Writes a bundle back out in fixture form.
pub fn to_fixture_text(bundle: &TranscriptBundle) -> String {
    let mut out = String::new();
    for seg in bundle.segments() {
        out.push_str(&serde_json::to_string(seg).expect("segments serialize"));
        out.push('\n');
    }
    out
}
