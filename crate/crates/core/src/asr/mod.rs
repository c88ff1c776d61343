//! Speech-to-text gateway over interchangeable backends.
//!
//! Three backend kinds are supported:
//!
//! * `replay_fixture`: reads a pre-annotated transcript (see [`replay`]).
//!   The endpoint is a fixture file, a directory holding
//!   `<audio stem>.jsonl`, or `sidecar` for the `.jsonl` file next to
//!   the audio.
//! * `local_engine`: an `http://` endpoint receiving the mono WAV as the
//!   request body, or an executable invoked as `<endpoint> <wav path>`.
//!   Either way the result is fixture-format lines.
//! * `cloud_api`: an HTTPS endpoint receiving the mono WAV with a bearer
//!   token from `FIELDVOICE_ASR_API_KEY`, answering
//!   `{"segments": [...]}`.

pub mod replay;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::audio::{AudioError, PcmAudio};
use crate::model::TranscriptBundle;
use crate::retry::{classify_http, http_agent, CallError, RetryFailure, RetryPolicy};

pub use replay::{load_replay_fixture, parse_replay_fixture, to_fixture_text, FixtureError};

pub const API_KEY_ENV: &str = "FIELDVOICE_ASR_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsrKind {
    LocalEngine,
    CloudApi,
    ReplayFixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Diarization,
    Sentiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrBackendDescriptor {
    pub kind: AsrKind,
    pub endpoint: String,
    #[serde(default)]
    pub capabilities: BTreeSet<Capability>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_hint: Option<String>,
    /// Artificial latency added to replay calls, for timing tests.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub delay_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn default_timeout_s() -> u64 {
    300
}

impl AsrBackendDescriptor {
    pub fn replay(endpoint: impl Into<String>) -> Self {
        AsrBackendDescriptor {
            kind: AsrKind::ReplayFixture,
            endpoint: endpoint.into(),
            capabilities: [Capability::Diarization, Capability::Sentiment].into(),
            language_hint: None,
            delay_ms: 0,
            retry: RetryPolicy::default(),
            timeout_s: default_timeout_s(),
        }
    }

    pub fn live(kind: AsrKind, endpoint: impl Into<String>, capabilities: &[Capability]) -> Self {
        AsrBackendDescriptor {
            kind,
            capabilities: capabilities.iter().copied().collect(),
            ..Self::replay(endpoint)
        }
    }

    /// Capabilities the backend actually honours. Replay fixtures carry
    /// full annotations, so they always report both.
    pub fn effective_capabilities(&self) -> BTreeSet<Capability> {
        match self.kind {
            AsrKind::ReplayFixture => [Capability::Diarization, Capability::Sentiment].into(),
            _ => self.capabilities.clone(),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.endpoint.trim().is_empty() {
            return Err("ASR backend endpoint is empty".into());
        }
        Ok(())
    }

    /// Fixture file a replay backend reads for `audio`.
    pub fn replay_path(&self, audio: &Path) -> PathBuf {
        if self.endpoint == "sidecar" {
            return audio.with_extension("jsonl");
        }
        let endpoint = PathBuf::from(&self.endpoint);
        if endpoint.is_dir() {
            let stem = audio.file_stem().unwrap_or_default();
            endpoint.join(stem).with_extension("jsonl")
        } else {
            endpoint
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AsrError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("ASR backend unreachable: {0}")]
    Unreachable(RetryFailure),
    #[error("ASR backend rejected the request: {0}")]
    Backend(String),
    #[error("ASR backend returned an empty transcript for non-silent audio")]
    EmptyTranscript,
    #[error("invalid ASR backend configuration: {0}")]
    Config(String),
}

impl AsrError {
    pub fn is_transport(&self) -> bool {
        matches!(self, AsrError::Unreachable(_))
    }
}

/// Transcribes a 16-bit PCM WAV file. Stereo input is averaged to mono
/// before it is sent to a live backend.
pub fn transcribe(audio_path: &Path, backend: &AsrBackendDescriptor) -> Result<TranscriptBundle, AsrError> {
    backend.check().map_err(AsrError::Config)?;
    let audio = PcmAudio::read(audio_path)?;
    let bundle = match backend.kind {
        AsrKind::ReplayFixture => {
            if backend.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(backend.delay_ms));
            }
            load_replay_fixture(&backend.replay_path(audio_path))?
        }
        AsrKind::LocalEngine => {
            let mono = audio.downmixed();
            if backend.endpoint.starts_with("http://") || backend.endpoint.starts_with("https://") {
                let body = call_http(backend, mono.to_wav_bytes(), None)?;
                parse_lines(&body)?
            } else {
                call_subprocess(backend, audio_path, &mono)?
            }
        }
        AsrKind::CloudApi => {
            let key = std::env::var(API_KEY_ENV)
                .map_err(|_| AsrError::Config(format!("{API_KEY_ENV} is not set")))?;
            let body = call_http(backend, audio.downmixed().to_wav_bytes(), Some(&key))?;
            #[derive(Deserialize)]
            struct CloudResponse {
                segments: Vec<crate::model::TranscriptSegment>,
            }
            let parsed: CloudResponse = serde_json::from_str(&body)
                .map_err(|e| AsrError::Backend(format!("malformed response: {e}")))?;
            TranscriptBundle::new(parsed.segments)
                .map_err(|(i, e)| AsrError::Backend(format!("segment {i}: {e}")))?
        }
    };
    let caps = backend.effective_capabilities();
    let bundle = bundle.restricted(caps.contains(&Capability::Diarization), caps.contains(&Capability::Sentiment));
    if bundle.segments().is_empty() && !audio.is_silent() {
        return Err(AsrError::EmptyTranscript);
    }
    Ok(bundle)
}

fn parse_lines(body: &str) -> Result<TranscriptBundle, AsrError> {
    parse_replay_fixture(body).map_err(|(line, msg)| AsrError::Backend(format!("result line {line}: {msg}")))
}

fn call_http(backend: &AsrBackendDescriptor, wav: Vec<u8>, bearer: Option<&str>) -> Result<String, AsrError> {
    let agent = http_agent(Duration::from_secs(backend.timeout_s));
    let caps = backend.effective_capabilities();
    backend
        .retry
        .run(|_| {
            let mut req = agent
                .post(&backend.endpoint)
                .header("Content-Type", "audio/wav")
                .query("diarization", caps.contains(&Capability::Diarization).to_string())
                .query("sentiment", caps.contains(&Capability::Sentiment).to_string());
            if let Some(lang) = &backend.language_hint {
                req = req.query("language", lang);
            }
            if let Some(key) = bearer {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req.send(&wav[..]).map_err(classify_http)?;
            resp.body_mut()
                .read_to_string()
                .map_err(|e| CallError::Transport(e.to_string()))
        })
        .map_err(|f| match f.last {
            CallError::Transport(_) => AsrError::Unreachable(f),
            CallError::Rejected(msg) => AsrError::Backend(msg),
        })
}

fn call_subprocess(backend: &AsrBackendDescriptor, original: &Path, mono: &PcmAudio) -> Result<TranscriptBundle, AsrError> {
    let tmp = std::env::temp_dir().join(format!("fieldvoice-asr-{}.wav", uuid::Uuid::new_v4()));
    let input = if mono.channels == 1 && original.exists() {
        original.to_path_buf()
    } else {
        mono.write(&tmp)?;
        tmp.clone()
    };
    let result = backend.retry.run(|_| {
        let mut cmd = Command::new(&backend.endpoint);
        cmd.arg(&input);
        if let Some(lang) = &backend.language_hint {
            cmd.env("FIELDVOICE_LANGUAGE", lang);
        }
        let out = cmd.output().map_err(|e| CallError::Transport(e.to_string()))?;
        if !out.status.success() {
            return Err(CallError::Rejected(format!(
                "engine exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        String::from_utf8(out.stdout).map_err(|e| CallError::Rejected(e.to_string()))
    });
    let _ = std::fs::remove_file(&tmp);
    let body = result.map_err(|f| match f.last {
        CallError::Transport(_) => AsrError::Unreachable(f),
        CallError::Rejected(msg) => AsrError::Backend(msg),
    })?;
    parse_lines(&body)
}
