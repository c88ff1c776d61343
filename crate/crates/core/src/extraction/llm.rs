//! Language-model backends: a single text-in/text-out exchange per call.
//!
//! HTTP contract: `POST <endpoint>` with
//! `{"model": ..., "prompt": ..., "stream": false, "options": {...}}`,
//! answered by `{"response": "<text>"}`.
//!
//! Scripted backends read `{"model": "...", "responses": [...]}` from a
//! file. Entries are either strings (returned verbatim) or JSON values
//! (returned pretty-printed). Calls walk the list and keep returning the
//! last entry once it is exhausted.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::retry::{classify_http, http_agent, CallError, RetryPolicy};

pub trait LlmClient: Send + Sync {
    fn model_id(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String, CallError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    Http,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBackendDescriptor {
    pub kind: LlmKind,
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    /// Sampling controls forwarded as-is. Defaults request deterministic
    /// decoding.
    #[serde(default = "deterministic_options")]
    pub options: Map<String, Value>,
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
    600
}

fn deterministic_options() -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("temperature".into(), Value::from(0));
    m.insert("seed".into(), Value::from(0));
    m
}

impl LlmBackendDescriptor {
    pub fn scripted(path: impl Into<String>) -> Self {
        LlmBackendDescriptor {
            kind: LlmKind::Scripted,
            endpoint: path.into(),
            model: String::new(),
            options: deterministic_options(),
            delay_ms: 0,
            retry: RetryPolicy::default(),
            timeout_s: default_timeout_s(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        LlmBackendDescriptor {
            kind: LlmKind::Http,
            model: model.into(),
            ..Self::scripted(endpoint)
        }
    }

    pub fn connect(&self) -> Result<Box<dyn LlmClient>, String> {
        if self.endpoint.trim().is_empty() {
            return Err("LLM backend endpoint is empty".into());
        }
        Ok(match self.kind {
            LlmKind::Http => Box::new(HttpLlm {
                endpoint: self.endpoint.clone(),
                model: self.model.clone(),
                options: self.options.clone(),
                timeout: Duration::from_secs(self.timeout_s),
            }),
            LlmKind::Scripted => {
                let mut s = ScriptedLlm::from_file(Path::new(&self.endpoint))?;
                s.delay = Duration::from_millis(self.delay_ms);
                if !self.model.is_empty() {
                    s.model = self.model.clone();
                }
                Box::new(s)
            }
        })
    }
}

pub struct HttpLlm {
    endpoint: String,
    model: String,
    options: Map<String, Value>,
    timeout: Duration,
}

impl LlmClient for HttpLlm {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn complete(&self, prompt: &str) -> Result<String, CallError> {
        #[derive(Deserialize)]
        struct Reply {
            response: String,
        }
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "stream": false,
            "options": self.options,
        });
        let mut resp = http_agent(self.timeout)
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(classify_http)?;
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| CallError::Rejected(format!("malformed completion: {e}")))?;
        Ok(reply.response)
    }
}

/// Deterministic backend replaying canned responses. Prompts are kept so
/// tests can inspect what was sent.
pub struct ScriptedLlm {
    model: String,
    responses: Vec<String>,
    cursor: Mutex<usize>,
    prompts: Mutex<Vec<String>>,
    delay: Duration,
}

#[derive(Deserialize)]
struct ScriptFile {
    #[serde(default)]
    model: Option<String>,
    responses: Vec<Value>,
}

impl ScriptedLlm {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedLlm {
            model: "scripted".into(),
            responses,
            cursor: Mutex::new(0),
            prompts: Mutex::new(Vec::new()),
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read script {}: {e}", path.display()))?;
        let file: ScriptFile =
            serde_json::from_str(&text).map_err(|e| format!("malformed script {}: {e}", path.display()))?;
        if file.responses.is_empty() {
            return Err(format!("script {} has no responses", path.display()));
        }
        let responses = file
            .responses
            .into_iter()
            .map(|v| match v {
                Value::String(s) => s,
                other => serde_json::to_string_pretty(&other).expect("json value"),
            })
            .collect();
        let mut s = ScriptedLlm::new(responses);
        if let Some(m) = file.model {
            s.model = m;
        }
        Ok(s)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl LlmClient for ScriptedLlm {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn complete(&self, prompt: &str) -> Result<String, CallError> {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        self.prompts.lock().unwrap().push(prompt.to_string());
        let mut cursor = self.cursor.lock().unwrap();
        let idx = (*cursor).min(self.responses.len().saturating_sub(1));
        *cursor += 1;
        self.responses
            .get(idx)
            .cloned()
            .ok_or_else(|| CallError::Rejected("script has no responses".into()))
    }
}

/// Path of the script a per-scenario `sidecar` endpoint resolves to.
pub fn sidecar_script(dir: &Path) -> PathBuf {
    dir.join("llm_script.json")
}
