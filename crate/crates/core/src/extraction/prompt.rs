use serde::{Deserialize, Serialize};

use crate::model::TranscriptBundle;

pub const PLACEHOLDERS: [&str; 3] = ["{schema}", "{emergency_levels}", "{transcript}"];

/// JSON shape the model must answer with.
pub const REPORT_SCHEMA: &str = r##"{
  "type": "object",
  "additionalProperties": false,
  "required": ["locations", "emergency_level", "units"],
  "properties": {
    "locations": {"type": "array", "items": {"type": "string"}},
    "emergency_level": {"type": "string", "enum": ["minor", "moderate", "severe", "critical"]},
    "units": {
      "type": "array",
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["name", "location", "video_support", "image_support", "times_intervened"],
        "properties": {
          "name": {"type": "string"},
          "location": {"type": "string"},
          "video_support": {"$ref": "#/$defs/support"},
          "image_support": {"$ref": "#/$defs/support"},
          "times_intervened": {"type": "integer", "minimum": 1}
        }
      }
    }
  },
  "$defs": {
    "support": {
      "type": "object",
      "additionalProperties": false,
      "required": ["needed", "issue", "priority", "requirements"],
      "properties": {
        "needed": {"type": "boolean"},
        "issue": {"type": "string"},
        "priority": {"type": "string", "enum": ["low", "medium", "high"]},
        "requirements": {"type": ["string", "null"], "pattern": "^[0-9.]+ Mbit/s$"}
      }
    }
  }
}"##;

pub const DEFAULT_TEMPLATE_TEXT: &str = "\
You extract structured situation reports from emergency radio traffic.

Read the transcript and answer with a single JSON document that follows this schema exactly:
{schema}

Fields:
- locations: every location reference stated in the communication (street names, landmarks), each listed once.
- units: every responding unit. For each unit give its name, the location it reports from (one of the locations above, or an empty string), the number of times it intervened, and its QoS expectations as video_support and image_support.
- QoS expectations: for each support kind, whether it is needed, the issue that justifies it (quote the transcript; leave empty if nothing was said), a priority and the indicative throughput as \"<n> Mbit/s\" or null.
- emergency_level: exactly one of: {emergency_levels}.

Only include information explicitly stated in the communication. Do not infer coordinates or add places that were not mentioned.

Transcript:
{transcript}
";

/// Prompt text with its placeholders and the configured level list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_text: String,
    pub version: u32,
    /// Injected verbatim; each label must name a known severity.
    pub emergency_levels: Vec<String>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            system_text: DEFAULT_TEMPLATE_TEXT.to_string(),
            version: 1,
            emergency_levels: ["minor", "moderate", "severe", "critical"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template placeholder {placeholder} appears {count} times (expected exactly once)")]
    Placeholder { placeholder: &'static str, count: usize },
    #[error("configured emergency level `{0}` does not map onto minor/moderate/severe/critical")]
    UnknownLevel(String),
    #[error("transcript is empty")]
    EmptyTranscript,
}

impl PromptTemplate {
    pub fn check(&self) -> Result<(), PromptError> {
        for placeholder in PLACEHOLDERS {
            let count = self.system_text.matches(placeholder).count();
            if count != 1 {
                return Err(PromptError::Placeholder { placeholder, count });
            }
        }
        for label in &self.emergency_levels {
            if label.parse::<crate::model::EmergencyLevel>().is_err() {
                return Err(PromptError::UnknownLevel(label.clone()));
            }
        }
        Ok(())
    }
}

/// Renders the transcript for the model. With diarization each segment
/// goes on its own line prefixed by `[speaker]`.
pub fn render_transcript(transcript: &TranscriptBundle) -> String {
    if !transcript.has_speakers() {
        return transcript.full_text().to_string();
    }
    transcript
        .segments()
        .iter()
        .map(|s| format!("[{}] {}", s.speaker.as_deref().unwrap_or("unknown"), s.text.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Substitutes placeholders in one pass, so text inside the transcript is
/// never re-expanded.
pub fn build_prompt(
    transcript: &TranscriptBundle,
    template: &PromptTemplate,
    schema_text: &str,
) -> Result<String, PromptError> {
    template.check()?;
    if transcript.full_text().trim().is_empty() {
        return Err(PromptError::EmptyTranscript);
    }
    let levels = template.emergency_levels.join(", ");
    let rendered = render_transcript(transcript);
    let mut out = String::with_capacity(template.system_text.len() + rendered.len() + schema_text.len());
    let mut rest = template.system_text.as_str();
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let hit = [("{schema}", schema_text), ("{emergency_levels}", levels.as_str()), ("{transcript}", rendered.as_str())]
            .into_iter()
            .find(|(p, _)| tail.starts_with(p));
        match hit {
            Some((p, value)) => {
                out.push_str(value);
                rest = &tail[p.len()..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
