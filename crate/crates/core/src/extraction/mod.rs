//! Schema-constrained extraction of a report from a transcript.

pub mod llm;
pub mod prompt;
pub mod repair;

use serde::{Deserialize, Serialize};

use crate::canonical::{decode_model_output, report_value};
use crate::model::{normalize_location, Rejection, Rules, SemanticReport, TranscriptBundle, Violation, ViolationKind};
use crate::retry::{CallError, RetryFailure, RetryPolicy};

pub use llm::{LlmBackendDescriptor, LlmClient, LlmKind, ScriptedLlm};
pub use prompt::{build_prompt, render_transcript, PromptError, PromptTemplate, REPORT_SCHEMA};
pub use repair::repair_json;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub prompt_version: u32,
    pub attempts: u32,
}

/// Model output that passed the schema, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSemanticReport {
    pub report: SemanticReport,
    pub provenance: Provenance,
    /// Locations the model cited only as unit locations; appended to
    /// `locations` during extraction.
    pub appended_locations: Vec<String>,
}

impl RawSemanticReport {
    /// Wraps an existing report, e.g. to re-run validation on it.
    pub fn from_report(report: SemanticReport) -> Self {
        RawSemanticReport {
            report,
            provenance: Provenance {
                model_id: String::new(),
                prompt_version: 0,
                attempts: 0,
            },
            appended_locations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionPolicy {
    /// Re-prompts after the first schema failure.
    pub max_reprompts: u32,
    pub transport_retry: RetryPolicy,
}

impl Default for ExtractionPolicy {
    fn default() -> Self {
        ExtractionPolicy {
            max_reprompts: 2,
            transport_retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("LLM backend unreachable: {0}")]
    Unreachable(RetryFailure),
    #[error("LLM backend error: {0}")]
    Backend(String),
    #[error("no schema-valid report after {attempts} attempt(s): {violations}")]
    Failed {
        attempts: u32,
        last_raw: String,
        violations: Rejection,
    },
}

impl ExtractionError {
    pub fn attempts(&self) -> Option<u32> {
        match self {
            ExtractionError::Failed { attempts, .. } => Some(*attempts),
            _ => None,
        }
    }
}

pub struct Extractor<'a> {
    pub client: &'a dyn LlmClient,
    pub template: &'a PromptTemplate,
    pub policy: ExtractionPolicy,
}

impl<'a> Extractor<'a> {
    pub fn new(client: &'a dyn LlmClient, template: &'a PromptTemplate, policy: ExtractionPolicy) -> Self {
        Extractor { client, template, policy }
    }

    fn call(&self, prompt: &str) -> Result<String, ExtractionError> {
        self.policy
            .transport_retry
            .run(|_| self.client.complete(prompt))
            .map_err(|f| match f.last {
                CallError::Transport(_) => ExtractionError::Unreachable(f),
                CallError::Rejected(msg) => ExtractionError::Backend(msg),
            })
    }

    /// Prompts until the answer passes the schema, at most
    /// `1 + max_reprompts` times. Re-prompts carry the violation list.
    pub fn extract(&self, transcript: &TranscriptBundle) -> Result<RawSemanticReport, ExtractionError> {
        let base = build_prompt(transcript, self.template, REPORT_SCHEMA)?;
        let max_attempts = 1 + self.policy.max_reprompts;
        let mut prompt = base.clone();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let text = self.call(&prompt)?;
            match interpret(&text) {
                Ok((report, appended)) => {
                    return Ok(RawSemanticReport {
                        report,
                        provenance: Provenance {
                            model_id: self.client.model_id(),
                            prompt_version: self.template.version,
                            attempts: attempt,
                        },
                        appended_locations: appended,
                    })
                }
                Err(violations) if attempt >= max_attempts => {
                    return Err(ExtractionError::Failed {
                        attempts: attempt,
                        last_raw: text,
                        violations,
                    })
                }
                Err(violations) => {
                    tracing::info!(attempt, count = violations.0.len(), "schema violation, re-prompting");
                    prompt = reprompt(&base, &violations);
                }
            }
        }
    }

    /// One re-prompt asking the model to reconcile its unit list with the
    /// diarized speaker count. Returns `None` when the answer does not
    /// pass the schema.
    pub fn rectify(
        &self,
        report: &SemanticReport,
        transcript: &TranscriptBundle,
    ) -> Result<Option<SemanticReport>, ExtractionError> {
        let base = build_prompt(transcript, self.template, REPORT_SCHEMA)?;
        let mut previous = report.clone();
        previous.flags.clear();
        previous.geo.clear();
        let prompt = format!(
            "{base}\n\nYour previous answer was:\n{}\n\nSpeaker diarization detected {} distinct speakers, but your answer lists {} units. \
             Re-check the speaker-labelled transcript above, attribute each unit to the speaker who voices it, and answer again with the corrected JSON document only.",
            serde_json::to_string_pretty(&report_value(&previous)).expect("json"),
            transcript.speaker_count(),
            report.units.len(),
        );
        let text = self.call(&prompt)?;
        Ok(interpret(&text).ok().map(|(r, _)| r))
    }
}

fn reprompt(base: &str, violations: &Rejection) -> String {
    let list = violations
        .0
        .iter()
        .map(|v| format!("- {v}"))
        .collect::<Vec<_>>()
        .join("\n");
    format!("{base}\n\nYour previous answer did not match the schema:\n{list}\nAnswer again with only the corrected JSON document.")
}

/// Parses a model answer, repairing it if it is not valid JSON, and
/// appends unit locations missing from `locations`.
pub fn interpret(text: &str) -> Result<(SemanticReport, Vec<String>), Rejection> {
    let mut report = match decode_model_output(text) {
        Err(Rejection(v)) if v.iter().any(|x| x.kind == ViolationKind::Syntax) => decode_model_output(&repair_json(text))?,
        other => other?,
    };
    let mut appended: Vec<String> = Vec::new();
    for unit in &report.units {
        let loc = normalize_location(&unit.location);
        let known = |l: &String| normalize_location(l) == loc;
        if !loc.is_empty() && !report.locations.iter().any(known) && !appended.iter().any(known) {
            appended.push(unit.location.clone());
        }
    }
    report.locations.extend(appended.iter().cloned());
    let violations: Vec<Violation> = report.violations(Rules::MODEL_OUTPUT);
    if violations.is_empty() {
        Ok((report, appended))
    } else {
        Err(Rejection(violations))
    }
}
