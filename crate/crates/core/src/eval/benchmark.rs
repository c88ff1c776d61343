use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::quality::{score_output, QualityScores, RunQuality};
use super::timing::StageTiming;
use super::wer::wer_text;
use crate::asr::AsrBackendDescriptor;
use crate::canonical::parse_report;
use crate::extraction::{LlmBackendDescriptor, LlmKind};
use crate::model::{ScenarioManifest, WerBreakdown};
use crate::pipeline::{process, JobInput, JobOptions, Services};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clean,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WerRow {
    pub scenario: String,
    pub backend: String,
    pub breakdown: Option<WerBreakdown>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityRow {
    pub scenario: String,
    pub scores: Option<QualityScores>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub scenario: String,
    pub runs: usize,
    pub timing: Option<StageTiming>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BenchmarkTables {
    pub wer_clean: Vec<WerRow>,
    pub wer_noisy: Vec<WerRow>,
    pub quality_clean: Vec<QualityRow>,
    pub quality_noisy: Vec<QualityRow>,
    /// Clean-audio runs only.
    pub timing: Vec<TimingRow>,
}

pub struct BenchmarkSetup {
    pub services: Services,
    pub options: JobOptions,
    pub runs_per_scenario: usize,
}

/// Sums S/D/I and N over successful rows; WER is then recomputed over the
/// summed N.
pub fn wer_total(rows: &[WerRow]) -> Option<WerBreakdown> {
    rows.iter()
        .filter_map(|r| r.breakdown)
        .reduce(WerBreakdown::combine)
}

/// Mean over scenarios of the per-scenario mean timings.
pub fn timing_mean(rows: &[TimingRow]) -> Option<StageTiming> {
    let t: Vec<StageTiming> = rows.iter().filter_map(|r| r.timing).collect();
    StageTiming::mean(&t)
}

fn backend_label(asr: &AsrBackendDescriptor) -> String {
    let kind = serde_json::to_value(asr.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    format!("{kind}:{}", asr.endpoint)
}

fn llm_for(manifest: &ScenarioManifest, llm: &LlmBackendDescriptor) -> LlmBackendDescriptor {
    let mut llm = llm.clone();
    if llm.kind == LlmKind::Scripted && llm.endpoint == "sidecar" {
        if let Some(script) = &manifest.llm_script {
            llm.endpoint = script.display().to_string();
        }
    }
    llm
}

struct ConditionResult {
    wer: WerRow,
    quality: QualityRow,
    timing: TimingRow,
}

fn run_condition(manifest: &ScenarioManifest, condition: Condition, setup: &BenchmarkSetup) -> ConditionResult {
    let backend = backend_label(&setup.options.asr);
    let fail = |msg: String| ConditionResult {
        wer: WerRow {
            scenario: manifest.id.clone(),
            backend: backend.clone(),
            breakdown: None,
            error: Some(msg.clone()),
        },
        quality: QualityRow {
            scenario: manifest.id.clone(),
            scores: None,
            error: Some(msg.clone()),
        },
        timing: TimingRow {
            scenario: manifest.id.clone(),
            runs: 0,
            timing: None,
            error: Some(msg),
        },
    };
    let audio = match condition {
        Condition::Clean => manifest.audio_clean.clone(),
        Condition::Noisy => match &manifest.audio_noisy {
            Some(p) => p.clone(),
            None => return fail("no noisy audio".into()),
        },
    };
    let reference = match std::fs::read_to_string(&manifest.reference_transcript) {
        Ok(t) => t,
        Err(e) => return fail(format!("reference transcript: {e}")),
    };
    let truth = match std::fs::read_to_string(&manifest.ground_truth_report)
        .map_err(|e| e.to_string())
        .and_then(|t| parse_report(&t).map_err(|e| e.to_string()))
    {
        Ok(t) => t,
        Err(e) => return fail(format!("ground truth: {e}")),
    };
    let options = JobOptions {
        llm: llm_for(manifest, &setup.options.llm),
        ..setup.options.clone()
    };
    let input = JobInput::Audio(audio);

    let mut first_wer: Option<Result<WerBreakdown, String>> = None;
    let mut quality = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    for run in 0..setup.runs_per_scenario.max(1) {
        let _span = tracing::info_span!("benchmark", scenario = %manifest.id, ?condition, run).entered();
        match process(&input, &options, &setup.services, &mut |_| std::ops::ControlFlow::Continue(())) {
            Ok(out) => {
                if first_wer.is_none() {
                    first_wer = Some(wer_text(&reference, out.transcript.full_text()).map_err(|e| e.to_string()));
                }
                quality.push(score_output(
                    &out.report,
                    &truth,
                    manifest.expected_speaker_count,
                    out.transcript.speaker_count(),
                ));
                timings.push(out.timing);
            }
            Err(halt) => {
                let msg = match halt {
                    crate::pipeline::Halt::Failed(e) => e.to_string(),
                    crate::pipeline::Halt::Aborted => "aborted".into(),
                };
                tracing::warn!(error = %msg, "benchmark run failed");
                failures.push(msg);
                quality.push(RunQuality::default());
            }
        }
    }
    let run_error = (!failures.is_empty()).then(|| format!("{} run(s) failed: {}", failures.len(), failures[0]));
    let (breakdown, wer_error) = match first_wer {
        Some(Ok(b)) => (Some(b), None),
        Some(Err(e)) => (None, Some(e)),
        None => (None, run_error.clone()),
    };
    ConditionResult {
        wer: WerRow {
            scenario: manifest.id.clone(),
            backend,
            breakdown,
            error: wer_error,
        },
        quality: QualityRow {
            scenario: manifest.id.clone(),
            scores: QualityScores::aggregate(&quality).ok(),
            error: run_error.clone(),
        },
        timing: TimingRow {
            scenario: manifest.id.clone(),
            runs: timings.len(),
            timing: StageTiming::mean(&timings),
            error: run_error,
        },
    }
}

/// Runs every scenario under both audio conditions. A failing scenario
/// becomes an error row; the batch always completes.
pub fn run_benchmark(manifests: &[ScenarioManifest], setup: &BenchmarkSetup) -> BenchmarkTables {
    let mut t = BenchmarkTables::default();
    for m in manifests {
        let clean = run_condition(m, Condition::Clean, setup);
        let noisy = run_condition(m, Condition::Noisy, setup);
        t.wer_clean.push(clean.wer);
        t.quality_clean.push(clean.quality);
        t.timing.push(clean.timing);
        t.wer_noisy.push(noisy.wer);
        t.quality_noisy.push(noisy.quality);
    }
    t
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

fn secs(v: f64) -> String {
    format!("{v:.3}")
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

pub const WER_HEADER: [&str; 8] = ["scenario", "backend", "n", "s", "d", "i", "wer_pct", "error"];
pub const QUALITY_HEADER: [&str; 7] = ["scenario", "runs", "location_pct", "unit_pct", "speaker_pct", "qos_pct", "error"];
pub const TIMING_HEADER: [&str; 8] = [
    "scenario",
    "runs",
    "transcription_s",
    "llm_s",
    "validation_s",
    "geocoding_s",
    "total_s",
    "error",
];

fn wer_record(scenario: &str, backend: &str, b: Option<WerBreakdown>, error: Option<&str>) -> Vec<String> {
    match b {
        Some(b) => vec![
            scenario.into(),
            backend.into(),
            b.reference_len.to_string(),
            b.substitutions.to_string(),
            b.deletions.to_string(),
            b.insertions.to_string(),
            pct(b.wer_percent()),
            error.unwrap_or_default().into(),
        ],
        None => {
            let mut r = vec![scenario.to_string(), backend.to_string()];
            r.extend(std::iter::repeat_n(String::new(), 5));
            r.push(error.unwrap_or("no result").into());
            r
        }
    }
}

pub fn wer_csv(rows: &[WerRow]) -> String {
    let mut out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| wer_record(&r.scenario, &r.backend, r.breakdown, r.error.as_deref()))
        .collect();
    let backend = rows.first().map(|r| r.backend.as_str()).unwrap_or("");
    out.push(wer_record("Total", backend, wer_total(rows), None));
    csv_text(&WER_HEADER, out)
}

pub fn quality_csv(rows: &[QualityRow]) -> String {
    let out = rows
        .iter()
        .map(|r| match &r.scores {
            Some(s) => vec![
                r.scenario.clone(),
                s.runs.to_string(),
                pct(s.location_pct()),
                pct(s.unit_pct()),
                pct(s.speaker_pct()),
                pct(s.qos_pct()),
                r.error.clone().unwrap_or_default(),
            ],
            None => {
                let mut v = vec![r.scenario.clone()];
                v.extend(std::iter::repeat_n(String::new(), 5));
                v.push(r.error.clone().unwrap_or_else(|| "no result".into()));
                v
            }
        })
        .collect();
    csv_text(&QUALITY_HEADER, out)
}

fn timing_record(scenario: &str, runs: usize, t: Option<StageTiming>, error: Option<&str>) -> Vec<String> {
    match t {
        Some(t) => vec![
            scenario.into(),
            runs.to_string(),
            secs(t.transcription_s),
            secs(t.llm_s),
            secs(t.validation_s),
            secs(t.geocoding_s),
            secs(t.total_s),
            error.unwrap_or_default().into(),
        ],
        None => {
            let mut v = vec![scenario.to_string(), runs.to_string()];
            v.extend(std::iter::repeat_n(String::new(), 5));
            v.push(error.unwrap_or("no result").into());
            v
        }
    }
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| timing_record(&r.scenario, r.runs, r.timing, r.error.as_deref()))
        .collect();
    let runs = rows.iter().map(|r| r.runs).sum();
    out.push(timing_record("Mean", runs, timing_mean(rows), None));
    csv_text(&TIMING_HEADER, out)
}

impl BenchmarkTables {
    /// Markdown rendering of all five tables.
    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let wer_table = |s: &mut String, title: &str, rows: &[WerRow]| {
            let _ = writeln!(s, "## {title}\n\n| Scenario | WER % (S/D/I) |\n|---|---|");
            for r in rows {
                let cell = match (&r.breakdown, &r.error) {
                    (Some(b), _) => b.table_cell(),
                    (None, e) => format!("error: {}", e.as_deref().unwrap_or("no result")),
                };
                let _ = writeln!(s, "| {} | {} |", r.scenario, cell);
            }
            if let Some(t) = wer_total(rows) {
                let _ = writeln!(s, "| Total | {} |", t.table_cell());
            }
            s.push('\n');
        };
        wer_table(&mut s, "Transcription error, clean audio", &self.wer_clean);
        wer_table(&mut s, "Transcription error, noisy audio", &self.wer_noisy);
        let quality_table = |s: &mut String, title: &str, rows: &[QualityRow]| {
            let _ = writeln!(
                s,
                "## {title}\n\n| Scenario | Location | Unit | Speakers | QoS |\n|---|---|---|---|---|"
            );
            for r in rows {
                match &r.scores {
                    Some(q) => {
                        let _ = writeln!(
                            s,
                            "| {} | {:.0}% | {:.0}% | {:.0}% | {:.0}% |",
                            r.scenario,
                            q.location_pct(),
                            q.unit_pct(),
                            q.speaker_pct(),
                            q.qos_pct()
                        );
                    }
                    None => {
                        let _ = writeln!(s, "| {} | error: {} | | | |", r.scenario, r.error.as_deref().unwrap_or("?"));
                    }
                }
            }
            s.push('\n');
        };
        quality_table(&mut s, "Output quality, clean audio", &self.quality_clean);
        quality_table(&mut s, "Output quality, noisy audio", &self.quality_noisy);
        let _ = writeln!(
            s,
            "## Execution time (s)\n\n| Scenario | Transcription | LLM | Total |\n|---|---|---|---|"
        );
        for r in &self.timing {
            match &r.timing {
                Some(t) => {
                    let _ = writeln!(s, "| {} | {:.2} | {:.2} | {:.2} |", r.scenario, t.transcription_s, t.llm_s, t.total_s);
                }
                None => {
                    let _ = writeln!(s, "| {} | error: {} | | |", r.scenario, r.error.as_deref().unwrap_or("?"));
                }
            }
        }
        if let Some(t) = timing_mean(&self.timing) {
            let _ = writeln!(s, "| Mean | {:.2} | {:.2} | {:.2} |", t.transcription_s, t.llm_s, t.total_s);
        }
        s
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("wer_clean.csv"), wer_csv(&self.wer_clean))?;
        std::fs::write(dir.join("wer_noisy.csv"), wer_csv(&self.wer_noisy))?;
        std::fs::write(dir.join("quality_clean.csv"), quality_csv(&self.quality_clean))?;
        std::fs::write(dir.join("quality_noisy.csv"), quality_csv(&self.quality_noisy))?;
        std::fs::write(dir.join("timing.csv"), timing_csv(&self.timing))?;
        std::fs::write(dir.join("tables.md"), self.markdown())
    }
}
