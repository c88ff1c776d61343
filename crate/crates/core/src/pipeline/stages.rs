use std::cell::Cell;
use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::job::{JobError, JobInput, JobOptions, JobState};
use crate::asr::{load_replay_fixture, transcribe};
use crate::eval::StageTiming;
use crate::extraction::llm::sidecar_script;
use crate::extraction::{ExtractionError, Extractor, LlmBackendDescriptor, LlmKind, PromptTemplate, Provenance};
use crate::geo::GeoResolver;
use crate::model::{SemanticReport, TranscriptBundle};
use crate::validation::{run_validation, NerProvider, Rectifier};

/// Long-lived collaborators shared by every job.
#[derive(Clone)]
pub struct Services {
    pub template: PromptTemplate,
    pub ner: Arc<dyn NerProvider>,
    pub geo: Arc<GeoResolver>,
}

#[derive(Debug)]
pub enum Progress<'a> {
    Entered(JobState),
    Transcript(&'a TranscriptBundle),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub transcript: TranscriptBundle,
    pub provenance: Provenance,
    pub report: SemanticReport,
    pub timing: StageTiming,
}

#[derive(Debug)]
pub enum Halt {
    Failed(JobError),
    /// The observer stopped the run; nothing more is recorded.
    Aborted,
}

fn fail(stage: JobState, message: impl ToString) -> Halt {
    Halt::Failed(JobError {
        stage,
        message: message.to_string(),
        attempts: None,
    })
}

/// Resolves a `sidecar` scripted backend to the script next to the input.
pub fn llm_for_input(llm: &LlmBackendDescriptor, input: &JobInput) -> LlmBackendDescriptor {
    let mut llm = llm.clone();
    if llm.kind == LlmKind::Scripted && llm.endpoint == "sidecar" {
        let dir = input.path().parent().unwrap_or(std::path::Path::new("."));
        llm.endpoint = sidecar_script(dir).display().to_string();
    }
    llm
}

struct TimedRectifier<'a> {
    inner: &'a Extractor<'a>,
    spent: Cell<Duration>,
}

impl Rectifier for TimedRectifier<'_> {
    fn rectify(&self, report: &SemanticReport, transcript: &TranscriptBundle) -> Result<Option<SemanticReport>, ExtractionError> {
        let t = Instant::now();
        let out = self.inner.rectify(report, transcript);
        self.spent.set(self.spent.get() + t.elapsed());
        out
    }
}

/// Runs transcribe → extract → validate → geocode, in that order.
///
/// The observer sees each stage before it starts and the transcript once
/// it exists; returning `Break` abandons the run. Geocoding problems never
/// fail a job, they surface as flags.
pub fn process(
    input: &JobInput,
    options: &JobOptions,
    services: &Services,
    observer: &mut dyn FnMut(Progress<'_>) -> ControlFlow<()>,
) -> Result<Outcome, Halt> {
    let mut notify = |p: Progress<'_>| match observer(p) {
        ControlFlow::Continue(()) => Ok(()),
        ControlFlow::Break(()) => Err(Halt::Aborted),
    };
    let started = Instant::now();
    let mut timing = StageTiming::default();

    let transcript = match input {
        JobInput::Audio(path) => {
            notify(Progress::Entered(JobState::Transcribing))?;
            let t = Instant::now();
            let bundle = transcribe(path, &options.asr).map_err(|e| fail(JobState::Transcribing, e))?;
            timing.transcription_s = t.elapsed().as_secs_f64();
            bundle
        }
        JobInput::Transcript(path) => load_replay_fixture(path).map_err(|e| fail(JobState::Transcribing, e))?,
    };
    notify(Progress::Transcript(&transcript))?;

    notify(Progress::Entered(JobState::Extracting))?;
    let t = Instant::now();
    let client = llm_for_input(&options.llm, input)
        .connect()
        .map_err(|e| fail(JobState::Extracting, e))?;
    let extractor = Extractor::new(client.as_ref(), &services.template, options.extraction);
    let raw = extractor.extract(&transcript).map_err(|e| {
        Halt::Failed(JobError {
            stage: JobState::Extracting,
            attempts: e.attempts(),
            message: e.to_string(),
        })
    })?;
    timing.llm_s = t.elapsed().as_secs_f64();

    notify(Progress::Entered(JobState::Validating))?;
    let t = Instant::now();
    let entities = services
        .ner
        .recognize(transcript.full_text())
        .map_err(|e| fail(JobState::Validating, e))?;
    let rectifier = TimedRectifier {
        inner: &extractor,
        spent: Cell::new(Duration::ZERO),
    };
    let mut report = run_validation(
        &raw,
        &transcript,
        &entities,
        &options.calibration,
        options.rectify.then_some(&rectifier as &dyn Rectifier),
    )
    .map_err(|e| fail(JobState::Validating, e))?;
    let rectify_s = rectifier.spent.get().as_secs_f64();
    timing.llm_s += rectify_s;
    timing.validation_s = t.elapsed().as_secs_f64() - rectify_s;

    notify(Progress::Entered(JobState::Geocoding))?;
    let t = Instant::now();
    services.geo.resolve_report(&mut report, options.region.as_ref());
    timing.geocoding_s = t.elapsed().as_secs_f64();
    timing.total_s = started.elapsed().as_secs_f64();

    Ok(Outcome {
        transcript,
        provenance: raw.provenance,
        report,
        timing,
    })
}
