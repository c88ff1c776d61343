use std::ops::ControlFlow;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::job::{Job, JobError, JobInput, JobOptions, JobState};
use super::stages::{process, Halt, Outcome, Progress, Services};
use super::store::{now_rfc3339, JobEvent, Recovery, ReportVersion, Store, StoreError, VersionSource};
use crate::asr::to_fixture_text;
use crate::canonical::canonical_string;
use crate::model::{choose_candidate, EmergencyLevel, FlagKind, SemanticReport, ValidationFlag};
use crate::validation::LEVEL_SUBJECT;

#[derive(Debug, thiserror::Error)]
pub enum SubmitError {
    #[error("input {0} does not exist or is not a file")]
    MissingInput(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// An operator correction to a stored report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Override {
    Severity { level: EmergencyLevel },
    GeoChoice { query: String, index: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum OverrideError {
    #[error("no report `{0}`")]
    UnknownReport(String),
    #[error("report `{id}` is at version {actual}, not {expected}")]
    VersionConflict { id: String, expected: u32, actual: u32 },
    #[error("invalid override: {0}")]
    Invalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Result of an override: the latest version and whether it is new.
#[derive(Debug, Clone, PartialEq)]
pub struct OverrideOutcome {
    pub version: ReportVersion,
    pub changed: bool,
}

struct Inner {
    store: Mutex<Store>,
    services: Services,
    finished: Condvar,
}

impl Inner {
    fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Jobs on a bounded worker pool over a [`Store`].
pub struct Pipeline {
    inner: Arc<Inner>,
    queue: Mutex<Option<Sender<String>>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Pipeline {
    /// Opens the store, settles interrupted jobs and starts `workers`
    /// threads (0 means jobs only run through [`Pipeline::run_job`]).
    pub fn open(data_dir: &std::path::Path, services: Services, workers: usize) -> Result<(Pipeline, Recovery), StoreError> {
        let (store, recovery) = Store::open(data_dir)?;
        Ok((Self::with_store(store, services, workers, &recovery.requeued), recovery))
    }

    pub fn with_store(store: Store, services: Services, workers: usize, requeue: &[String]) -> Pipeline {
        let inner = Arc::new(Inner {
            store: Mutex::new(store),
            services,
            finished: Condvar::new(),
        });
        let (tx, rx) = mpsc::channel::<String>();
        let rx = Arc::new(Mutex::new(rx));
        let handles = (0..workers)
            .map(|n| {
                let inner = inner.clone();
                let rx = rx.clone();
                std::thread::Builder::new()
                    .name(format!("job-worker-{n}"))
                    .spawn(move || worker(inner, rx))
                    .expect("spawn worker")
            })
            .collect();
        let p = Pipeline {
            inner,
            queue: Mutex::new(Some(tx)),
            workers: Mutex::new(handles),
        };
        if workers > 0 {
            for id in requeue {
                p.enqueue(id);
            }
        }
        p
    }

    fn enqueue(&self, id: &str) {
        if let Some(tx) = self.queue.lock().unwrap_or_else(|e| e.into_inner()).as_ref() {
            let _ = tx.send(id.to_string());
        }
    }

    pub fn submit(&self, input: JobInput, options: JobOptions) -> Result<String, SubmitError> {
        if !input.path().is_file() {
            return Err(SubmitError::MissingInput(input.path().display().to_string()));
        }
        options.check().map_err(SubmitError::InvalidOptions)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.inner.store().append_event(JobEvent::Submitted {
            id: id.clone(),
            at: now_rfc3339(),
            input,
            options: Box::new(options),
        })?;
        self.enqueue(&id);
        Ok(id)
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.inner.store().job(id)
    }

    pub fn jobs(&self) -> Vec<Job> {
        self.inner.store().jobs()
    }

    pub fn latest_report(&self, id: &str) -> Option<ReportVersion> {
        self.inner.store().latest(id).cloned()
    }

    pub fn report_versions(&self, id: &str) -> Vec<ReportVersion> {
        self.inner.store().versions(id).to_vec()
    }

    pub fn latest_reports(&self) -> Vec<ReportVersion> {
        let store = self.inner.store();
        store.report_ids().filter_map(|id| store.latest(id).cloned()).collect()
    }

    /// Blocks until the job is terminal or the timeout passes.
    pub fn wait(&self, id: &str, timeout: Duration) -> Option<Job> {
        let deadline = Instant::now() + timeout;
        let mut store = self.inner.store();
        loop {
            let job = store.job(id)?;
            let now = Instant::now();
            if job.state.is_terminal() || now >= deadline {
                return Some(job);
            }
            store = self
                .inner
                .finished
                .wait_timeout(store, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    /// Runs a queued job on the calling thread.
    pub fn run_job(&self, id: &str) -> Option<Job> {
        run_job(&self.inner, id, &mut |_| ControlFlow::Continue(()));
        self.job(id)
    }

    /// Like [`Pipeline::run_job`], with an observer that may abandon the run
    /// (used to simulate a process dying mid-stage).
    pub fn run_job_observed(&self, id: &str, observer: &mut dyn FnMut(&Progress<'_>) -> ControlFlow<()>) -> Option<Job> {
        run_job(&self.inner, id, observer);
        self.job(id)
    }

    pub fn with_store_mut<T>(&self, f: impl FnOnce(&mut Store) -> T) -> T {
        f(&mut self.inner.store())
    }

    pub fn record_override(
        &self,
        id: &str,
        change: &Override,
        actor: &str,
        expected_version: Option<u32>,
    ) -> Result<OverrideOutcome, OverrideError> {
        // the store lock serializes overrides against each other and jobs
        let mut store = self.inner.store();
        let current = store.latest(id).cloned().ok_or_else(|| OverrideError::UnknownReport(id.to_string()))?;
        if let Some(expected) = expected_version {
            if expected != current.version {
                return Err(OverrideError::VersionConflict {
                    id: id.to_string(),
                    expected,
                    actual: current.version,
                });
            }
        }
        let report = current
            .report()
            .map_err(|e| OverrideError::Invalid(format!("stored report unreadable: {e}")))?;
        let actor = if actor.trim().is_empty() { "operator" } else { actor.trim() };
        let Some((updated, summary)) = apply_override(&report, change, actor)? else {
            return Ok(OverrideOutcome {
                version: current,
                changed: false,
            });
        };
        let canonical = canonical_string(&updated).map_err(|e| OverrideError::Invalid(e.to_string()))?;
        let version = ReportVersion {
            report_id: id.to_string(),
            version: current.version + 1,
            created_at: now_rfc3339(),
            source: VersionSource::Override {
                actor: actor.to_string(),
                change: summary,
            },
            canonical,
        };
        store.append_version(version.clone())?;
        store.append_event(JobEvent::Audit {
            report_id: id.to_string(),
            version: version.version,
            flags: updated.flags,
        })?;
        Ok(OverrideOutcome { version, changed: true })
    }

    /// Stops accepting work and waits for workers to drain the queue.
    pub fn shutdown(&self) {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).take();
        for h in self.workers.lock().unwrap_or_else(|e| e.into_inner()).drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Applies an override; `None` when it would change nothing.
pub fn apply_override(
    report: &SemanticReport,
    change: &Override,
    actor: &str,
) -> Result<Option<(SemanticReport, String)>, OverrideError> {
    let mut next = report.clone();
    let summary = match change {
        Override::Severity { level } => {
            if *level == report.emergency_level {
                return Ok(None);
            }
            next.emergency_level = *level;
            let summary = format!("emergency level {} -> {}", report.emergency_level, level);
            next.push_flag(ValidationFlag::about(
                FlagKind::OperatorOverride,
                LEVEL_SUBJECT,
                format!("{summary} by {actor}"),
            ));
            summary
        }
        Override::GeoChoice { query, index } => {
            let (slot, geo) = report
                .geo_for(query)
                .ok_or_else(|| OverrideError::Invalid(format!("no geocoding result for `{query}`")))?;
            if geo.chosen == Some(*index) {
                return Ok(None);
            }
            let chosen = choose_candidate(geo, *index).map_err(|e| OverrideError::Invalid(e.to_string()))?;
            let name = chosen.candidates[*index].display_name.clone();
            let subject = geo.query.clone();
            next.geo[slot] = chosen;
            next.flags
                .retain(|f| !(f.kind == FlagKind::GeocodeAmbiguous && f.subject.as_deref() == Some(subject.as_str())));
            let summary = format!("`{subject}` resolved to candidate {index} ({name})");
            next.push_flag(ValidationFlag::about(
                FlagKind::OperatorOverride,
                &subject,
                format!("{summary} by {actor}"),
            ));
            summary
        }
    };
    Ok(Some((next, summary)))
}

fn worker(inner: Arc<Inner>, rx: Arc<Mutex<Receiver<String>>>) {
    loop {
        let next = rx.lock().unwrap_or_else(|e| e.into_inner()).recv();
        match next {
            Ok(id) => run_job(&inner, &id, &mut |_| ControlFlow::Continue(())),
            Err(_) => return,
        }
    }
}

fn run_job(inner: &Inner, id: &str, observer: &mut dyn FnMut(&Progress<'_>) -> ControlFlow<()>) {
    let Some(job) = inner.store().job(id) else {
        tracing::warn!(%id, "unknown job");
        return;
    };
    if job.state != JobState::Queued {
        return;
    }
    let span = tracing::info_span!("job", %id);
    let _enter = span.enter();
    let result = execute(inner, &job, observer);
    if let Err(e) = result {
        tracing::error!(error = %e, "job abandoned: store unavailable");
    }
    inner.finished.notify_all();
}

fn execute(inner: &Inner, job: &Job, observer: &mut dyn FnMut(&Progress<'_>) -> ControlFlow<()>) -> Result<(), StoreError> {
    let id = job.id.as_str();
    let artifacts = inner.store().artifact_dir(id);
    let mut store_failure: Option<StoreError> = None;
    let outcome = process(&job.input, &job.options, &inner.services, &mut |p| {
        if observer(&p).is_break() {
            return ControlFlow::Break(());
        }
        let written = match &p {
            Progress::Entered(state) => {
                tracing::info!(state = %state, "stage");
                inner.store().append_event(JobEvent::State {
                    id: id.to_string(),
                    state: *state,
                })
            }
            Progress::Transcript(t) => {
                if let Err(e) = std::fs::create_dir_all(&artifacts)
                    .and_then(|_| std::fs::write(artifacts.join("transcript.jsonl"), to_fixture_text(t)))
                {
                    tracing::warn!(error = %e, "could not keep transcript artifact");
                }
                Ok(())
            }
        };
        match written {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                store_failure = Some(e);
                ControlFlow::Break(())
            }
        }
    });
    match outcome {
        Ok(out) => commit(inner, id, out),
        Err(Halt::Aborted) => match store_failure {
            Some(e) => Err(e),
            None => Ok(()),
        },
        Err(Halt::Failed(error)) => {
            tracing::warn!(%error, "job failed");
            inner.store().append_event(JobEvent::Failed {
                id: id.to_string(),
                error,
            })
        }
    }
}

/// Commit order: timings, report version, audit, completion. The report
/// version is the commit point; recovery completes any job that has one.
fn commit(inner: &Inner, id: &str, out: Outcome) -> Result<(), StoreError> {
    let canonical = match canonical_string(&out.report) {
        Ok(c) => c,
        Err(e) => {
            return inner.store().append_event(JobEvent::Failed {
                id: id.to_string(),
                error: JobError {
                    stage: JobState::Validating,
                    message: format!("validated report breaks invariants: {e}"),
                    attempts: None,
                },
            })
        }
    };
    let mut store = inner.store();
    store.append_event(JobEvent::Timings {
        id: id.to_string(),
        timings: out.timing,
    })?;
    store.append_version(ReportVersion {
        report_id: id.to_string(),
        version: 1,
        created_at: now_rfc3339(),
        source: VersionSource::Extraction(out.provenance),
        canonical,
    })?;
    store.append_event(JobEvent::Audit {
        report_id: id.to_string(),
        version: 1,
        flags: out.report.flags.clone(),
    })?;
    store.append_event(JobEvent::Completed {
        id: id.to_string(),
        version: 1,
    })?;
    tracing::info!(flags = out.report.flags.len(), total_s = out.timing.total_s, "job done");
    Ok(())
}
