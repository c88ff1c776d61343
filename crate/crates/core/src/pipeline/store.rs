//! Append-only persistence: `jobs.log` for job events and `reports.log`
//! for immutable report versions, one JSON record per line, each write
//! synced before it is acknowledged.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::job::{Job, JobError, JobInput, JobOptions, JobState};
use crate::eval::StageTiming;
use crate::extraction::Provenance;
use crate::model::{SemanticReport, ValidationFlag};

pub const JOBS_LOG: &str = "jobs.log";
pub const REPORTS_LOG: &str = "reports.log";
pub const ARTIFACTS_DIR: &str = "artifacts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JobEvent {
    Submitted {
        id: String,
        at: String,
        input: JobInput,
        options: Box<JobOptions>,
    },
    State {
        id: String,
        state: JobState,
    },
    Timings {
        id: String,
        timings: StageTiming,
    },
    Audit {
        report_id: String,
        version: u32,
        flags: Vec<ValidationFlag>,
    },
    Completed {
        id: String,
        version: u32,
    },
    Failed {
        id: String,
        error: JobError,
    },
}

/// Where a report version came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum VersionSource {
    Extraction(Provenance),
    Override { actor: String, change: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportVersion {
    pub report_id: String,
    pub version: u32,
    pub created_at: String,
    pub source: VersionSource,
    /// Canonical report text.
    pub canonical: String,
}

impl ReportVersion {
    pub fn report(&self) -> Result<SemanticReport, crate::model::Rejection> {
        crate::canonical::parse_report(&self.canonical)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line} is corrupt: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("store stopped accepting writes")]
    Halted,
}

/// What opening a store repaired.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recovery {
    pub torn_bytes: u64,
    pub duplicate_versions: usize,
    /// Jobs that were mid-run and now have a terminal state.
    pub settled: Vec<String>,
    /// Jobs still queued, to be run again.
    pub requeued: Vec<String>,
}

/// Simulated process death for crash testing: after `writes` more records
/// the store writes `torn` bytes of the next one and refuses all further
/// writes.
#[derive(Debug, Clone, Copy)]
struct Kill {
    writes: usize,
    torn: usize,
}

pub struct Store {
    dir: PathBuf,
    jobs_file: File,
    reports_file: File,
    order: Vec<String>,
    jobs: HashMap<String, Job>,
    versions: BTreeMap<String, Vec<ReportVersion>>,
    audited: HashMap<String, u32>,
    kill: Option<Kill>,
    halted: bool,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads complete lines, truncating any unterminated or unparseable tail.
/// A bad line followed by good ones is corruption, not a torn write.
fn replay_file<T: DeserializeOwned>(path: &Path) -> Result<(File, Vec<T>, u64), StoreError> {
    let mut file = OpenOptions::new()
        .read(true)
        .append(true)
        .create(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(io_err(path))?;
    let mut records = Vec::new();
    let mut good_end = 0usize;
    let mut pending_bad: Option<(usize, String)> = None;
    let mut start = 0usize;
    let mut line_no = 0;
    while let Some(off) = bytes[start..].iter().position(|&b| b == b'\n') {
        line_no += 1;
        let line = &bytes[start..start + off];
        let next = start + off + 1;
        if let Some((line, message)) = pending_bad.take() {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                line,
                message,
            });
        }
        if !line.iter().all(u8::is_ascii_whitespace) {
            match serde_json::from_slice::<T>(line) {
                Ok(r) => {
                    records.push(r);
                    good_end = next;
                }
                Err(e) => pending_bad = Some((line_no, e.to_string())),
            }
        } else {
            good_end = next;
        }
        start = next;
    }
    let torn = (bytes.len() - good_end) as u64;
    if torn > 0 {
        tracing::warn!(path = %path.display(), torn, "truncating incomplete log tail");
        file.set_len(good_end as u64).map_err(io_err(path))?;
        file.sync_all().map_err(io_err(path))?;
    }
    file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
    Ok((file, records, torn))
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<(Store, Recovery), StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(dir.join(ARTIFACTS_DIR)).map_err(io_err(&dir))?;
        let (jobs_file, events, torn_jobs) = replay_file::<JobEvent>(&dir.join(JOBS_LOG))?;
        let (reports_file, versions, torn_reports) = replay_file::<ReportVersion>(&dir.join(REPORTS_LOG))?;
        let mut store = Store {
            dir,
            jobs_file,
            reports_file,
            order: Vec::new(),
            jobs: HashMap::new(),
            versions: BTreeMap::new(),
            audited: HashMap::new(),
            kill: None,
            halted: false,
        };
        let mut recovery = Recovery {
            torn_bytes: torn_jobs + torn_reports,
            ..Recovery::default()
        };
        for v in versions {
            let list = store.versions.entry(v.report_id.clone()).or_default();
            if list.iter().any(|x| x.version == v.version) {
                recovery.duplicate_versions += 1;
            } else {
                list.push(v);
            }
        }
        for list in store.versions.values_mut() {
            list.sort_by_key(|v| v.version);
        }
        if recovery.duplicate_versions > 0 {
            store.compact_versions()?;
        }
        for e in events {
            store.apply(&e);
        }
        store.settle(&mut recovery)?;
        Ok((store, recovery))
    }

    /// Rewrites the version log without duplicates: temp file, fsync,
    /// rename. A crash at any point leaves either the old or the new log.
    fn compact_versions(&mut self) -> Result<(), StoreError> {
        let path = self.dir.join(REPORTS_LOG);
        let tmp = self.dir.join(format!("{REPORTS_LOG}.tmp"));
        let mut text = String::new();
        for v in self.versions.values().flatten() {
            text.push_str(&serde_json::to_string(v).expect("report versions serialize"));
            text.push('\n');
        }
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        self.reports_file = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
        tracing::warn!(path = %path.display(), "dropped duplicate report versions");
        Ok(())
    }

    /// Brings jobs interrupted mid-run to a terminal state.
    fn settle(&mut self, recovery: &mut Recovery) -> Result<(), StoreError> {
        for id in self.order.clone() {
            let job = &self.jobs[&id];
            match job.state {
                JobState::Queued => recovery.requeued.push(id),
                s if s.is_terminal() => {}
                stage => {
                    if let Some(v) = self.latest(&id).cloned() {
                        if self.audited.get(&id) != Some(&v.version) {
                            let flags = v.report().map(|r| r.flags).unwrap_or_default();
                            self.append_event(JobEvent::Audit {
                                report_id: id.clone(),
                                version: v.version,
                                flags,
                            })?;
                        }
                        self.append_event(JobEvent::Completed {
                            id: id.clone(),
                            version: v.version,
                        })?;
                    } else {
                        self.append_event(JobEvent::Failed {
                            id: id.clone(),
                            error: JobError {
                                stage,
                                message: "interrupted by restart".into(),
                                attempts: None,
                            },
                        })?;
                    }
                    recovery.settled.push(id);
                }
            }
        }
        Ok(())
    }

    fn apply(&mut self, e: &JobEvent) {
        match e {
            JobEvent::Submitted { id, at, input, options } => {
                if self.jobs.contains_key(id) {
                    return;
                }
                self.order.push(id.clone());
                self.jobs.insert(
                    id.clone(),
                    Job {
                        id: id.clone(),
                        input: input.clone(),
                        options: (**options).clone(),
                        state: JobState::Queued,
                        submitted_at: at.clone(),
                        timings: StageTiming::default(),
                        report: None,
                        report_version: None,
                        error: None,
                    },
                );
            }
            JobEvent::State { id, state } => {
                if let Some(j) = self.jobs.get_mut(id) {
                    if j.state.can_move_to(*state) {
                        j.state = *state;
                    }
                }
            }
            JobEvent::Timings { id, timings } => {
                if let Some(j) = self.jobs.get_mut(id) {
                    j.timings = *timings;
                }
            }
            JobEvent::Audit { report_id, version, .. } => {
                self.audited.insert(report_id.clone(), *version);
            }
            JobEvent::Completed { id, version } => {
                let report = self.latest(id).and_then(|v| v.report().ok());
                if let Some(j) = self.jobs.get_mut(id) {
                    if j.state.can_move_to(JobState::Done) && report.is_some() {
                        j.state = JobState::Done;
                        j.report_version = Some(*version);
                    }
                }
            }
            JobEvent::Failed { id, error } => {
                if let Some(j) = self.jobs.get_mut(id) {
                    if j.state.can_move_to(JobState::Failed) {
                        j.state = JobState::Failed;
                        j.error = Some(error.clone());
                    }
                }
            }
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifact_dir(&self, job_id: &str) -> PathBuf {
        self.dir.join(ARTIFACTS_DIR).join(job_id)
    }

    #[doc(hidden)]
    pub fn kill_after(&mut self, writes: usize, torn_bytes: usize) {
        self.kill = Some(Kill {
            writes,
            torn: torn_bytes,
        });
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    fn write_line(&mut self, reports: bool, line: String) -> Result<(), StoreError> {
        if self.halted {
            return Err(StoreError::Halted);
        }
        let path = self.dir.join(if reports { REPORTS_LOG } else { JOBS_LOG });
        let file = if reports { &mut self.reports_file } else { &mut self.jobs_file };
        if let Some(k) = self.kill.as_mut() {
            if k.writes == 0 {
                let cut = k.torn.min(line.len());
                file.write_all(&line.as_bytes()[..cut]).map_err(io_err(&path))?;
                self.halted = true;
                return Err(StoreError::Halted);
            }
            k.writes -= 1;
        }
        file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))
    }

    pub fn append_event(&mut self, e: JobEvent) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(&e).expect("job events serialize");
        line.push('\n');
        self.write_line(false, line)?;
        self.apply(&e);
        Ok(())
    }

    /// Appends a version unless that (report, version) pair already exists.
    pub fn append_version(&mut self, v: ReportVersion) -> Result<bool, StoreError> {
        if self
            .versions
            .get(&v.report_id)
            .is_some_and(|l| l.iter().any(|x| x.version == v.version))
        {
            return Ok(false);
        }
        let mut line = serde_json::to_string(&v).expect("report versions serialize");
        line.push('\n');
        self.write_line(true, line)?;
        self.versions.entry(v.report_id.clone()).or_default().push(v);
        Ok(true)
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        let mut job = self.jobs.get(id)?.clone();
        if job.state == JobState::Done {
            job.report = self.latest(id).and_then(|v| v.report().ok());
            job.report_version = self.latest(id).map(|v| v.version);
        }
        Some(job)
    }

    pub fn jobs(&self) -> Vec<Job> {
        self.order.iter().filter_map(|id| self.job(id)).collect()
    }

    pub fn latest(&self, report_id: &str) -> Option<&ReportVersion> {
        self.versions.get(report_id).and_then(|l| l.last())
    }

    pub fn versions(&self, report_id: &str) -> &[ReportVersion] {
        self.versions.get(report_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn report_ids(&self) -> impl Iterator<Item = &str> {
        self.versions.keys().map(String::as_str)
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
