//! Jobs that carry audio or a transcript through every stage, persisted to
//! an append-only data directory.

mod job;
mod service;
mod stages;
mod store;

pub use job::{Job, JobError, JobInput, JobOptions, JobState};
pub use service::{apply_override, Override, OverrideError, OverrideOutcome, Pipeline, SubmitError};
pub use stages::{llm_for_input, process, Halt, Outcome, Progress, Services};
pub use store::{JobEvent, Recovery, ReportVersion, Store, StoreError, VersionSource, ARTIFACTS_DIR, JOBS_LOG, REPORTS_LOG};
