mod common;

use std::time::Duration;

use fieldvoice_core::canonical::canonical_string;
use fieldvoice_core::extraction::LlmBackendDescriptor;
use fieldvoice_core::geo::{GeoCache, GeoResolver, GeocodingSource, SourceHit};
use fieldvoice_core::model::{EmergencyLevel, FlagKind, GeoStatus};
use fieldvoice_core::pipeline::{
    JobInput, JobOptions, JobState, Override, OverrideError, Pipeline, Services, SubmitError, VersionSource,
};
use fieldvoice_core::retry::{CallError, RetryFailure, RetryPolicy};

const WAIT: Duration = Duration::from_secs(30);

fn pipeline(dir: &std::path::Path, services: Services) -> Pipeline {
    Pipeline::open(dir, services, 2).unwrap().0
}

fn listing_options() -> JobOptions {
    JobOptions {
        llm: LlmBackendDescriptor::scripted(common::fixtures().join("listing1_llm.json").display().to_string()),
        ..JobOptions::replay()
    }
}

#[test]
fn scenarios_reach_done_and_match_goldens() {
    let work = tempfile::tempdir().unwrap();
    let manifests = common::materialize_all(work.path());
    let data = tempfile::tempdir().unwrap();
    let p = pipeline(data.path(), common::services());
    let ids: Vec<String> = manifests
        .iter()
        .map(|m| p.submit(JobInput::Audio(m.audio_clean.clone()), JobOptions::replay()).unwrap())
        .collect();
    for (m, id) in manifests.iter().zip(&ids) {
        let job = p.wait(id, WAIT).unwrap();
        assert_eq!(job.state, JobState::Done, "{}: {:?}", m.id, job.error);
        let report = job.report.unwrap();
        common::assert_golden(&format!("{}.json", m.id), &canonical_string(&report).unwrap());
        assert!(data.path().join("artifacts").join(id).join("transcript.jsonl").is_file());
    }
}

#[test]
fn listing_job_reproduces_the_listing() {
    let data = tempfile::tempdir().unwrap();
    let p = pipeline(data.path(), common::services());
    let id = p
        .submit(
            JobInput::Transcript(common::fixtures().join("listing1_transcript.jsonl")),
            listing_options(),
        )
        .unwrap();
    let job = p.wait(&id, WAIT).unwrap();
    assert_eq!(job.state, JobState::Done, "{:?}", job.error);
    assert_eq!(job.timings.transcription_s, 0.0);
    let mut report = job.report.unwrap();
    assert!(report.flags.is_empty(), "{:?}", report.flags);
    assert_eq!(report.geo.len(), 2);
    assert!(report.geo.iter().all(|g| g.status == GeoStatus::Resolved));
    report.geo.clear();
    let listing = std::fs::read_to_string(common::fixtures().join("listing1.json")).unwrap();
    assert_eq!(canonical_string(&report).unwrap(), listing);
}

#[test]
fn schema_failures_fail_at_extracting_after_bounded_attempts() {
    let data = tempfile::tempdir().unwrap();
    let script = data.path().join("bad.json");
    std::fs::write(&script, r#"{"responses": [{"locations": [], "emergency_level": "catastrophic", "units": []}]}"#).unwrap();
    let p = pipeline(data.path(), common::services());
    let mut options = listing_options();
    options.llm = LlmBackendDescriptor::scripted(script.display().to_string());
    let id = p
        .submit(JobInput::Transcript(common::fixtures().join("listing1_transcript.jsonl")), options)
        .unwrap();
    let job = p.wait(&id, WAIT).unwrap();
    assert_eq!(job.state, JobState::Failed);
    let err = job.error.unwrap();
    assert_eq!(err.stage, JobState::Extracting);
    assert_eq!(err.attempts, Some(3));
    assert!(job.report.is_none());
}

#[test]
fn submissions_are_checked_up_front() {
    let data = tempfile::tempdir().unwrap();
    let p = pipeline(data.path(), common::services());
    let missing = p.submit(JobInput::Audio(data.path().join("nope.wav")), JobOptions::replay());
    assert!(matches!(missing, Err(SubmitError::MissingInput(_))));
    let mut bad = listing_options();
    bad.calibration.escalate_threshold = 0.9;
    let r = p.submit(JobInput::Transcript(common::fixtures().join("listing1_transcript.jsonl")), bad);
    assert!(matches!(r, Err(SubmitError::InvalidOptions(_))));
    assert!(p.jobs().is_empty());
}

struct Offline;

impl GeocodingSource for Offline {
    fn name(&self) -> &str {
        "offline"
    }
    fn lookup(&self, _: &str, _: usize) -> Result<Vec<SourceHit>, RetryFailure> {
        Err(RetryFailure {
            attempts: 3,
            last: CallError::Transport("network unreachable".into()),
        })
    }
}

#[test]
fn offline_geocoder_still_completes_jobs() {
    let data = tempfile::tempdir().unwrap();
    let mut services = common::services();
    services.geo = std::sync::Arc::new(GeoResolver::new(Box::new(Offline), GeoCache::in_memory()));
    let p = pipeline(data.path(), services);
    let id = p
        .submit(JobInput::Transcript(common::fixtures().join("listing1_transcript.jsonl")), listing_options())
        .unwrap();
    let job = p.wait(&id, WAIT).unwrap();
    assert_eq!(job.state, JobState::Done);
    let report = job.report.unwrap();
    let unresolved: Vec<_> = report.flags.iter().filter(|f| f.kind == FlagKind::GeocodeUnresolved).collect();
    assert_eq!(unresolved.len(), 2);
    assert!(report.geo.iter().all(|g| g.candidates.is_empty()));
}

#[test]
fn overrides_append_versions() {
    let work = tempfile::tempdir().unwrap();
    let m = common::materialize(work.path(), "s5");
    let data = tempfile::tempdir().unwrap();
    let p = pipeline(data.path(), common::services());
    let id = p.submit(JobInput::Audio(m.audio_clean.clone()), JobOptions::replay()).unwrap();
    let job = p.wait(&id, WAIT).unwrap();
    let report = job.report.unwrap();
    let (_, dock) = report.geo_for("Dock Street").unwrap();
    assert_eq!(dock.status, GeoStatus::Ambiguous);
    assert_eq!(dock.candidates.len(), 3);

    let choose = Override::GeoChoice {
        query: "Dock Street".into(),
        index: 1,
    };
    let v2 = p.record_override(&id, &choose, "dispatcher", Some(1)).unwrap();
    assert!(v2.changed);
    assert_eq!(v2.version.version, 2);
    let r2 = v2.version.report().unwrap();
    let (_, dock) = r2.geo_for("Dock Street").unwrap();
    assert_eq!((dock.status, dock.chosen), (GeoStatus::Resolved, Some(1)));
    assert!(!r2
        .flags
        .iter()
        .any(|f| f.kind == FlagKind::GeocodeAmbiguous && f.subject.as_deref() == Some("Dock Street")));
    assert!(r2.flags.iter().any(|f| f.kind == FlagKind::OperatorOverride));
    assert!(matches!(v2.version.source, VersionSource::Override { ref actor, .. } if actor == "dispatcher"));

    // repeating it changes nothing
    let again = p.record_override(&id, &choose, "dispatcher", None).unwrap();
    assert!(!again.changed);
    assert_eq!(again.version.version, 2);

    let stale = p.record_override(&id, &Override::Severity { level: EmergencyLevel::Minor }, "x", Some(1));
    assert!(matches!(stale, Err(OverrideError::VersionConflict { actual: 2, .. })));

    let lvl = p
        .record_override(&id, &Override::Severity { level: EmergencyLevel::Severe }, "dispatcher", None)
        .unwrap();
    assert_eq!(lvl.version.version, 3);
    let r3 = lvl.version.report().unwrap();
    assert_eq!(r3.emergency_level, EmergencyLevel::Severe);
    assert_eq!(canonical_string(&r3).unwrap(), lvl.version.canonical);

    assert!(matches!(
        p.record_override("nope", &choose, "x", None),
        Err(OverrideError::UnknownReport(_))
    ));
    let bad = Override::GeoChoice {
        query: "Marina Green".into(),
        index: 0,
    };
    assert!(matches!(p.record_override(&id, &bad, "x", None), Err(OverrideError::Invalid(_))));

    let versions = p.report_versions(&id);
    assert_eq!(versions.iter().map(|v| v.version).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(versions[0].canonical, canonical_string(&report).unwrap());
    drop(p);

    // everything survives a restart
    let (p, recovery) = Pipeline::open(data.path(), common::services(), 0).unwrap();
    assert!(recovery.settled.is_empty() && recovery.torn_bytes == 0);
    assert_eq!(p.report_versions(&id).len(), 3);
    let job = p.job(&id).unwrap();
    assert_eq!(job.state, JobState::Done);
    assert_eq!(job.report.unwrap().emergency_level, EmergencyLevel::Severe);
}

#[test]
fn stage_delays_show_up_in_timings() {
    let work = tempfile::tempdir().unwrap();
    let m = common::materialize(work.path(), "s1");
    let data = tempfile::tempdir().unwrap();
    let p = pipeline(data.path(), common::services());
    let mut options = JobOptions::replay();
    options.asr.delay_ms = 300;
    options.llm.delay_ms = 600;
    let id = p.submit(JobInput::Audio(m.audio_clean.clone()), options).unwrap();
    let job = p.wait(&id, WAIT).unwrap();
    assert_eq!(job.state, JobState::Done);
    let t = job.timings;
    assert!((t.transcription_s - 0.3).abs() < 0.1, "{t:?}");
    assert!((t.llm_s - 0.6).abs() < 0.1, "{t:?}");
    assert!(t.partition_holds(0.5) && t.overhead_bounded(0.5), "{t:?}");
}

#[test]
fn transport_failures_fail_at_the_right_stage() {
    let work = tempfile::tempdir().unwrap();
    let m = common::materialize(work.path(), "s1");
    let data = tempfile::tempdir().unwrap();
    let p = pipeline(data.path(), common::services());
    let mut options = JobOptions::replay();
    options.llm = LlmBackendDescriptor::http("http://127.0.0.1:9/api/generate", "m");
    options.llm.retry = RetryPolicy::no_wait(1);
    options.extraction.transport_retry = RetryPolicy::no_wait(2);
    let id = p.submit(JobInput::Audio(m.audio_clean.clone()), options).unwrap();
    let job = p.wait(&id, WAIT).unwrap();
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.error.unwrap().stage, JobState::Extracting);
    // the transcript was kept for debugging
    assert!(data.path().join("artifacts").join(&id).join("transcript.jsonl").is_file());
}
