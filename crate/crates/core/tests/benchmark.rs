mod common;

use fieldvoice_core::eval::{
    normalize_text, quality_csv, run_benchmark, timing_csv, wer_csv, BenchmarkSetup, BenchmarkTables, QUALITY_HEADER,
    TIMING_HEADER, WER_HEADER,
};
use fieldvoice_core::pipeline::JobOptions;

/// Plain Levenshtein distance over tokens, kept separate from the library
/// alignment.
fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

fn tables(root: &std::path::Path) -> (Vec<fieldvoice_core::model::ScenarioManifest>, BenchmarkTables) {
    let manifests = common::materialize_all(root);
    let setup = BenchmarkSetup {
        services: common::services(),
        options: JobOptions::replay(),
        runs_per_scenario: 1,
    };
    let t = run_benchmark(&manifests, &setup);
    (manifests, t)
}

fn transcript_text(path: &std::path::Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["text"].as_str().unwrap().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn wer_rows_match_constructed_edits() {
    let work = tempfile::tempdir().unwrap();
    let (manifests, t) = tables(work.path());
    for (k, m) in manifests.iter().enumerate() {
        let e = common::edits(common::SCENARIOS[k]);
        let reference = normalize_text(&std::fs::read_to_string(&m.reference_transcript).unwrap());
        assert_eq!(reference.len(), e.reference_words);
        for (row, counts, file) in [
            (&t.wer_clean[k], &e.clean, "clean.jsonl"),
            (&t.wer_noisy[k], &e.noisy, "noisy.jsonl"),
        ] {
            let b = row.breakdown.unwrap_or_else(|| panic!("{}: {:?}", row.scenario, row.error));
            assert_eq!((b.substitutions, b.deletions, b.insertions), (counts.s, counts.d, counts.i), "{}", row.scenario);
            assert_eq!(b.reference_len, e.reference_words);
            let hyp = normalize_text(&transcript_text(&m.reference_transcript.parent().unwrap().join(file)));
            assert_eq!(b.errors(), edit_distance(&reference, &hyp), "{} {file}", row.scenario);
        }
    }
    let total = fieldvoice_core::eval::wer_total(&t.wer_clean).unwrap();
    assert_eq!(total.errors(), 4 + 6 + 5 + 6 + 7);
    assert_eq!(total.reference_len, 140 + 163 + 121 + 124 + 141);
}

#[test]
fn quality_and_timing_tables() {
    let work = tempfile::tempdir().unwrap();
    let (_, t) = tables(work.path());
    let speaker: Vec<usize> = t.quality_clean.iter().map(|r| r.scores.unwrap().speaker).collect();
    assert_eq!(speaker, [1, 0, 0, 1, 0]);
    let qos: Vec<usize> = t.quality_clean.iter().map(|r| r.scores.unwrap().qos).collect();
    assert_eq!(qos, [1, 1, 1, 1, 0]);
    assert!(t.quality_clean.iter().all(|r| {
        let s = r.scores.unwrap();
        s.location == 1 && s.unit == 1
    }));
    assert_eq!(t.quality_clean, t.quality_noisy);
    assert!(t.timing.iter().all(|r| r.timing.unwrap().partition_holds(0.05)));

    let csv = quality_csv(&t.quality_clean);
    assert_eq!(csv.lines().next().unwrap(), QUALITY_HEADER.join(","));
    assert_eq!(csv.lines().nth(2).unwrap(), "scenario-2,1,100.00,100.00,0.00,100.00,");
    let timing = timing_csv(&t.timing);
    assert_eq!(timing.lines().next().unwrap(), TIMING_HEADER.join(","));
    assert!(timing.lines().last().unwrap().starts_with("Mean,5,"));
}

#[test]
fn wer_csv_has_total_row() {
    let work = tempfile::tempdir().unwrap();
    let (_, t) = tables(work.path());
    let csv = wer_csv(&t.wer_clean);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], WER_HEADER.join(","));
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1], "scenario-1,replay_fixture:sidecar,140,2,1,1,2.86,");
    // 28 errors over 689 reference words
    assert_eq!(lines[6], "Total,replay_fixture:sidecar,689,14,9,5,4.06,");

    let out = tempfile::tempdir().unwrap();
    t.write_to(out.path()).unwrap();
    for f in ["wer_clean.csv", "wer_noisy.csv", "quality_clean.csv", "quality_noisy.csv", "timing.csv", "tables.md"] {
        assert!(out.path().join(f).is_file(), "{f}");
    }
    let md = std::fs::read_to_string(out.path().join("tables.md")).unwrap();
    assert!(md.contains("scenario-5"));
}

#[test]
fn missing_noisy_audio_becomes_error_row() {
    let work = tempfile::tempdir().unwrap();
    let mut m = common::materialize(work.path(), "s1");
    m.audio_noisy = None;
    let setup = BenchmarkSetup {
        services: common::services(),
        options: JobOptions::replay(),
        runs_per_scenario: 2,
    };
    let t = run_benchmark(&[m], &setup);
    assert_eq!(t.wer_noisy[0].error.as_deref(), Some("no noisy audio"));
    assert!(t.wer_noisy[0].breakdown.is_none());
    assert!(t.wer_clean[0].breakdown.is_some());
    assert_eq!(t.timing[0].runs, 2);
    let csv = wer_csv(&t.wer_noisy);
    assert_eq!(csv.lines().nth(1).unwrap(), "scenario-1,replay_fixture:sidecar,,,,,,no noisy audio");
    assert!(csv.lines().nth(2).unwrap().starts_with("Total,replay_fixture:sidecar,,"));
}
