//! Transcription error rates, report quality scoring, stage timing and the
//! batch benchmark that produces all three tables.

mod benchmark;
mod quality;
mod timing;
mod wer;

pub use benchmark::{
    quality_csv, run_benchmark, timing_csv, timing_mean, wer_csv, wer_total, BenchmarkSetup, BenchmarkTables, Condition,
    QualityRow, TimingRow, WerRow, QUALITY_HEADER, TIMING_HEADER, WER_HEADER,
};
pub use quality::{score_output, NoRuns, QualityScores, RunQuality};
pub use timing::{StageTiming, OVERHEAD_BOUND_S};
pub use wer::{normalize_text, wer, wer_text, EmptyReference};
