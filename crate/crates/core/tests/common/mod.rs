#![allow(dead_code)]

pub mod gen;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fieldvoice_core::audio::PcmAudio;
use fieldvoice_core::extraction::PromptTemplate;
use fieldvoice_core::geo::{GazetteerGeocoder, GeoCache, GeoResolver};
use fieldvoice_core::model::ScenarioManifest;
use fieldvoice_core::noise::{build_manifest, inject_noise, NoiseKind, Snr};
use fieldvoice_core::pipeline::Services;
use fieldvoice_core::validation::GazetteerNer;

pub const SCENARIOS: [&str; 5] = ["s1", "s2", "s3", "s4", "s5"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn gazetteer() -> GazetteerGeocoder {
    GazetteerGeocoder::load(fixtures().join("gazetteer.csv")).unwrap()
}

pub fn services() -> Services {
    let g = gazetteer();
    let names: Vec<String> = g.names().map(str::to_string).collect();
    Services {
        template: PromptTemplate::default(),
        ner: Arc::new(GazetteerNer::new(names)),
        geo: Arc::new(GeoResolver::new(Box::new(g), GeoCache::in_memory())),
    }
}

/// Speech-like stand-in: a 300 Hz tone with a 3 Hz syllable envelope.
pub fn synth_speech(seconds: f64, rate: u32) -> PcmAudio {
    let n = (seconds * f64::from(rate)).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(rate);
            let env = 0.55 + 0.45 * (2.0 * std::f64::consts::PI * 3.0 * t).sin();
            (9000.0 * env * (2.0 * std::f64::consts::PI * 300.0 * t).sin()) as i16
        })
        .collect();
    PcmAudio {
        channels: 1,
        sample_rate: rate,
        samples,
    }
}

#[derive(serde::Deserialize)]
pub struct Counts {
    pub s: usize,
    pub d: usize,
    pub i: usize,
}

#[derive(serde::Deserialize)]
pub struct Edits {
    pub duration_s: f64,
    pub clean: Counts,
    pub noisy: Counts,
    pub reference_words: usize,
}

pub fn edits(scenario: &str) -> Edits {
    let text = std::fs::read_to_string(fixtures().join("scenarios").join(scenario).join("edits.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Copies one scenario into `root`, adds clean and noisy audio, and
/// builds its manifest.
pub fn materialize(root: &Path, scenario: &str) -> ScenarioManifest {
    let src = fixtures().join("scenarios").join(scenario);
    let dst = root.join(scenario);
    std::fs::create_dir_all(&dst).unwrap();
    for entry in std::fs::read_dir(&src).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dst.join(entry.file_name())).unwrap();
    }
    let clean = synth_speech(edits(scenario).duration_s, 8000);
    clean.write(&dst.join("clean.wav")).unwrap();
    let noisy = inject_noise(&clean, Snr::Db(10.0), &NoiseKind::White, 42).unwrap();
    noisy.audio.write(&dst.join("noisy.wav")).unwrap();
    build_manifest(&dst).unwrap()
}

pub fn materialize_all(root: &Path) -> Vec<ScenarioManifest> {
    SCENARIOS.iter().map(|s| materialize(root, s)).collect()
}

/// Compares against a checked-in golden, or rewrites it when
/// `UPDATE_GOLDENS` is set.
pub fn assert_golden(name: &str, actual: &str) {
    let path = fixtures().join("goldens").join(name);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("golden {}: {e}", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}
