//! Dataset tooling: controlled-SNR noise injection and scenario manifests.

mod inject;
mod manifest;

pub use inject::{inject_noise, inject_noise_file, measure_snr_db, NoiseError, NoiseKind, NoisyAudio, Snr};
pub use manifest::{
    build_manifest, discover_manifests, load_manifest, ManifestError, CLEAN_AUDIO, GROUND_TRUTH, LLM_SCRIPT,
    MANIFEST_FILE, NOISY_AUDIO, REFERENCE, SCENARIO_INFO,
};
