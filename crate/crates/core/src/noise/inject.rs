use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioError, PcmAudio};

/// Target signal-to-noise ratio. `Clean` passes audio through untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Snr {
    Clean,
    Db(f64),
}

impl FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clean" | "inf" | "+inf" => Ok(Snr::Clean),
            t => match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Snr::Db(v)),
                Ok(v) if v == f64::INFINITY => Ok(Snr::Clean),
                _ => Err(format!("`{s}` is not a finite SNR in dB or `clean`")),
            },
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Clean => f.write_str("clean"),
            Snr::Db(v) => write!(f, "{v} dB"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    /// Recorded background chatter, tiled from a seeded offset.
    Babble(PathBuf),
}

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("babble file {0} is silent")]
    SilentBabble(PathBuf),
    #[error("input audio is silent, SNR is undefined")]
    SilentInput,
    #[error("cannot copy {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct NoisyAudio {
    pub audio: PcmAudio,
    /// Measured after quantization and clipping.
    pub achieved_snr_db: f64,
    /// Fraction of samples clipped to the 16-bit range.
    pub clipped_ratio: f64,
}

fn power(x: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = x.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Whole-file SNR in dB of `noisy` against `clean`, treating the
/// difference as the injected noise.
pub fn measure_snr_db(clean: &PcmAudio, noisy: &PcmAudio) -> f64 {
    let ps = power(clean.samples.iter().map(|&s| f64::from(s)));
    let pn = power(
        clean
            .samples
            .iter()
            .zip(&noisy.samples)
            .map(|(&a, &b)| f64::from(b) - f64::from(a)),
    );
    10.0 * (ps / pn).log10()
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Paul Kellet's economy pink filter over white noise.
fn pink(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    white(rng, n)
        .into_iter()
        .map(|w| {
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect()
}

fn babble(rng: &mut ChaCha8Rng, path: &Path, n: usize) -> Result<Vec<f64>, NoiseError> {
    let src = PcmAudio::read(path)?.downmixed();
    if src.samples.iter().all(|&s| s == 0) {
        return Err(NoiseError::SilentBabble(path.to_path_buf()));
    }
    let len = src.samples.len();
    let offset = rng.random_range(0..len);
    Ok((0..n).map(|i| f64::from(src.samples[(offset + i) % len])).collect())
}

fn mix(signal: &[i16], noise: &[f64], gain: f64) -> (Vec<i16>, usize) {
    let mut clipped = 0;
    let out = signal
        .iter()
        .zip(noise)
        .map(|(&s, &n)| {
            let v = (f64::from(s) + gain * n).round();
            if !(f64::from(i16::MIN)..=f64::from(i16::MAX)).contains(&v) {
                clipped += 1;
            }
            v.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
        })
        .collect();
    (out, clipped)
}

/// Adds seeded noise scaled so the whole-file SNR hits `snr`.
///
/// The gain is set from signal and raw-noise power, then corrected up to
/// three times against the SNR measured on the quantized output.
pub fn inject_noise(input: &PcmAudio, snr: Snr, kind: &NoiseKind, seed: u64) -> Result<NoisyAudio, NoiseError> {
    let Snr::Db(target) = snr else {
        return Ok(NoisyAudio {
            audio: input.clone(),
            achieved_snr_db: f64::INFINITY,
            clipped_ratio: 0.0,
        });
    };
    let ps = power(input.samples.iter().map(|&s| f64::from(s)));
    if ps == 0.0 {
        return Err(NoiseError::SilentInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = input.samples.len();
    let noise = match kind {
        NoiseKind::White => white(&mut rng, n),
        NoiseKind::Pink => pink(&mut rng, n),
        NoiseKind::Babble(path) => babble(&mut rng, path, n)?,
    };
    let pn = power(noise.iter().copied());
    let target_pn = ps / 10f64.powf(target / 10.0);
    let mut gain = (target_pn / pn).sqrt();
    let (mut samples, mut clipped) = mix(&input.samples, &noise, gain);
    for _ in 0..3 {
        let actual = power(input.samples.iter().zip(&samples).map(|(&a, &b)| f64::from(b) - f64::from(a)));
        let err_db = 10.0 * (actual / target_pn).log10();
        if err_db.abs() < 0.01 || actual == 0.0 {
            break;
        }
        gain *= (target_pn / actual).sqrt();
        (samples, clipped) = mix(&input.samples, &noise, gain);
    }
    let audio = PcmAudio {
        samples,
        ..input.clone()
    };
    let achieved = measure_snr_db(input, &audio);
    let clipped_ratio = clipped as f64 / n as f64;
    if clipped > 0 {
        tracing::warn!(clipped_ratio, target, "samples clipped while mixing noise");
    }
    Ok(NoisyAudio {
        audio,
        achieved_snr_db: achieved,
        clipped_ratio,
    })
}

/// File-to-file variant. A clean target copies the input bytes verbatim.
pub fn inject_noise_file(input: &Path, output: &Path, snr: Snr, kind: &NoiseKind, seed: u64) -> Result<NoisyAudio, NoiseError> {
    let audio = PcmAudio::read(input)?;
    if snr == Snr::Clean {
        std::fs::copy(input, output).map_err(|source| NoiseError::Io {
            path: output.to_path_buf(),
            source,
        })?;
        return Ok(NoisyAudio {
            audio,
            achieved_snr_db: f64::INFINITY,
            clipped_ratio: 0.0,
        });
    }
    let out = inject_noise(&audio, snr, kind, seed)?;
    out.audio.write(output)?;
    Ok(out)
}
