//! 16-bit PCM WAV reading and writing.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a readable WAV file: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("{path}: unsupported format ({detail}); expected 16-bit PCM, mono or stereo")]
    Unsupported { path: PathBuf, detail: String },
    #[error("{path} contains no audio")]
    Empty { path: PathBuf },
}

/// Interleaved 16-bit samples with their format.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmAudio {
    pub channels: u16,
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl PcmAudio {
    pub fn read(path: &Path) -> Result<Self, AudioError> {
        let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if bytes.is_empty() {
            return Err(AudioError::Empty { path: path.to_path_buf() });
        }
        let audio = Self::from_wav_bytes(&bytes).map_err(|e| e.at(path))?;
        if audio.samples.is_empty() {
            return Err(AudioError::Empty { path: path.to_path_buf() });
        }
        Ok(audio)
    }

    pub fn from_wav_bytes(bytes: &[u8]) -> Result<Self, AudioError> {
        let malformed = |detail: String| AudioError::Malformed {
            path: PathBuf::new(),
            detail,
        };
        let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| malformed(e.to_string()))?;
        let spec = reader.spec();
        check_spec(&spec)?;
        // hound has validated the header and left the cursor at the first
        // sample; PCM16 data is plain little-endian pairs from here
        let len = reader.len() as usize;
        let start = reader.into_inner().position() as usize;
        let data = bytes
            .get(start..start + 2 * len)
            .ok_or_else(|| malformed(format!("data chunk declares {len} samples but the file is shorter")))?;
        let samples = data.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
        Ok(PcmAudio {
            channels: spec.channels,
            sample_rate: spec.sample_rate,
            samples,
        })
    }

    pub fn spec(&self) -> WavSpec {
        WavSpec {
            channels: self.channels,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        }
    }

    pub fn to_wav_bytes(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::with_capacity(44 + self.samples.len() * 2));
        {
            let mut w = WavWriter::new(&mut out, self.spec()).expect("in-memory writer");
            let mut w16 = w.get_i16_writer(self.samples.len() as u32);
            for &s in &self.samples {
                w16.write_sample(s);
            }
            w16.flush().expect("in-memory write");
            w.finalize().expect("in-memory finalize");
        }
        out.into_inner()
    }

    pub fn write(&self, path: &Path) -> Result<(), AudioError> {
        std::fs::write(path, self.to_wav_bytes()).map_err(|source| AudioError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    /// Averages channels into one.
    pub fn downmixed(&self) -> PcmAudio {
        if self.channels <= 1 {
            return self.clone();
        }
        let ch = self.channels as usize;
        let samples = self
            .samples
            .chunks_exact(ch)
            .map(|frame| {
                let sum: i32 = frame.iter().map(|&s| s as i32).sum();
                (sum as f64 / ch as f64).round() as i16
            })
            .collect();
        PcmAudio {
            channels: 1,
            sample_rate: self.sample_rate,
            samples,
        }
    }

    pub fn peak(&self) -> u16 {
        self.samples.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0)
    }

    /// Peak below roughly -40 dBFS.
    pub fn is_silent(&self) -> bool {
        self.peak() < 328
    }
}

fn check_spec(spec: &WavSpec) -> Result<(), AudioError> {
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::Unsupported {
            path: PathBuf::new(),
            detail: format!("{:?} {}-bit", spec.sample_format, spec.bits_per_sample),
        });
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(AudioError::Unsupported {
            path: PathBuf::new(),
            detail: format!("{} channels", spec.channels),
        });
    }
    Ok(())
}

/// Duration from the header alone.
pub fn wav_duration_s(path: &Path) -> Result<f64, AudioError> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => AudioError::Malformed {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    check_spec(&spec).map_err(|e| e.at(path))?;
    Ok(reader.duration() as f64 / spec.sample_rate as f64)
}

impl AudioError {
    fn at(self, p: &Path) -> Self {
        let path = p.to_path_buf();
        match self {
            AudioError::Malformed { detail, .. } => AudioError::Malformed { path, detail },
            AudioError::Unsupported { detail, .. } => AudioError::Unsupported { path, detail },
            AudioError::Empty { .. } => AudioError::Empty { path },
            io @ AudioError::Io { .. } => io,
        }
    }
}
