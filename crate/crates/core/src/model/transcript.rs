use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentError {
    #[error("segment starts at {start_ms} ms but ends at {end_ms} ms")]
    Reversed { start_ms: u64, end_ms: u64 },
    #[error("segment text is empty")]
    EmptyText,
    #[error("sentiment {0} is outside [-1, 1]")]
    SentimentRange(f64),
}

impl TranscriptSegment {
    pub fn check(&self) -> Result<(), SegmentError> {
        if self.start_ms > self.end_ms {
            return Err(SegmentError::Reversed {
                start_ms: self.start_ms,
                end_ms: self.end_ms,
            });
        }
        if self.text.trim().is_empty() {
            return Err(SegmentError::EmptyText);
        }
        if let Some(s) = self.sentiment {
            if !(-1.0..=1.0).contains(&s) {
                return Err(SegmentError::SentimentRange(s));
            }
        }
        Ok(())
    }
}

/// ASR output: ordered segments plus the derived aggregates the validators
/// consume. Built only through [`TranscriptBundle::new`] so the derived
/// fields always agree with the segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptBundle {
    segments: Vec<TranscriptSegment>,
    full_text: String,
    speaker_count: usize,
    mean_sentiment: Option<f64>,
}

impl TranscriptBundle {
    /// Sorts segments by start time (stable) and derives the aggregates.
    pub fn new(mut segments: Vec<TranscriptSegment>) -> Result<Self, (usize, SegmentError)> {
        for (i, seg) in segments.iter().enumerate() {
            seg.check().map_err(|e| (i, e))?;
        }
        segments.sort_by_key(|s| s.start_ms);
        let full_text = segments
            .iter()
            .map(|s| s.text.trim())
            .collect::<Vec<_>>()
            .join(" ");
        let speakers: BTreeSet<&str> = segments.iter().filter_map(|s| s.speaker.as_deref()).collect();
        let sentiments: Vec<f64> = segments.iter().filter_map(|s| s.sentiment).collect();
        let mean_sentiment = if sentiments.is_empty() {
            None
        } else {
            Some(sentiments.iter().sum::<f64>() / sentiments.len() as f64)
        };
        Ok(TranscriptBundle {
            speaker_count: speakers.len(),
            segments,
            full_text,
            mean_sentiment,
        })
    }

    pub fn segments(&self) -> &[TranscriptSegment] {
        &self.segments
    }

    pub fn full_text(&self) -> &str {
        &self.full_text
    }

    pub fn speaker_count(&self) -> usize {
        self.speaker_count
    }

    pub fn mean_sentiment(&self) -> Option<f64> {
        self.mean_sentiment
    }

    pub fn has_speakers(&self) -> bool {
        self.speaker_count > 0
    }

    pub fn duration_ms(&self) -> u64 {
        self.segments.iter().map(|s| s.end_ms - s.start_ms).sum()
    }

    /// Drops speaker labels and/or sentiment the producing backend did not
    /// declare.
    pub fn restricted(self, speakers: bool, sentiment: bool) -> Self {
        if speakers && sentiment {
            return self;
        }
        let segments = self
            .segments
            .into_iter()
            .map(|mut s| {
                if !speakers {
                    s.speaker = None;
                }
                if !sentiment {
                    s.sentiment = None;
                }
                s
            })
            .collect();
        TranscriptBundle::new(segments).expect("segments were already valid")
    }
}

impl<'de> Deserialize<'de> for TranscriptBundle {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            segments: Vec<TranscriptSegment>,
        }
        let raw = Raw::deserialize(deserializer)?;
        TranscriptBundle::new(raw.segments)
            .map_err(|(i, e)| serde::de::Error::custom(format!("segment {i}: {e}")))
    }
}
