use serde::{Deserialize, Serialize};

/// Substitution, deletion and insertion counts from one alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference word count.
    pub reference_len: usize,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// (S + D + I) / N. `reference_len` is never zero for values produced
    /// by the alignment code.
    pub fn wer(&self) -> f64 {
        self.errors() as f64 / self.reference_len as f64
    }

    pub fn wer_percent(&self) -> f64 {
        100.0 * self.wer()
    }

    /// Sums counts; the combined WER is recomputed over the summed N.
    pub fn combine(self, other: WerBreakdown) -> WerBreakdown {
        WerBreakdown {
            substitutions: self.substitutions + other.substitutions,
            deletions: self.deletions + other.deletions,
            insertions: self.insertions + other.insertions,
            reference_len: self.reference_len + other.reference_len,
        }
    }

    /// Formatted as `WER (S/D/I)` with two decimals.
    pub fn table_cell(&self) -> String {
        format!(
            "{:.2} ({}/{}/{})",
            self.wer_percent(),
            self.substitutions,
            self.deletions,
            self.insertions
        )
    }
}
