use crate::model::WerBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("reference transcript has no words, WER is undefined")]
pub struct EmptyReference;

/// Lowercases, strips punctuation and splits on whitespace. Apostrophes,
/// hyphens and slashes survive only between two letters or digits, so
/// `Mother's`, `follow-up` and `Mbit/s` stay single words.
pub fn normalize_text(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut cleaned = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else if matches!(c, '\'' | '’' | '-' | '/') {
            let before = i > 0 && chars[i - 1].is_alphanumeric();
            let after = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            before && after
        } else {
            false
        };
        cleaned.push(match (keep, c) {
            (true, '’') => '\'',
            (true, c) => c,
            (false, _) => ' ',
        });
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Diagonal,
    Delete,
    Insert,
}

/// Minimum-edit alignment with unit costs.
///
/// Among equal-cost alignments the one with the most substitutions (fewest
/// deletion/insertion pairs) wins; remaining ties are broken by walking back
/// from the end preferring diagonal moves, then deletions, then insertions,
/// which places edits as early as possible.
pub fn wer<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Result<WerBreakdown, EmptyReference> {
    let n = reference.len();
    let m = hypothesis.len();
    if n == 0 {
        return Err(EmptyReference);
    }
    // (edit cost, insertions + deletions), compared lexicographically
    let mut best = vec![vec![(0usize, 0usize); m + 1]; n + 1];
    for (i, row) in best.iter_mut().enumerate() {
        row[0] = (i, i);
    }
    for j in 0..=m {
        best[0][j] = (j, j);
    }
    for i in 1..=n {
        for j in 1..=m {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let d = best[i - 1][j - 1];
            let diag = (d.0 + usize::from(!same), d.1);
            let del = (best[i - 1][j].0 + 1, best[i - 1][j].1 + 1);
            let ins = (best[i][j - 1].0 + 1, best[i][j - 1].1 + 1);
            best[i][j] = diag.min(del).min(ins);
        }
    }

    let mut out = WerBreakdown {
        reference_len: n,
        ..WerBreakdown::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = best[i][j];
        let step = if i > 0 && j > 0 {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let d = best[i - 1][j - 1];
            if (d.0 + usize::from(!same), d.1) == here {
                Step::Diagonal
            } else if (best[i - 1][j].0 + 1, best[i - 1][j].1 + 1) == here {
                Step::Delete
            } else {
                Step::Insert
            }
        } else if i > 0 {
            Step::Delete
        } else {
            Step::Insert
        };
        match step {
            Step::Diagonal => {
                if reference[i - 1].as_ref() != hypothesis[j - 1].as_ref() {
                    out.substitutions += 1;
                }
                i -= 1;
                j -= 1;
            }
            Step::Delete => {
                out.deletions += 1;
                i -= 1;
            }
            Step::Insert => {
                out.insertions += 1;
                j -= 1;
            }
        }
    }
    Ok(out)
}

/// Normalizes both texts and aligns them.
pub fn wer_text(reference: &str, hypothesis: &str) -> Result<WerBreakdown, EmptyReference> {
    wer(&normalize_text(reference), &normalize_text(hypothesis))
}
