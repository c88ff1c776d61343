//! Named-entity recognition used to confirm location references.
//!
//! Offline recognition combines a gazetteer (one place name per line,
//! UTF-8, `#` comments allowed) with a capitalization heuristic for names
//! built around a place keyword ("Dock Street", "Praça da Ribeira").
//!
//! The NER service contract is `POST <endpoint>` with `{"text": "..."}`,
//! answered by `{"entities": [{"text", "label", "start", "end"}]}` where
//! offsets are char indices into the submitted text.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{find_normalized, normalize_location};
use crate::retry::{classify_http, http_agent, CallError, RetryFailure, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NerLabel {
    Location,
    Organization,
    Person,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerEntity {
    pub text: String,
    pub label: NerLabel,
    pub char_start: usize,
    pub char_end: usize,
}

impl NerEntity {
    /// Span is non-empty and matches the text it was computed over.
    pub fn check(&self, full_text: &str) -> bool {
        self.char_start < self.char_end
            && full_text
                .chars()
                .skip(self.char_start)
                .take(self.char_end - self.char_start)
                .eq(self.text.chars())
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.char_start < end && start < self.char_end
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NerError {
    #[error("cannot read gazetteer {path}: {source}")]
    Gazetteer {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("NER service unreachable: {0}")]
    Unreachable(RetryFailure),
    #[error("NER service error: {0}")]
    Service(String),
}

pub trait NerProvider: Send + Sync {
    fn recognize(&self, text: &str) -> Result<Vec<NerEntity>, NerError>;
}

/// Words that mark a capitalized phrase as a place name.
const PLACE_WORDS: &[&str] = &[
    "street", "st", "road", "rd", "avenue", "ave", "boulevard", "lane", "drive", "way", "square", "plaza",
    "park", "lake", "rock", "hill", "bridge", "bay", "beach", "point", "harbor", "harbour", "dock", "pier",
    "site", "station", "tower", "center", "centre", "gate", "trail", "creek", "river", "canyon", "fort",
    "rua", "avenida", "praça", "praca", "largo", "travessa", "ponte", "estrada", "rotunda", "jardim", "cais",
    "parque", "serra", "monte", "miradouro", "igreja", "mercado",
];

/// Lowercase words allowed inside a place name.
const CONNECTORS: &[&str] = &["of", "the", "de", "da", "do", "das", "dos", "e"];

#[derive(Debug, Clone, Default)]
pub struct GazetteerNer {
    names: Vec<String>,
    heuristic: bool,
}

impl GazetteerNer {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> = names
            .into_iter()
            .map(|n| normalize_location(n.as_ref()))
            .filter(|n| !n.is_empty())
            .collect();
        names.sort();
        names.dedup();
        GazetteerNer { names, heuristic: true }
    }

    pub fn load(path: &Path) -> Result<Self, NerError> {
        let text = std::fs::read_to_string(path).map_err(|source| NerError::Gazetteer {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::new(text.lines().map(str::trim).filter(|l| !l.starts_with('#'))))
    }

    pub fn with_heuristic(mut self) -> Self {
        self.heuristic = true;
        self
    }

    pub fn without_heuristic(mut self) -> Self {
        self.heuristic = false;
        self
    }

    fn heuristic_spans(text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let mut words: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_alphanumeric() {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '\'' || chars[i] == '’') {
                    i += 1;
                }
                words.push((start, i));
            } else {
                i += 1;
            }
        }
        let word = |w: (usize, usize)| chars[w.0..w.1].iter().collect::<String>();
        let capitalized = |w: (usize, usize)| chars[w.0].is_uppercase() || chars[w.0].is_ascii_digit();
        // Words must be separated by spaces only to belong to one phrase.
        let adjacent = |a: (usize, usize), b: (usize, usize)| chars[a.1..b.0].iter().all(|c| *c == ' ');
        let mut spans = Vec::new();
        let mut w = 0;
        while w < words.len() {
            if !capitalized(words[w]) {
                w += 1;
                continue;
            }
            let mut end = w;
            let mut k = w + 1;
            while k < words.len() && adjacent(words[k - 1], words[k]) {
                let lower = word(words[k]).to_lowercase();
                if capitalized(words[k]) {
                    end = k;
                    k += 1;
                } else if CONNECTORS.contains(&lower.as_str())
                    && k + 1 < words.len()
                    && adjacent(words[k], words[k + 1])
                    && capitalized(words[k + 1])
                {
                    k += 1;
                } else {
                    break;
                }
            }
            let phrase: Vec<String> = (w..=end).map(|j| word(words[j]).to_lowercase()).collect();
            if phrase.iter().any(|p| PLACE_WORDS.contains(&p.as_str())) && end > w {
                spans.push((words[w].0, words[end].1));
            }
            w = end + 1;
        }
        spans
    }
}

impl NerProvider for GazetteerNer {
    fn recognize(&self, text: &str) -> Result<Vec<NerEntity>, NerError> {
        let chars: Vec<char> = text.chars().collect();
        let mut spans: Vec<(usize, usize)> = Vec::new();
        for name in &self.names {
            spans.extend(find_normalized(text, name));
        }
        if self.heuristic {
            for span in Self::heuristic_spans(text) {
                if !spans.iter().any(|&(s, e)| s < span.1 && span.0 < e) {
                    spans.push(span);
                }
            }
        }
        spans.sort();
        spans.dedup();
        Ok(spans
            .into_iter()
            .map(|(s, e)| NerEntity {
                text: chars[s..e].iter().collect(),
                label: NerLabel::Location,
                char_start: s,
                char_end: e,
            })
            .collect())
    }
}

pub struct HttpNer {
    pub endpoint: String,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl NerProvider for HttpNer {
    fn recognize(&self, text: &str) -> Result<Vec<NerEntity>, NerError> {
        #[derive(Deserialize)]
        struct Wire {
            text: String,
            label: String,
            start: usize,
            end: usize,
        }
        #[derive(Deserialize)]
        struct Reply {
            entities: Vec<Wire>,
        }
        let agent = http_agent(self.timeout);
        let reply: Reply = self
            .retry
            .run(|_| {
                let mut resp = agent
                    .post(&self.endpoint)
                    .send_json(serde_json::json!({ "text": text }))
                    .map_err(classify_http)?;
                resp.body_mut()
                    .read_json()
                    .map_err(|e| CallError::Rejected(format!("malformed NER reply: {e}")))
            })
            .map_err(|f| match f.last {
                CallError::Transport(_) => NerError::Unreachable(f),
                CallError::Rejected(m) => NerError::Service(m),
            })?;
        let mut out = Vec::new();
        for w in reply.entities {
            let label = match w.label.to_ascii_lowercase().as_str() {
                "location" | "loc" | "gpe" | "fac" => NerLabel::Location,
                "organization" | "org" => NerLabel::Organization,
                "person" | "per" => NerLabel::Person,
                _ => NerLabel::Other,
            };
            let entity = NerEntity {
                text: w.text,
                label,
                char_start: w.start,
                char_end: w.end,
            };
            if !entity.check(text) {
                return Err(NerError::Service(format!(
                    "entity `{}` at {}..{} does not match the text",
                    entity.text, entity.char_start, entity.char_end
                )));
            }
            out.push(entity);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gazetteer_matches_case_insensitively() {
        let ner = GazetteerNer::new(["stow lake"]).without_heuristic();
        let text = "Unit Alpha near STOW LAKE now";
        let ents = ner.recognize(text).unwrap();
        assert_eq!(ents.len(), 1);
        assert_eq!(ents[0].text, "STOW LAKE");
        assert!(ents[0].check(text));
    }

    #[test]
    fn heuristic_finds_keyword_phrases() {
        let text = "Engine 3 on Dock Street, then to the Praça da Ribeira. Unit Alpha copies.";
        let ents = GazetteerNer::default().with_heuristic().recognize(text).unwrap();
        let found: Vec<&str> = ents.iter().map(|e| e.text.as_str()).collect();
        assert_eq!(found, vec!["Dock Street", "Praça da Ribeira"]);
        assert!(ents.iter().all(|e| e.check(text)));
    }

    #[test]
    fn heuristic_ignores_plain_names() {
        let text = "Gold Star Mother's Rock is clear. Unit Bravo standing by.";
        let ner = GazetteerNer::default().with_heuristic();
        let found: Vec<String> = ner.recognize(text).unwrap().into_iter().map(|e| e.text).collect();
        assert_eq!(found, vec!["Gold Star Mother's Rock"]);
        let plain = ner.recognize("Unit Bravo standing by.").unwrap();
        assert!(plain.is_empty());
    }

    #[test]
    fn entity_span_check() {
        let e = NerEntity {
            text: "Lake".into(),
            label: NerLabel::Location,
            char_start: 5,
            char_end: 9,
        };
        assert!(e.check("Stow Lake"));
        assert!(!e.check("Stow Lane"));
        assert!(e.overlaps(0, 6));
        assert!(!e.overlaps(9, 12));
    }
}
