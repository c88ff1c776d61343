use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoStatus {
    Resolved,
    Ambiguous,
    Unresolved,
}

impl GeoStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GeoStatus::Resolved => "resolved",
            GeoStatus::Ambiguous => "ambiguous",
            GeoStatus::Unresolved => "unresolved",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "resolved" => Some(GeoStatus::Resolved),
            "ambiguous" => Some(GeoStatus::Ambiguous),
            "unresolved" => Some(GeoStatus::Unresolved),
            _ => None,
        }
    }
}

impl fmt::Display for GeoStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoCandidate {
    pub lat: f64,
    pub lon: f64,
    pub display_name: String,
    pub source: String,
}

impl GeoCandidate {
    pub fn in_range(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoResolution {
    pub query: String,
    pub status: GeoStatus,
    pub candidates: Vec<GeoCandidate>,
    pub chosen: Option<usize>,
}

impl GeoResolution {
    pub fn unresolved(query: impl Into<String>) -> Self {
        GeoResolution {
            query: query.into(),
            status: GeoStatus::Unresolved,
            candidates: Vec::new(),
            chosen: None,
        }
    }

    /// Classifies a candidate list: one → resolved, several → ambiguous,
    /// none → unresolved.
    pub fn from_candidates(query: impl Into<String>, candidates: Vec<GeoCandidate>) -> Self {
        let status = match candidates.len() {
            0 => GeoStatus::Unresolved,
            1 => GeoStatus::Resolved,
            _ => GeoStatus::Ambiguous,
        };
        GeoResolution {
            query: query.into(),
            status,
            candidates,
            chosen: None,
        }
    }

    /// The coordinates an operator or consumer should use, if any.
    pub fn position(&self) -> Option<&GeoCandidate> {
        match (self.status, self.chosen) {
            (GeoStatus::Resolved, Some(i)) => self.candidates.get(i),
            (GeoStatus::Resolved, None) => self.candidates.first(),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.query.trim().is_empty() {
            return Err("query is empty".into());
        }
        if let Some(c) = self.candidates.iter().find(|c| !c.in_range()) {
            return Err(format!("candidate `{}` has out-of-range coordinates", c.display_name));
        }
        if let Some(i) = self.chosen {
            if i >= self.candidates.len() {
                return Err(format!("chosen index {i} out of range for {} candidates", self.candidates.len()));
            }
        }
        match self.status {
            GeoStatus::Resolved if self.candidates.len() == 1 || self.chosen.is_some() => Ok(()),
            GeoStatus::Resolved => Err("resolved requires exactly one candidate or a chosen index".into()),
            GeoStatus::Ambiguous if self.candidates.len() >= 2 && self.chosen.is_none() => Ok(()),
            GeoStatus::Ambiguous => Err("ambiguous requires two or more candidates and no choice".into()),
            GeoStatus::Unresolved if self.candidates.is_empty() && self.chosen.is_none() => Ok(()),
            GeoStatus::Unresolved => Err("unresolved must carry no candidates".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChooseError {
    #[error("`{query}` is {status}, only ambiguous resolutions accept a choice")]
    NotAmbiguous { query: String, status: GeoStatus },
    #[error("candidate index {index} out of range for {len} candidates")]
    OutOfRange { index: usize, len: usize },
}

/// Operator selection of one candidate from an ambiguous resolution.
pub fn choose_candidate(resolution: &GeoResolution, index: usize) -> Result<GeoResolution, ChooseError> {
    if resolution.status != GeoStatus::Ambiguous {
        return Err(ChooseError::NotAmbiguous {
            query: resolution.query.clone(),
            status: resolution.status,
        });
    }
    if index >= resolution.candidates.len() {
        return Err(ChooseError::OutOfRange {
            index,
            len: resolution.candidates.len(),
        });
    }
    Ok(GeoResolution {
        status: GeoStatus::Resolved,
        chosen: Some(index),
        ..resolution.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(n: usize) -> GeoCandidate {
        GeoCandidate {
            lat: 37.0 + n as f64 * 0.01,
            lon: -122.0,
            display_name: format!("Dock Street #{n}"),
            source: "gazetteer".into(),
        }
    }

    fn ambiguous() -> GeoResolution {
        GeoResolution::from_candidates("Dock Street", vec![cand(0), cand(1), cand(2)])
    }

    #[test]
    fn selection_resolves() {
        let chosen = choose_candidate(&ambiguous(), 1).unwrap();
        assert_eq!(chosen.status, GeoStatus::Resolved);
        assert_eq!(chosen.chosen, Some(1));
        assert_eq!(chosen.position(), Some(&cand(1)));
        assert!(chosen.check().is_ok());
    }

    #[test]
    fn resolved_input_rejected() {
        let resolved = choose_candidate(&ambiguous(), 0).unwrap();
        assert!(matches!(choose_candidate(&resolved, 0), Err(ChooseError::NotAmbiguous { .. })));
    }

    #[test]
    fn out_of_range_rejected() {
        assert_eq!(
            choose_candidate(&ambiguous(), 5),
            Err(ChooseError::OutOfRange { index: 5, len: 3 })
        );
    }

    #[test]
    fn status_invariants() {
        assert!(ambiguous().check().is_ok());
        assert!(GeoResolution::unresolved("zzqx").check().is_ok());
        let mut bad = ambiguous();
        bad.chosen = Some(0);
        assert!(bad.check().is_err());
        let mut far = GeoResolution::from_candidates("x", vec![cand(0)]);
        far.candidates[0].lat = 91.0;
        assert!(far.check().is_err());
    }
}
