use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{GeocodingSource, SourceHit};
use crate::model::{normalize_location, GeoCandidate};
use crate::retry::RetryFailure;

#[derive(Debug, thiserror::Error)]
pub enum GazetteerError {
    #[error("cannot read gazetteer {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("gazetteer {path} record {record}: {message}")]
    Invalid { path: PathBuf, record: usize, message: String },
}

#[derive(Debug, Deserialize)]
struct Record {
    name: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    display_name: Option<String>,
    #[serde(default)]
    country_code: Option<String>,
}

/// Offline geocoder over a CSV file with columns `name,lat,lon` and
/// optional `display_name,country_code`. Several rows may share a name.
#[derive(Debug, Default, Clone)]
pub struct GazetteerGeocoder {
    label: String,
    by_name: HashMap<String, Vec<SourceHit>>,
}

impl GazetteerGeocoder {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GazetteerError> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|source| GazetteerError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        let mut g = GazetteerGeocoder {
            label: format!("gazetteer:{}", path.file_name().and_then(|n| n.to_str()).unwrap_or("?")),
            by_name: HashMap::new(),
        };
        for (i, row) in reader.deserialize::<Record>().enumerate() {
            let rec = row.map_err(|e| GazetteerError::Invalid {
                path: path.to_path_buf(),
                record: i + 1,
                message: e.to_string(),
            })?;
            let hit = SourceHit {
                candidate: GeoCandidate {
                    lat: rec.lat,
                    lon: rec.lon,
                    display_name: rec.display_name.filter(|d| !d.is_empty()).unwrap_or_else(|| rec.name.clone()),
                    source: g.label.clone(),
                },
                country_code: rec.country_code.filter(|c| !c.is_empty()),
            };
            if !hit.candidate.in_range() {
                return Err(GazetteerError::Invalid {
                    path: path.to_path_buf(),
                    record: i + 1,
                    message: format!("coordinates ({}, {}) out of range", rec.lat, rec.lon),
                });
            }
            g.by_name.entry(normalize_location(&rec.name)).or_default().push(hit);
        }
        Ok(g)
    }

    pub fn from_entries<'a>(label: &str, entries: impl IntoIterator<Item = (&'a str, f64, f64, Option<&'a str>)>) -> Self {
        let mut g = GazetteerGeocoder {
            label: label.to_string(),
            by_name: HashMap::new(),
        };
        for (name, lat, lon, cc) in entries {
            g.by_name.entry(normalize_location(name)).or_default().push(SourceHit {
                candidate: GeoCandidate {
                    lat,
                    lon,
                    display_name: name.to_string(),
                    source: label.to_string(),
                },
                country_code: cc.map(str::to_string),
            });
        }
        g
    }

    /// Every known place name, normalized. Handy as an NER gazetteer.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }
}

impl GeocodingSource for GazetteerGeocoder {
    fn name(&self) -> &str {
        &self.label
    }

    fn lookup(&self, query: &str, limit: usize) -> Result<Vec<SourceHit>, RetryFailure> {
        Ok(self
            .by_name
            .get(&normalize_location(query))
            .map(|hits| hits.iter().take(limit).cloned().collect())
            .unwrap_or_default())
    }
}
