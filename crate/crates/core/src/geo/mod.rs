//! Location-to-coordinate resolution with candidate lists, region
//! filtering and a persistent cache.
//!
//! A single geocoder hit is never trusted blindly: up to [`CANDIDATE_LIMIT`]
//! candidates are fetched, filtered by the active [`RegionConstraint`], and
//! two or more survivors surface as an ambiguous resolution for an operator.

mod cache;
mod gazetteer;
mod http;

use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::model::{normalize_location, FlagKind, GeoCandidate, GeoResolution, GeoStatus, SemanticReport, ValidationFlag};
use crate::retry::RetryFailure;

pub use cache::GeoCache;
pub use gazetteer::{GazetteerError, GazetteerGeocoder};
pub use http::HttpGeocoder;

pub const CANDIDATE_LIMIT: usize = 5;
pub const DEFAULT_IN_FLIGHT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSource {
    Config,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    BoundingBox {
        min_lat: f64,
        max_lat: f64,
        min_lon: f64,
        max_lon: f64,
    },
    Country(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConstraint {
    pub region: Region,
    pub source: ConstraintSource,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegionError {
    #[error("bounding box needs min < max on both axes")]
    EmptyBox,
    #[error("bounding box coordinates out of range")]
    OutOfRange,
    #[error("`{0}` is neither a two-letter country code nor `min_lat,min_lon,max_lat,max_lon`")]
    Syntax(String),
}

impl RegionConstraint {
    pub fn bbox(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64, source: ConstraintSource) -> Result<Self, RegionError> {
        let c = RegionConstraint {
            region: Region::BoundingBox {
                min_lat,
                max_lat,
                min_lon,
                max_lon,
            },
            source,
        };
        c.check().map(|_| c)
    }

    pub fn country(code: &str, source: ConstraintSource) -> Result<Self, RegionError> {
        let code = code.trim();
        if code.len() != 2 || !code.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(RegionError::Syntax(code.to_string()));
        }
        Ok(RegionConstraint {
            region: Region::Country(code.to_ascii_lowercase()),
            source,
        })
    }

    /// Parses `pt` or `min_lat,min_lon,max_lat,max_lon`.
    pub fn parse(text: &str, source: ConstraintSource) -> Result<Self, RegionError> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [code] => Self::country(code, source),
            [a, b, c, d] => {
                let n: Result<Vec<f64>, _> = [a, b, c, d].iter().map(|p| p.parse::<f64>()).collect();
                let n = n.map_err(|_| RegionError::Syntax(text.to_string()))?;
                Self::bbox(n[0], n[1], n[2], n[3], source)
            }
            _ => Err(RegionError::Syntax(text.to_string())),
        }
    }

    pub fn check(&self) -> Result<(), RegionError> {
        match &self.region {
            Region::BoundingBox {
                min_lat,
                max_lat,
                min_lon,
                max_lon,
            } => {
                let lat = -90.0..=90.0;
                let lon = -180.0..=180.0;
                if !(lat.contains(min_lat) && lat.contains(max_lat) && lon.contains(min_lon) && lon.contains(max_lon)) {
                    return Err(RegionError::OutOfRange);
                }
                if min_lat >= max_lat || min_lon >= max_lon {
                    return Err(RegionError::EmptyBox);
                }
                Ok(())
            }
            Region::Country(code) => Self::country(code, self.source).map(|_| ()),
        }
    }

    /// Candidates with an unknown country never satisfy a country constraint.
    pub fn admits(&self, hit: &SourceHit) -> bool {
        match &self.region {
            Region::BoundingBox {
                min_lat,
                max_lat,
                min_lon,
                max_lon,
            } => {
                let c = &hit.candidate;
                (*min_lat..=*max_lat).contains(&c.lat) && (*min_lon..=*max_lon).contains(&c.lon)
            }
            Region::Country(code) => hit.country_code.as_deref().is_some_and(|cc| cc.eq_ignore_ascii_case(code)),
        }
    }

    /// Stable text identifying the filtered area, used in cache keys.
    pub fn key(&self) -> String {
        match &self.region {
            Region::BoundingBox {
                min_lat,
                max_lat,
                min_lon,
                max_lon,
            } => format!("bbox:{min_lat},{min_lon},{max_lat},{max_lon}"),
            Region::Country(code) => format!("cc:{code}"),
        }
    }
}

impl fmt::Display for RegionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for RegionConstraint {
    type Err = RegionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, ConstraintSource::Operator)
    }
}

/// One raw geocoder result before region filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHit {
    pub candidate: GeoCandidate,
    pub country_code: Option<String>,
}

pub trait GeocodingSource: Send + Sync {
    fn name(&self) -> &str;
    fn lookup(&self, query: &str, limit: usize) -> Result<Vec<SourceHit>, RetryFailure>;
}

impl<T: GeocodingSource + ?Sized> GeocodingSource for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn lookup(&self, query: &str, limit: usize) -> Result<Vec<SourceHit>, RetryFailure> {
        (**self).lookup(query, limit)
    }
}

/// A resolution plus why it is unresolved, when the reason was transport.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoLookup {
    pub resolution: GeoResolution,
    pub transport_error: Option<String>,
}

impl GeoLookup {
    /// The audit flag this result calls for, if any.
    pub fn flag(&self) -> Option<ValidationFlag> {
        let r = &self.resolution;
        match r.status {
            GeoStatus::Resolved => None,
            GeoStatus::Ambiguous => Some(ValidationFlag::about(
                FlagKind::GeocodeAmbiguous,
                &r.query,
                format!("{} candidate locations, operator choice needed", r.candidates.len()),
            )),
            GeoStatus::Unresolved => Some(ValidationFlag::about(
                FlagKind::GeocodeUnresolved,
                &r.query,
                match &self.transport_error {
                    Some(e) => format!("geocoder unreachable: {e}"),
                    None => "no matching place".to_string(),
                },
            )),
        }
    }
}

/// Counting gate limiting concurrent geocoder calls.
struct Gate {
    free: Mutex<usize>,
    ready: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            ready: Condvar::new(),
        }
    }

    fn enter(&self) -> GatePass<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.ready.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GatePass(self)
    }
}

struct GatePass<'a>(&'a Gate);

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.ready.notify_one();
    }
}

pub struct GeoResolver {
    source: Box<dyn GeocodingSource>,
    cache: GeoCache,
    gate: Gate,
}

impl GeoResolver {
    pub fn new(source: Box<dyn GeocodingSource>, cache: GeoCache) -> Self {
        Self::with_in_flight(source, cache, DEFAULT_IN_FLIGHT)
    }

    pub fn with_in_flight(source: Box<dyn GeocodingSource>, cache: GeoCache, in_flight: usize) -> Self {
        GeoResolver {
            source,
            cache,
            gate: Gate::new(in_flight),
        }
    }

    pub fn cache(&self) -> &GeoCache {
        &self.cache
    }

    pub fn resolve(&self, location: &str, constraint: Option<&RegionConstraint>) -> GeoLookup {
        let normalized = normalize_location(location);
        if normalized.is_empty() {
            return GeoLookup {
                resolution: GeoResolution::unresolved(location),
                transport_error: Some("empty location".into()),
            };
        }
        let key = cache_key(&normalized, constraint);
        if let Some(mut hit) = self.cache.get(&key) {
            hit.query = location.to_string();
            return GeoLookup {
                resolution: hit,
                transport_error: None,
            };
        }
        let fetched = {
            let _pass = self.gate.enter();
            self.source.lookup(&normalized, CANDIDATE_LIMIT)
        };
        match fetched {
            Ok(hits) => {
                let candidates: Vec<GeoCandidate> = hits
                    .into_iter()
                    .filter(|h| h.candidate.in_range())
                    .filter(|h| constraint.is_none_or(|c| c.admits(h)))
                    .take(CANDIDATE_LIMIT)
                    .map(|h| h.candidate)
                    .collect();
                let resolution = GeoResolution::from_candidates(location, candidates);
                self.cache.put(&key, &resolution);
                GeoLookup {
                    resolution,
                    transport_error: None,
                }
            }
            Err(failure) => {
                tracing::warn!(%location, error = %failure, "geocoding failed");
                GeoLookup {
                    resolution: GeoResolution::unresolved(location),
                    transport_error: Some(failure.to_string()),
                }
            }
        }
    }

    /// Resolves every report location, replacing `report.geo` and adding
    /// ambiguity and unresolved flags.
    pub fn resolve_report(&self, report: &mut SemanticReport, constraint: Option<&RegionConstraint>) {
        let mut geo = Vec::with_capacity(report.locations.len());
        let mut flags = Vec::new();
        for location in &report.locations {
            let lookup = self.resolve(location, constraint);
            flags.extend(lookup.flag());
            geo.push(lookup.resolution);
        }
        report.geo = geo;
        for f in flags {
            report.push_flag(f);
        }
    }
}

pub fn cache_key(normalized_query: &str, constraint: Option<&RegionConstraint>) -> String {
    match constraint {
        Some(c) => format!("{normalized_query}|{}", c.key()),
        None => format!("{normalized_query}|-"),
    }
}
