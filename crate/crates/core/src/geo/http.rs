use std::time::Duration;

use serde::Deserialize;

use super::{GeocodingSource, SourceHit};
use crate::model::GeoCandidate;
use crate::retry::{classify_http, http_agent, CallError, RetryFailure, RetryPolicy};

/// Client for a Nominatim-style search endpoint:
/// `GET <endpoint>?q=<query>&format=json&limit=<k>&addressdetails=1`
/// answering a JSON array of `{lat, lon, display_name, address?}` where
/// lat/lon may be strings or numbers.
pub struct HttpGeocoder {
    pub endpoint: String,
    pub retry: RetryPolicy,
    pub timeout: Duration,
    pub user_agent: String,
}

impl HttpGeocoder {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpGeocoder {
            endpoint: endpoint.into(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(20),
            user_agent: concat!("fieldvoice/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Coord {
    Num(f64),
    Text(String),
}

impl Coord {
    fn value(&self) -> Option<f64> {
        match self {
            Coord::Num(v) => Some(*v),
            Coord::Text(s) => s.trim().parse().ok(),
        }
    }
}

#[derive(Deserialize)]
struct Place {
    lat: Coord,
    lon: Coord,
    #[serde(default)]
    display_name: String,
    #[serde(default)]
    address: Option<Address>,
}

#[derive(Deserialize)]
struct Address {
    #[serde(default)]
    country_code: Option<String>,
}

impl GeocodingSource for HttpGeocoder {
    fn name(&self) -> &str {
        &self.endpoint
    }

    fn lookup(&self, query: &str, limit: usize) -> Result<Vec<SourceHit>, RetryFailure> {
        let agent = http_agent(self.timeout);
        let places: Vec<Place> = self.retry.run(|_| {
            let mut resp = agent
                .get(&self.endpoint)
                .query("q", query)
                .query("format", "json")
                .query("limit", limit.to_string())
                .query("addressdetails", "1")
                .header("User-Agent", &self.user_agent)
                .call()
                .map_err(classify_http)?;
            resp.body_mut()
                .read_json()
                .map_err(|e| CallError::Rejected(format!("malformed geocoder reply: {e}")))
        })?;
        Ok(places
            .into_iter()
            .filter_map(|p| {
                Some(SourceHit {
                    candidate: GeoCandidate {
                        lat: p.lat.value()?,
                        lon: p.lon.value()?,
                        display_name: p.display_name,
                        source: self.endpoint.clone(),
                    },
                    country_code: p.address.and_then(|a| a.country_code),
                })
            })
            .take(limit)
            .collect())
    }
}
