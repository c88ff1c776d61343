//! TOML configuration: prompt, thresholds, geocoder, NER and named backends.
//!
//! ```toml
//! prompt_template = "prompt.txt"
//! emergency_levels = ["minor", "moderate", "severe", "critical"]
//! max_reprompts = 2
//! concurrency = 2
//!
//! [calibration]
//! escalate_threshold = -0.5
//! deescalate_threshold = 0.2
//!
//! [geocoder]
//! gazetteer = "places.csv"      # or: endpoint = "https://nominatim.example/search"
//! cache = "geo-cache.jsonl"
//! cache_ttl_s = 604800
//! region = "pt"                 # or "min_lat,min_lon,max_lat,max_lon"
//!
//! [ner]
//! gazetteer = "places.txt"      # or: endpoint = "http://localhost:8090/ner"
//!
//! [asr.whisper]
//! kind = "local_engine"
//! endpoint = "http://localhost:9000/asr"
//! capabilities = ["diarization"]
//!
//! [llm.llama]
//! kind = "http"
//! endpoint = "http://localhost:11434/api/generate"
//! model = "llama3.1:8b"
//! ```
//!
//! Relative paths are resolved against the config file's directory. The
//! backends `replay` (sidecar transcripts) and `scripted` (sidecar LLM
//! scripts) always exist unless overridden.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::asr::AsrBackendDescriptor;
use crate::extraction::{ExtractionPolicy, LlmBackendDescriptor, PromptTemplate};
use crate::geo::{ConstraintSource, GazetteerGeocoder, GeoCache, GeoResolver, GeocodingSource, HttpGeocoder, RegionConstraint};
use crate::retry::RetryPolicy;
use crate::validation::{CalibrationPolicy, GazetteerNer, HttpNer, NerProvider};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Syntax {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("no {kind} backend named `{name}` (known: {known})")]
    UnknownBackend { kind: &'static str, name: String, known: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeocoderConfig {
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub cache_ttl_s: Option<u64>,
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_in_flight() -> usize {
    crate::geo::DEFAULT_IN_FLIGHT
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NerConfig {
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Capitalized-phrase detection on top of the gazetteer.
    #[serde(default = "yes")]
    pub heuristic: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub prompt_template: Option<PathBuf>,
    #[serde(default = "default_levels")]
    pub emergency_levels: Vec<String>,
    #[serde(default = "default_reprompts")]
    pub max_reprompts: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub calibration: CalibrationPolicy,
    #[serde(default)]
    pub geocoder: GeocoderConfig,
    #[serde(default)]
    pub ner: NerConfig,
    #[serde(default)]
    pub asr: BTreeMap<String, AsrBackendDescriptor>,
    #[serde(default)]
    pub llm: BTreeMap<String, LlmBackendDescriptor>,
}

fn default_levels() -> Vec<String> {
    PromptTemplate::default().emergency_levels
}

fn default_reprompts() -> u32 {
    ExtractionPolicy::default().max_reprompts
}

fn default_concurrency() -> usize {
    2
}

impl Default for Config {
    fn default() -> Self {
        let mut c = Config {
            prompt_template: None,
            emergency_levels: default_levels(),
            max_reprompts: default_reprompts(),
            concurrency: default_concurrency(),
            calibration: CalibrationPolicy::default(),
            geocoder: GeocoderConfig {
                max_in_flight: default_in_flight(),
                ..GeocoderConfig::default()
            },
            ner: NerConfig {
                heuristic: true,
                ..NerConfig::default()
            },
            asr: BTreeMap::new(),
            llm: BTreeMap::new(),
        };
        c.add_builtin_backends();
        c
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c: Config = toml::from_str(&text).map_err(|source| ConfigError::Syntax {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base);
        c.add_builtin_backends();
        c.check()?;
        Ok(c)
    }

    fn add_builtin_backends(&mut self) {
        self.asr
            .entry("replay".into())
            .or_insert_with(|| AsrBackendDescriptor::replay("sidecar"));
        self.llm
            .entry("scripted".into())
            .or_insert_with(|| LlmBackendDescriptor::scripted("sidecar"));
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.prompt_template);
        fix(&mut self.geocoder.gazetteer);
        fix(&mut self.geocoder.cache);
        fix(&mut self.ner.gazetteer);
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        self.calibration.check().map_err(ConfigError::Invalid)?;
        if self.concurrency == 0 {
            return Err(ConfigError::Invalid("concurrency must be at least 1".into()));
        }
        if self.geocoder.gazetteer.is_some() && self.geocoder.endpoint.is_some() {
            return Err(ConfigError::Invalid("geocoder: set gazetteer or endpoint, not both".into()));
        }
        if self.ner.gazetteer.is_some() && self.ner.endpoint.is_some() {
            return Err(ConfigError::Invalid("ner: set gazetteer or endpoint, not both".into()));
        }
        self.region()?;
        for (name, b) in &self.asr {
            b.check().map_err(|e| ConfigError::Invalid(format!("asr.{name}: {e}")))?;
        }
        Ok(())
    }

    pub fn template(&self) -> Result<PromptTemplate, ConfigError> {
        let mut t = PromptTemplate {
            emergency_levels: self.emergency_levels.clone(),
            ..PromptTemplate::default()
        };
        if let Some(path) = &self.prompt_template {
            t.system_text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
        }
        t.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(t)
    }

    pub fn extraction_policy(&self) -> ExtractionPolicy {
        ExtractionPolicy {
            max_reprompts: self.max_reprompts,
            ..ExtractionPolicy::default()
        }
    }

    pub fn region(&self) -> Result<Option<RegionConstraint>, ConfigError> {
        self.geocoder
            .region
            .as_deref()
            .map(|r| RegionConstraint::parse(r, ConstraintSource::Config))
            .transpose()
            .map_err(|e| ConfigError::Invalid(format!("geocoder.region: {e}")))
    }

    pub fn asr_backend(&self, name: &str) -> Result<AsrBackendDescriptor, ConfigError> {
        self.asr.get(name).cloned().ok_or_else(|| ConfigError::UnknownBackend {
            kind: "ASR",
            name: name.to_string(),
            known: self.asr.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    pub fn llm_backend(&self, name: &str) -> Result<LlmBackendDescriptor, ConfigError> {
        self.llm.get(name).cloned().ok_or_else(|| ConfigError::UnknownBackend {
            kind: "LLM",
            name: name.to_string(),
            known: self.llm.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    /// Builds the geocoder. Without a configured source every lookup comes
    /// back unresolved.
    pub fn geo_resolver(&self) -> Result<GeoResolver, ConfigError> {
        let g = &self.geocoder;
        let source: Box<dyn GeocodingSource> = match (&g.gazetteer, &g.endpoint) {
            (Some(path), _) => Box::new(GazetteerGeocoder::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?),
            (None, Some(url)) => Box::new(HttpGeocoder::new(url.clone())),
            (None, None) => Box::new(GazetteerGeocoder::default()),
        };
        let cache = match &g.cache {
            Some(path) => GeoCache::open(path, g.cache_ttl_s.map(Duration::from_secs)).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?,
            None => GeoCache::in_memory(),
        };
        Ok(GeoResolver::with_in_flight(source, cache, g.max_in_flight))
    }

    pub fn ner(&self) -> Result<Arc<dyn NerProvider>, ConfigError> {
        let n = &self.ner;
        Ok(match (&n.gazetteer, &n.endpoint) {
            (_, Some(url)) => Arc::new(HttpNer {
                endpoint: url.clone(),
                retry: RetryPolicy::default(),
                timeout: Duration::from_secs(30),
            }),
            (Some(path), None) => {
                let g = GazetteerNer::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Arc::new(if n.heuristic { g } else { g.without_heuristic() })
            }
            (None, None) => {
                // place names from the geocoding gazetteer double as NER entries
                let names: Vec<String> = match &self.geocoder.gazetteer {
                    Some(path) => GazetteerGeocoder::load(path)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?
                        .names()
                        .map(str::to_string)
                        .collect(),
                    None => Vec::new(),
                };
                let g = GazetteerNer::new(names);
                Arc::new(if n.heuristic { g } else { g.without_heuristic() })
            }
        })
    }
}
