//! Turns configuration plus per-request choices into pipeline inputs.

use std::sync::Arc;

use serde::Deserialize;

use fieldvoice_core::config::{Config, ConfigError};
use fieldvoice_core::geo::{ConstraintSource, RegionConstraint};
use fieldvoice_core::pipeline::{JobOptions, Services};

pub fn services(config: &Config) -> Result<Services, ConfigError> {
    Ok(Services {
        template: config.template()?,
        ner: config.ner()?,
        geo: Arc::new(config.geo_resolver()?),
    })
}

/// Backend names and switches a caller may set per job. Unset fields fall
/// back to the hermetic backends and the configured region.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct JobChoices {
    #[serde(default)]
    pub asr: Option<String>,
    #[serde(default)]
    pub llm: Option<String>,
    /// Country code or `min_lat,min_lon,max_lat,max_lon`.
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub rectify: bool,
}

pub fn job_options(config: &Config, choices: &JobChoices) -> Result<JobOptions, ConfigError> {
    let region = match &choices.region {
        Some(r) => Some(
            RegionConstraint::parse(r, ConstraintSource::Operator)
                .map_err(|e| ConfigError::Invalid(format!("region `{r}`: {e}")))?,
        ),
        None => config.region()?,
    };
    Ok(JobOptions {
        asr: config.asr_backend(choices.asr.as_deref().unwrap_or("replay"))?,
        llm: config.llm_backend(choices.llm.as_deref().unwrap_or("scripted"))?,
        calibration: config.calibration,
        region,
        rectify: choices.rectify,
        extraction: config.extraction_policy(),
    })
}
