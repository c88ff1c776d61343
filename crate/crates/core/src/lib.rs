//! Converts field voice communications into validated, structured
//! situation reports, and measures how well that works.
//!
//! Stages run in order: [`asr`] produces a transcript, [`extraction`]
//! prompts a language model for a schema-constrained report,
//! [`validation`] audits it against the transcript, and [`geo`] resolves
//! locations to coordinates. [`pipeline`] runs the stages as persisted
//! jobs; [`eval`] and [`noise`] hold the measurement and dataset tooling.

pub mod asr;
pub mod audio;
pub mod canonical;
pub mod config;
pub mod eval;
pub mod extraction;
pub mod geo;
pub mod model;
pub mod noise;
pub mod pipeline;
pub mod retry;
pub mod validation;

pub use canonical::{canonical_serialize, canonical_string, parse_report};
pub use model::*;
