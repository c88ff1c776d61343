//! HTTP API and shared setup for the `fieldvoice` binary.

pub mod api;
pub mod setup;
