//! Experiment harness around the `adaptive_cs` library: synthetic datasets,
//! train/evaluate runs and self checks.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod phantom;
pub mod verify;
