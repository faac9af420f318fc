//! Project files, ingestion, the end-to-end pipeline and its artifacts.

pub mod config;
pub mod export;
pub mod fixture;
pub mod layers;
pub mod pipeline;

pub use config::{load_project, InputDigest, Project, ProjectConfig};
pub use pipeline::{compute, run_pipeline, RunReport, Until};
