//! Data readiness inspection for tabular datasets.
//!
//! Metrics are grouped into readiness pillars (data quality, understandability
//! and usability, structure and organization, governance, impact on AI, and
//! fairness). Results are assembled into a [`report::ReadinessReport`] that
//! renders to canonical JSON and a self-contained HTML page.
//!
//! The [`federated`] module runs the same engine on edge clients, ships only
//! aggregate [`federated::ClientSummary`] bundles to a coordinator, and flags
//! clients unfit for federated training. [`flsim`] is a small FedAvg
//! simulation used to measure the effect of excluding flagged clients.

pub mod config;
pub mod dataset;
pub mod engine;
pub mod fairness;
pub mod federated;
pub mod flsim;
pub mod governance;
pub mod impact;
pub mod quality;
pub mod report;
mod stats;

pub use config::{EvalConfig, MetricId, Thresholds};
pub use dataset::{
    parse_csv, schema_fingerprint, Cell, CellKey, Column, ColumnKind, Dataset, DatasetError,
    MetadataDescriptor, ParseOptions, RoleMap,
};
pub use engine::{evaluate, inspect, Evaluation};
pub use report::{MetricResult, MetricStatus, Pillar, ReadinessReport};
