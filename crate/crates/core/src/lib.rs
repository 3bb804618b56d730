//! Introspection and correction analytics for object-detection outputs.
//!
//! - [`ingest`]: input file formats and the detection domain model.
//! - [`metrics`]: confidence/box-size statistics, clutter density,
//!   correlations and outliers.
//! - [`correction`]: event-sourced correction sessions and projections.
//! - [`totem`]: caption token pipeline, people graph, cliques, cosine
//!   similarity.
//! - [`report`]: the metrics CSV/JSONL report shared by CLI and service.

pub mod correction;
pub mod dataset;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod totem;

pub use dataset::{load_dataset, Dataset, DatasetPaths, LoadedDataset};
