//! Event-sourced correction sessions.
//!
//! A session is an append-only log of user actions over an immutable
//! dataset. Everything else (which detections are still active, effective
//! boxes, user-added ground truth, the projected-performance series) is a
//! deterministic fold of that log. Undo is a `revert` event, never a
//! deletion.

mod event;
mod export;
mod mapping;
mod projection;
mod proportions;
mod session;
mod state;

use thiserror::Error;

pub use event::{read_event_log, write_event, write_event_log, CorrectionEvent, EventKind, EventPayload};
pub use export::{export_annotations, write_export, ExportRecord};
pub use mapping::{gt_prediction_mapping, ClassMapping, GroundTruthEntry, MappingReport, MatchedPair, PredictionEntry, IOU_THRESHOLD};
pub use projection::{projection_series, ProjectionSnapshot, BASELINE_EVENT};
pub use proportions::{class_proportions, ClassProportion};
pub use session::Session;
pub use state::{replay, AddedAnnotation, SessionState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectionError {
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("dataset has no detections")]
    EmptyDataset,
    #[error("elimination batch is empty")]
    EmptyBatch,
    #[error("unknown detection `{0}`")]
    UnknownDetection(String),
    #[error("detection `{0}` is already eliminated")]
    AlreadyEliminated(String),
    #[error("class `{0}` is not in the vocabulary")]
    UnknownClass(String),
    #[error("no detections carry class `{0}`")]
    NoSuchClass(String),
    #[error("invalid bounding box: {0}")]
    InvalidBBox(String),
    #[error("invalid event payload: {0}")]
    InvalidPayload(String),
    #[error("image `{0}` has neither ground truth nor active detections")]
    UnknownImage(String),
    #[error("cannot revert event {target}: {reason}")]
    InvalidRevert { target: u64, reason: String },
    #[error("event {0} is already reverted")]
    AlreadyReverted(u64),
    #[error("corrupt event log at event {index} (line {}): {reason}", index + 1)]
    CorruptLog { index: usize, reason: String },
}
