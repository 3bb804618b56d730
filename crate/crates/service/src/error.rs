//! The API error body and the fixed code registry.
//!
//! Every module error maps to exactly one code; the HTTP status follows
//! from the code's class.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use detscope_core::correction::CorrectionError;
use detscope_core::dataset::LoadError;
use detscope_core::ingest::IngestError;
use detscope_core::metrics::MetricsError;
use detscope_core::totem::TotemError;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Missing,
    Conflict,
    Internal,
}

impl ErrorClass {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorClass::Validation => StatusCode::BAD_REQUEST,
            ErrorClass::Missing => StatusCode::NOT_FOUND,
            ErrorClass::Conflict => StatusCode::CONFLICT,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Every code the service can emit, with its class.
pub const REGISTRY: &[(&str, ErrorClass)] = &[
    // routing and request shape
    ("not_found", ErrorClass::Missing),
    ("bad_request", ErrorClass::Validation),
    ("unknown_session", ErrorClass::Missing),
    ("unknown_image", ErrorClass::Missing),
    ("io_error", ErrorClass::Validation),
    ("internal", ErrorClass::Internal),
    // ingest
    ("malformed_record", ErrorClass::Validation),
    ("invalid_bbox", ErrorClass::Validation),
    ("unknown_class", ErrorClass::Validation),
    ("confidence_out_of_range", ErrorClass::Validation),
    ("duplicate_id", ErrorClass::Validation),
    ("duplicate_label", ErrorClass::Validation),
    ("empty_vocabulary", ErrorClass::Validation),
    // metrics
    ("no_such_class", ErrorClass::Missing),
    ("empty_image", ErrorClass::Validation),
    ("mixed_images", ErrorClass::Validation),
    ("degenerate_extent", ErrorClass::Validation),
    ("insufficient_classes", ErrorClass::Validation),
    ("insufficient_images", ErrorClass::Validation),
    ("too_few_points", ErrorClass::Validation),
    // correction
    ("unknown_dataset", ErrorClass::Missing),
    ("empty_dataset", ErrorClass::Validation),
    ("empty_batch", ErrorClass::Validation),
    ("unknown_detection", ErrorClass::Missing),
    ("already_eliminated", ErrorClass::Conflict),
    ("invalid_payload", ErrorClass::Validation),
    ("invalid_revert", ErrorClass::Validation),
    ("already_reverted", ErrorClass::Conflict),
    ("corrupt_log", ErrorClass::Internal),
    // totem
    ("malformed_lemma", ErrorClass::Validation),
    ("lemma_not_closed", ErrorClass::Validation),
    ("lemma_is_stopword", ErrorClass::Validation),
    ("invalid_token", ErrorClass::Validation),
    ("length_mismatch", ErrorClass::Validation),
    ("too_few_profiles", ErrorClass::Validation),
    ("invalid_edge_threshold", ErrorClass::Validation),
    ("invalid_min_size", ErrorClass::Validation),
    ("invalid_similarity_threshold", ErrorClass::Validation),
    ("invalid_matrix", ErrorClass::Validation),
];

fn class_of(code: &str) -> ErrorClass {
    REGISTRY
        .iter()
        .find(|(c, _)| *c == code)
        .map(|(_, class)| *class)
        .unwrap_or_else(|| panic!("error code `{code}` is not registered"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn status(&self) -> StatusCode {
        class_of(self.code).status()
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new("not_found", what)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new("internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == "internal" {
            tracing::error!(message = %self.message, "internal error");
        }
        (self.status(), Json(self)).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = match &e {
            IngestError::MalformedRecord { .. } => "malformed_record",
            IngestError::InvalidBBox { .. } => "invalid_bbox",
            IngestError::UnknownClass { .. } => "unknown_class",
            IngestError::ConfidenceOutOfRange { .. } => "confidence_out_of_range",
            IngestError::DuplicateId { .. } => "duplicate_id",
            IngestError::DuplicateLabel { .. } => "duplicate_label",
            IngestError::EmptyVocabulary => "empty_vocabulary",
            IngestError::Io(_) => "io_error",
        };
        let details = match e.line() {
            Some(line) => serde_json::json!({ "line": line }),
            None => Value::Null,
        };
        ApiError::new(code, e.to_string()).with_details(details)
    }
}

impl From<MetricsError> for ApiError {
    fn from(e: MetricsError) -> Self {
        let code = match &e {
            MetricsError::NoSuchClass(_) => "no_such_class",
            MetricsError::EmptyImage => "empty_image",
            MetricsError::MixedImages(..) => "mixed_images",
            MetricsError::DegenerateExtent(_) => "degenerate_extent",
            MetricsError::InsufficientClasses(_) => "insufficient_classes",
            MetricsError::InsufficientImages(_) => "insufficient_images",
            MetricsError::TooFewPoints(_) => "too_few_points",
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<CorrectionError> for ApiError {
    fn from(e: CorrectionError) -> Self {
        let code = match &e {
            CorrectionError::UnknownDataset(_) => "unknown_dataset",
            CorrectionError::EmptyDataset => "empty_dataset",
            CorrectionError::EmptyBatch => "empty_batch",
            CorrectionError::UnknownDetection(_) => "unknown_detection",
            CorrectionError::AlreadyEliminated(_) => "already_eliminated",
            CorrectionError::UnknownClass(_) => "unknown_class",
            CorrectionError::NoSuchClass(_) => "no_such_class",
            CorrectionError::InvalidBBox(_) => "invalid_bbox",
            CorrectionError::InvalidPayload(_) => "invalid_payload",
            CorrectionError::UnknownImage(_) => "unknown_image",
            CorrectionError::InvalidRevert { .. } => "invalid_revert",
            CorrectionError::AlreadyReverted(_) => "already_reverted",
            CorrectionError::CorruptLog { .. } => "corrupt_log",
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<TotemError> for ApiError {
    fn from(e: TotemError) -> Self {
        let code = match &e {
            TotemError::MalformedLemma { .. } => "malformed_lemma",
            TotemError::LemmaNotClosed { .. } => "lemma_not_closed",
            TotemError::LemmaIsStopword(_) => "lemma_is_stopword",
            TotemError::InvalidToken(_) => "invalid_token",
            TotemError::LengthMismatch(..) => "length_mismatch",
            TotemError::TooFewProfiles(_) => "too_few_profiles",
            TotemError::InvalidEdgeThreshold(_) => "invalid_edge_threshold",
            TotemError::InvalidMinSize(_) => "invalid_min_size",
            TotemError::InvalidSimilarityThreshold(_) => "invalid_similarity_threshold",
            TotemError::InvalidMatrix => "invalid_matrix",
            TotemError::Io(_) => "io_error",
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        let message = e.to_string();
        let (base, path) = match e {
            LoadError::Io { path, .. } => (ApiError::new("io_error", ""), path),
            LoadError::Ingest { path, error } => (error.into(), path),
            LoadError::Totem { path, error } => (error.into(), path),
        };
        let mut details = serde_json::json!({ "path": path });
        if let Value::Object(extra) = base.details {
            details.as_object_mut().expect("object").extend(extra);
        }
        ApiError {
            code: base.code,
            message,
            details,
        }
    }
}
