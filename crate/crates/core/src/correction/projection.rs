use serde::Serialize;

use super::event::{CorrectionEvent, EventPayload};
use super::state::SessionState;
use super::CorrectionError;
use crate::dataset::Dataset;
use crate::metrics::Summary;

/// `after_event` of the pre-correction snapshot.
pub const BASELINE_EVENT: i64 = -1;

/// Confidence statistics of a class's remaining detections after an event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSnapshot {
    pub class_label: String,
    pub after_event: i64,
    pub n_remaining: usize,
    pub mean_confidence: Option<f64>,
    pub variance_confidence: Option<f64>,
    pub empty: bool,
}

fn snapshot(dataset: &Dataset, state: &SessionState, class: &str, after_event: i64) -> ProjectionSnapshot {
    let confs: Vec<f64> = dataset
        .detections
        .of_class(class)
        .filter(|d| !state.is_eliminated(&d.id))
        .map(|d| d.confidence)
        .collect();
    let summary = Summary::of(&confs);
    ProjectionSnapshot {
        class_label: class.to_string(),
        after_event,
        n_remaining: confs.len(),
        mean_confidence: summary.map(|s| s.mean),
        variance_confidence: summary.map(|s| s.variance),
        empty: summary.is_none(),
    }
}

fn touches_class(dataset: &Dataset, ids: &[String], class: &str) -> bool {
    ids.iter()
        .filter_map(|id| dataset.detections.get(id))
        .any(|d| d.class_label == class)
}

/// Baseline snapshot followed by one snapshot per event that changed the
/// class's set of active detections (eliminations and their reverts).
pub fn projection_series(
    dataset: &Dataset,
    events: &[CorrectionEvent],
    class: &str,
) -> Result<Vec<ProjectionSnapshot>, CorrectionError> {
    if dataset.detections.of_class(class).next().is_none() {
        return Err(CorrectionError::NoSuchClass(class.to_string()));
    }
    let mut state = SessionState::default();
    let mut series = vec![snapshot(dataset, &state, class, BASELINE_EVENT)];
    for (index, event) in events.iter().enumerate() {
        state
            .apply(dataset, event)
            .map_err(|e| CorrectionError::CorruptLog {
                index,
                reason: e.to_string(),
            })?;
        let affected = match &event.payload {
            EventPayload::EliminateFp { detection_ids } => touches_class(dataset, detection_ids, class),
            EventPayload::Revert { target } => match state.payload(*target) {
                Some(EventPayload::EliminateFp { detection_ids }) => touches_class(dataset, detection_ids, class),
                _ => false,
            },
            _ => false,
        };
        if affected {
            series.push(snapshot(dataset, &state, class, event.index as i64));
        }
    }
    Ok(series)
}
