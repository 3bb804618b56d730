use chrono::{DateTime, Utc};

use super::event::{CorrectionEvent, EventPayload};
use super::export::{export_annotations, ExportRecord};
use super::mapping::{gt_prediction_mapping, MappingReport};
use super::projection::{projection_series, ProjectionSnapshot};
use super::state::{replay, SessionState};
use super::CorrectionError;
use crate::dataset::Dataset;
use crate::ingest::BBox;

/// A correction session: its append-only log and the state folded from it.
#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub dataset_id: String,
    pub created_at: DateTime<Utc>,
    events: Vec<CorrectionEvent>,
    state: SessionState,
}

impl Session {
    pub fn new(session_id: impl Into<String>, dataset_id: impl Into<String>, created_at: DateTime<Utc>) -> Self {
        Session {
            session_id: session_id.into(),
            dataset_id: dataset_id.into(),
            created_at,
            events: Vec::new(),
            state: SessionState::default(),
        }
    }

    /// Rebuilds a session by replaying a persisted log.
    pub fn from_log(
        session_id: impl Into<String>,
        dataset_id: impl Into<String>,
        created_at: DateTime<Utc>,
        events: Vec<CorrectionEvent>,
        dataset: &Dataset,
    ) -> Result<Self, CorrectionError> {
        let state = replay(&events, dataset)?;
        Ok(Session {
            session_id: session_id.into(),
            dataset_id: dataset_id.into(),
            created_at,
            events,
            state,
        })
    }

    pub fn events(&self) -> &[CorrectionEvent] {
        &self.events
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    /// Validates `payload` against the current state and appends it. A
    /// rejected payload leaves the log untouched.
    pub fn append(
        &mut self,
        dataset: &Dataset,
        payload: EventPayload,
        actor: impl Into<String>,
        at: DateTime<Utc>,
    ) -> Result<&CorrectionEvent, CorrectionError> {
        let event = CorrectionEvent {
            index: self.events.len() as u64,
            payload,
            actor: actor.into(),
            at,
        };
        self.state.apply(dataset, &event)?;
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn eliminate_false_positives(
        &mut self,
        dataset: &Dataset,
        detection_ids: Vec<String>,
        actor: &str,
        at: DateTime<Utc>,
    ) -> Result<&CorrectionEvent, CorrectionError> {
        self.append(dataset, EventPayload::EliminateFp { detection_ids }, actor, at)
    }

    pub fn reannotate_bbox(
        &mut self,
        dataset: &Dataset,
        detection_id: &str,
        bbox: BBox,
        actor: &str,
        at: DateTime<Utc>,
    ) -> Result<&CorrectionEvent, CorrectionError> {
        let payload = EventPayload::ReannotateBbox {
            detection_id: detection_id.to_string(),
            bbox,
        };
        self.append(dataset, payload, actor, at)
    }

    pub fn add_false_negative(
        &mut self,
        dataset: &Dataset,
        image_id: &str,
        class: &str,
        bbox: BBox,
        actor: &str,
        at: DateTime<Utc>,
    ) -> Result<&CorrectionEvent, CorrectionError> {
        let payload = EventPayload::AddFalseNegative {
            image_id: image_id.to_string(),
            class: class.to_string(),
            bbox,
        };
        self.append(dataset, payload, actor, at)
    }

    pub fn revert(
        &mut self,
        dataset: &Dataset,
        target: u64,
        actor: &str,
        at: DateTime<Utc>,
    ) -> Result<&CorrectionEvent, CorrectionError> {
        self.append(dataset, EventPayload::Revert { target }, actor, at)
    }

    pub fn projection_series(&self, dataset: &Dataset, class: &str) -> Result<Vec<ProjectionSnapshot>, CorrectionError> {
        projection_series(dataset, &self.events, class)
    }

    pub fn mapping(&self, dataset: &Dataset, image_id: &str) -> Result<MappingReport, CorrectionError> {
        gt_prediction_mapping(dataset, &self.state, image_id)
    }

    pub fn export(&self, dataset: &Dataset) -> Vec<ExportRecord> {
        export_annotations(dataset, &self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::super::state::tests::dog_dataset;
    use super::*;
    use chrono::TimeZone;

    fn t() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 10, 16, 12, 0, 0).unwrap()
    }

    #[test]
    fn new_session_is_empty() {
        let s = Session::new("s1", "ds", t());
        assert!(s.events().is_empty());
    }

    #[test]
    fn rejected_batch_keeps_log_length() {
        let ds = dog_dataset();
        let mut s = Session::new("s1", "ds", t());
        s.eliminate_false_positives(&ds, vec!["d3".into()], "u", t()).unwrap();
        let err = s
            .eliminate_false_positives(&ds, vec!["d1".into(), "d3".into()], "u", t())
            .unwrap_err();
        assert_eq!(err, CorrectionError::AlreadyEliminated("d3".into()));
        assert_eq!(s.events().len(), 1);
        assert!(!s.state().is_eliminated("d1"));
        let err = s.eliminate_false_positives(&ds, vec![], "u", t()).unwrap_err();
        assert_eq!(err, CorrectionError::EmptyBatch);
        assert_eq!(s.events().len(), 1);
    }

    #[test]
    fn from_log_matches_live_session() {
        let ds = dog_dataset();
        let mut live = Session::new("s1", "ds", t());
        live.eliminate_false_positives(&ds, vec!["d3".into()], "u", t()).unwrap();
        live.reannotate_bbox(&ds, "d1", BBox::new(1.0, 1.0, 3.0, 3.0).unwrap(), "u", t())
            .unwrap();
        live.revert(&ds, 0, "u", t()).unwrap();
        let rebuilt = Session::from_log("s1", "ds", t(), live.events().to_vec(), &ds).unwrap();
        assert_eq!(rebuilt.state(), live.state());
        assert_eq!(rebuilt.export(&ds), live.export(&ds));
    }
}
