use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::event::{CorrectionEvent, EventPayload};
use super::CorrectionError;
use crate::dataset::Dataset;
use crate::ingest::{AnnotationSource, BBox, Detection, GroundTruthAnnotation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AddedAnnotation {
    pub image_id: String,
    pub class_label: String,
    pub bbox: BBox,
}

/// Effective state of a session: the fold of its event log.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SessionState {
    event_count: u64,
    /// Detection id -> index of the event that eliminated it.
    eliminated: BTreeMap<String, u64>,
    /// Detection id -> live re-annotations keyed by event index.
    reannotations: BTreeMap<String, BTreeMap<u64, BBox>>,
    /// User-added ground truth keyed by event index.
    added: BTreeMap<u64, AddedAnnotation>,
    reverted: BTreeSet<u64>,
    #[serde(skip)]
    history: Vec<EventPayload>,
}

impl SessionState {
    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn is_eliminated(&self, detection_id: &str) -> bool {
        self.eliminated.contains_key(detection_id)
    }

    pub fn is_reverted(&self, index: u64) -> bool {
        self.reverted.contains(&index)
    }

    pub fn payload(&self, index: u64) -> Option<&EventPayload> {
        self.history.get(index as usize)
    }

    /// Latest live re-annotation, or the predicted box.
    pub fn effective_bbox(&self, detection: &Detection) -> BBox {
        self.reannotations
            .get(&detection.id)
            .and_then(|h| h.values().next_back())
            .copied()
            .unwrap_or(detection.bbox)
    }

    /// Active detections in dataset order, paired with their effective box.
    pub fn active_detections<'a>(&'a self, dataset: &'a Dataset) -> impl Iterator<Item = (&'a Detection, BBox)> + 'a {
        dataset
            .detections
            .iter()
            .filter(|d| !self.is_eliminated(&d.id))
            .map(|d| (d, self.effective_bbox(d)))
    }

    /// Live user-added annotations in event order.
    pub fn added_annotations(&self) -> impl Iterator<Item = (u64, &AddedAnnotation)> {
        self.added.iter().map(|(&i, a)| (i, a))
    }

    /// Provided ground truth followed by live user additions.
    pub fn effective_ground_truth(&self, dataset: &Dataset) -> Vec<GroundTruthAnnotation> {
        dataset
            .ground_truth
            .iter()
            .cloned()
            .chain(self.added.values().map(|a| GroundTruthAnnotation {
                image_id: a.image_id.clone(),
                class_label: a.class_label.clone(),
                bbox: a.bbox,
                source: AnnotationSource::UserAdded,
            }))
            .collect()
    }

    fn active_detection<'a>(&self, dataset: &'a Dataset, id: &str) -> Result<&'a Detection, CorrectionError> {
        let d = dataset
            .detections
            .get(id)
            .ok_or_else(|| CorrectionError::UnknownDetection(id.to_string()))?;
        if self.is_eliminated(id) {
            return Err(CorrectionError::AlreadyEliminated(id.to_string()));
        }
        Ok(d)
    }

    /// Checks a payload against the current state without changing it.
    pub fn validate(&self, dataset: &Dataset, payload: &EventPayload) -> Result<(), CorrectionError> {
        match payload {
            EventPayload::EliminateFp { detection_ids } => {
                if detection_ids.is_empty() {
                    return Err(CorrectionError::EmptyBatch);
                }
                let mut seen = HashSet::new();
                for id in detection_ids {
                    self.active_detection(dataset, id)?;
                    if !seen.insert(id) {
                        return Err(CorrectionError::AlreadyEliminated(id.clone()));
                    }
                }
            }
            EventPayload::ReannotateBbox { detection_id, .. } => {
                self.active_detection(dataset, detection_id)?;
            }
            EventPayload::AddFalseNegative { image_id, class, .. } => {
                if image_id.is_empty() {
                    return Err(CorrectionError::InvalidPayload("empty image_id".into()));
                }
                if !dataset.vocabulary.contains(class) {
                    return Err(CorrectionError::UnknownClass(class.clone()));
                }
            }
            EventPayload::Revert { target } => {
                let invalid = |reason: &str| CorrectionError::InvalidRevert {
                    target: *target,
                    reason: reason.to_string(),
                };
                match self.payload(*target) {
                    None => return Err(invalid("no earlier event with that index")),
                    Some(EventPayload::Revert { .. }) => return Err(invalid("target is itself a revert")),
                    Some(_) if self.is_reverted(*target) => {
                        return Err(CorrectionError::AlreadyReverted(*target))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    /// Validates and folds one event. The event index must be the next one.
    pub fn apply(&mut self, dataset: &Dataset, event: &CorrectionEvent) -> Result<(), CorrectionError> {
        if event.index != self.event_count {
            return Err(CorrectionError::InvalidPayload(format!(
                "expected event index {}, found {}",
                self.event_count, event.index
            )));
        }
        self.validate(dataset, &event.payload)?;
        let index = event.index;
        match &event.payload {
            EventPayload::EliminateFp { detection_ids } => {
                for id in detection_ids {
                    self.eliminated.insert(id.clone(), index);
                }
            }
            EventPayload::ReannotateBbox { detection_id, bbox } => {
                self.reannotations
                    .entry(detection_id.clone())
                    .or_default()
                    .insert(index, *bbox);
            }
            EventPayload::AddFalseNegative { image_id, class, bbox } => {
                self.added.insert(
                    index,
                    AddedAnnotation {
                        image_id: image_id.clone(),
                        class_label: class.clone(),
                        bbox: *bbox,
                    },
                );
            }
            EventPayload::Revert { target } => {
                self.undo(*target);
                self.reverted.insert(*target);
            }
        }
        self.history.push(event.payload.clone());
        self.event_count += 1;
        Ok(())
    }

    fn undo(&mut self, target: u64) {
        match self.history[target as usize].clone() {
            EventPayload::EliminateFp { detection_ids } => {
                for id in detection_ids {
                    if self.eliminated.get(&id) == Some(&target) {
                        self.eliminated.remove(&id);
                    }
                }
            }
            EventPayload::ReannotateBbox { detection_id, .. } => {
                if let Some(h) = self.reannotations.get_mut(&detection_id) {
                    h.remove(&target);
                    if h.is_empty() {
                        self.reannotations.remove(&detection_id);
                    }
                }
            }
            EventPayload::AddFalseNegative { .. } => {
                self.added.remove(&target);
            }
            EventPayload::Revert { .. } => unreachable!("validated: revert targets are never reverts"),
        }
    }
}

/// Folds a whole log over the dataset. The first violated invariant is
/// reported as `CorruptLog` with its position.
pub fn replay(events: &[CorrectionEvent], dataset: &Dataset) -> Result<SessionState, CorrectionError> {
    let mut state = SessionState::default();
    for (index, event) in events.iter().enumerate() {
        state
            .apply(dataset, event)
            .map_err(|e| CorrectionError::CorruptLog {
                index,
                reason: e.to_string(),
            })?;
    }
    Ok(state)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ingest::{ClassVocabulary, DetectionSet};
    use chrono::{TimeZone, Utc};

    pub(crate) fn dog_dataset() -> Dataset {
        let det = |id: &str, conf: f64| Detection {
            id: id.into(),
            image_id: "img1".into(),
            class_label: "dog".into(),
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            confidence: conf,
            person_id: None,
        };
        Dataset::new(
            ClassVocabulary::new(["dog", "cat"]).unwrap(),
            DetectionSet::new(vec![det("d1", 0.9), det("d2", 0.8), det("d3", 0.2)]).unwrap(),
        )
    }

    pub(crate) fn event(index: u64, payload: EventPayload) -> CorrectionEvent {
        CorrectionEvent {
            index,
            payload,
            actor: "tester".into(),
            at: Utc.with_ymd_and_hms(2026, 10, 16, 9, 0, 0).unwrap(),
        }
    }

    fn elim(ids: &[&str]) -> EventPayload {
        EventPayload::EliminateFp {
            detection_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn empty_log_is_baseline() {
        let ds = dog_dataset();
        let s = replay(&[], &ds).unwrap();
        assert_eq!(s, SessionState::default());
        assert_eq!(s.active_detections(&ds).count(), 3);
    }

    #[test]
    fn eliminate_then_revert_restores_baseline_activity() {
        let ds = dog_dataset();
        let log = [event(0, elim(&["d3"])), event(1, EventPayload::Revert { target: 0 })];
        let s = replay(&log, &ds).unwrap();
        assert!(!s.is_eliminated("d3"));
        assert_eq!(s.active_detections(&ds).count(), 3);
    }

    #[test]
    fn revert_rules() {
        let ds = dog_dataset();
        let mut s = SessionState::default();
        s.apply(&ds, &event(0, elim(&["d1"]))).unwrap();
        s.apply(&ds, &event(1, EventPayload::Revert { target: 0 })).unwrap();
        assert_eq!(
            s.validate(&ds, &EventPayload::Revert { target: 0 }),
            Err(CorrectionError::AlreadyReverted(0))
        );
        assert!(matches!(
            s.validate(&ds, &EventPayload::Revert { target: 1 }),
            Err(CorrectionError::InvalidRevert { target: 1, .. })
        ));
        assert!(matches!(
            s.validate(&ds, &EventPayload::Revert { target: 5 }),
            Err(CorrectionError::InvalidRevert { .. })
        ));
    }

    #[test]
    fn batch_validation() {
        let ds = dog_dataset();
        let mut s = SessionState::default();
        assert_eq!(s.validate(&ds, &elim(&[])), Err(CorrectionError::EmptyBatch));
        assert_eq!(
            s.validate(&ds, &elim(&["d1", "nope"])),
            Err(CorrectionError::UnknownDetection("nope".into()))
        );
        assert_eq!(
            s.validate(&ds, &elim(&["d1", "d1"])),
            Err(CorrectionError::AlreadyEliminated("d1".into()))
        );
        s.apply(&ds, &event(0, elim(&["d1"]))).unwrap();
        assert_eq!(
            s.validate(&ds, &elim(&["d2", "d1"])),
            Err(CorrectionError::AlreadyEliminated("d1".into()))
        );
        assert!(!s.is_eliminated("d2"));
    }

    #[test]
    fn reannotation_last_writer_wins_and_revert_falls_back() {
        let ds = dog_dataset();
        let b1 = BBox::new(1.0, 1.0, 5.0, 5.0).unwrap();
        let b2 = BBox::new(2.0, 2.0, 6.0, 6.0).unwrap();
        let re = |b| EventPayload::ReannotateBbox {
            detection_id: "d1".into(),
            bbox: b,
        };
        let log = [event(0, re(b1)), event(1, re(b2))];
        let s = replay(&log, &ds).unwrap();
        let d1 = ds.detections.get("d1").unwrap();
        assert_eq!(s.effective_bbox(d1), b2);
        let mut log = log.to_vec();
        log.push(event(2, EventPayload::Revert { target: 1 }));
        assert_eq!(replay(&log, &ds).unwrap().effective_bbox(d1), b1);
    }

    #[test]
    fn cannot_reannotate_eliminated() {
        let ds = dog_dataset();
        let mut s = SessionState::default();
        s.apply(&ds, &event(0, elim(&["d1"]))).unwrap();
        let err = s
            .validate(
                &ds,
                &EventPayload::ReannotateBbox {
                    detection_id: "d1".into(),
                    bbox: BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
                },
            )
            .unwrap_err();
        assert_eq!(err, CorrectionError::AlreadyEliminated("d1".into()));
    }

    #[test]
    fn false_negatives_extend_ground_truth() {
        let ds = dog_dataset();
        let fn_ev = |class: &str| EventPayload::AddFalseNegative {
            image_id: "i1".into(),
            class: class.into(),
            bbox: BBox::new(0.0, 0.0, 3.0, 3.0).unwrap(),
        };
        let s = replay(&[event(0, fn_ev("cat")), event(1, fn_ev("dog"))], &ds).unwrap();
        let gt = s.effective_ground_truth(&ds);
        assert_eq!(gt.len(), 2);
        assert!(gt.iter().all(|g| g.source == AnnotationSource::UserAdded));
        assert_eq!(
            s.validate(&ds, &fn_ev("horse")),
            Err(CorrectionError::UnknownClass("horse".into()))
        );
    }

    #[test]
    fn corrupt_log_names_first_bad_event() {
        let ds = dog_dataset();
        let log = [event(0, elim(&["d1"])), event(1, elim(&["d1"]))];
        assert!(matches!(
            replay(&log, &ds),
            Err(CorrectionError::CorruptLog { index: 1, .. })
        ));
        let gap = [event(0, elim(&["d1"])), event(2, elim(&["d2"]))];
        assert!(matches!(
            replay(&gap, &ds),
            Err(CorrectionError::CorruptLog { index: 1, .. })
        ));
    }
}
