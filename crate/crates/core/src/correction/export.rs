use std::io::Write;

use super::state::SessionState;
use crate::dataset::Dataset;
use crate::ingest::{write_ground_truth_line, BBox};

/// One exported annotation. `source_id` is the detection id, or
/// `fn:<event index>` for a user-added false negative; it orders records
/// but is not written.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportRecord {
    pub image_id: String,
    pub class_label: String,
    pub bbox: BBox,
    pub source_id: String,
}

/// Surviving detections with their effective boxes plus user-added false
/// negatives, ordered by image id, class, then source id.
pub fn export_annotations(dataset: &Dataset, state: &SessionState) -> Vec<ExportRecord> {
    let mut records: Vec<ExportRecord> = state
        .active_detections(dataset)
        .map(|(d, bbox)| ExportRecord {
            image_id: d.image_id.clone(),
            class_label: d.class_label.clone(),
            bbox,
            source_id: d.id.clone(),
        })
        .chain(state.added_annotations().map(|(index, a)| ExportRecord {
            image_id: a.image_id.clone(),
            class_label: a.class_label.clone(),
            bbox: a.bbox,
            source_id: format!("fn:{index}"),
        }))
        .collect();
    records.sort_by(|a, b| {
        (&a.image_id, &a.class_label, &a.source_id).cmp(&(&b.image_id, &b.class_label, &b.source_id))
    });
    records
}

/// Writes records in the ground-truth file format.
pub fn write_export<W: Write>(mut w: W, records: &[ExportRecord]) -> std::io::Result<()> {
    for r in records {
        write_ground_truth_line(&mut w, &r.image_id, &r.class_label, &r.bbox)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::event::EventPayload;
    use super::super::state::replay;
    use super::super::state::tests::{dog_dataset, event};
    use super::*;

    #[test]
    fn untouched_session_exports_all_detections() {
        let ds = dog_dataset();
        let recs = export_annotations(&ds, &SessionState::default());
        assert_eq!(recs.len(), 3);
        let mut out = Vec::new();
        write_export(&mut out, &recs).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"image_id":"img1","class":"dog","bbox":[0.0,0.0,10.0,10.0]}"#
        );
    }

    #[test]
    fn elimination_drops_a_record_and_fn_adds_one() {
        let ds = dog_dataset();
        let log = [
            event(
                0,
                EventPayload::EliminateFp {
                    detection_ids: vec!["d2".into()],
                },
            ),
            event(
                1,
                EventPayload::AddFalseNegative {
                    image_id: "img0".into(),
                    class: "cat".into(),
                    bbox: BBox::new(1.0, 1.0, 2.0, 2.0).unwrap(),
                },
            ),
        ];
        let state = replay(&log[..1], &ds).unwrap();
        assert_eq!(export_annotations(&ds, &state).len(), 2);
        let state = replay(&log, &ds).unwrap();
        let recs = export_annotations(&ds, &state);
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].image_id, "img0");
        assert_eq!(recs[0].source_id, "fn:1");
    }
}
