use std::collections::BTreeMap;

use serde::Serialize;

use super::state::SessionState;
use super::CorrectionError;
use crate::dataset::Dataset;
use crate::ingest::{AnnotationSource, BBox};

/// Minimum IoU for a ground-truth box and a prediction to match.
pub const IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthEntry {
    pub bbox: BBox,
    pub source: AnnotationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionEntry {
    pub detection_id: String,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub ground_truth: GroundTruthEntry,
    pub prediction: PredictionEntry,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMapping {
    pub class_label: String,
    pub matches: Vec<MatchedPair>,
    pub false_negatives: Vec<GroundTruthEntry>,
    pub candidate_false_positives: Vec<PredictionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingReport {
    pub image_id: String,
    pub classes: Vec<ClassMapping>,
}

/// Greedy one-to-one matching, highest IoU first. Ties break on ground
/// truth position, then prediction position.
fn match_class(class_label: &str, gts: Vec<GroundTruthEntry>, preds: Vec<PredictionEntry>) -> ClassMapping {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        for (pi, p) in preds.iter().enumerate() {
            let iou = g.bbox.iou(&p.bbox);
            if iou >= IOU_THRESHOLD {
                pairs.push((iou, gi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gts.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut matched = Vec::new();
    for (iou, gi, pi) in pairs {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            matched.push((iou, gi, pi));
        }
    }
    let matches = matched
        .into_iter()
        .map(|(iou, gi, pi)| MatchedPair {
            ground_truth: gts[gi].clone(),
            prediction: preds[pi].clone(),
            iou,
        })
        .collect();
    ClassMapping {
        class_label: class_label.to_string(),
        matches,
        false_negatives: gts
            .into_iter()
            .zip(gt_used)
            .filter(|(_, used)| !used)
            .map(|(g, _)| g)
            .collect(),
        candidate_false_positives: preds
            .into_iter()
            .zip(pred_used)
            .filter(|(_, used)| !used)
            .map(|(p, _)| p)
            .collect(),
    }
}

/// Ground truth (provided plus user-added) against the image's active
/// detections, per class in label order.
pub fn gt_prediction_mapping(
    dataset: &Dataset,
    state: &SessionState,
    image_id: &str,
) -> Result<MappingReport, CorrectionError> {
    type Buckets = (Vec<GroundTruthEntry>, Vec<PredictionEntry>);
    let mut by_class: BTreeMap<String, Buckets> = BTreeMap::new();
    for g in state.effective_ground_truth(dataset) {
        if g.image_id == image_id {
            by_class.entry(g.class_label).or_default().0.push(GroundTruthEntry {
                bbox: g.bbox,
                source: g.source,
            });
        }
    }
    for (d, bbox) in state.active_detections(dataset) {
        if d.image_id == image_id {
            by_class.entry(d.class_label.clone()).or_default().1.push(PredictionEntry {
                detection_id: d.id.clone(),
                bbox,
                confidence: d.confidence,
            });
        }
    }
    if by_class.is_empty() {
        return Err(CorrectionError::UnknownImage(image_id.to_string()));
    }
    Ok(MappingReport {
        image_id: image_id.to_string(),
        classes: by_class
            .into_iter()
            .map(|(class, (gts, preds))| match_class(&class, gts, preds))
            .collect(),
    })
}
