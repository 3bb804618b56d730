use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::CorrectionError;
use crate::ingest::DetectionSet;

/// Share of images in which a class was predicted at least once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassProportion {
    pub class_label: String,
    pub image_count: usize,
    pub proportion: f64,
}

/// Classes ranked by the share of images they were predicted in, highest
/// first; ties go to the lexicographically smaller label.
pub fn class_proportions(detections: &DetectionSet) -> Result<Vec<ClassProportion>, CorrectionError> {
    if detections.is_empty() {
        return Err(CorrectionError::EmptyDataset);
    }
    let mut images: BTreeSet<&str> = BTreeSet::new();
    let mut per_class: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for d in detections {
        images.insert(&d.image_id);
        per_class.entry(&d.class_label).or_default().insert(&d.image_id);
    }
    let total = images.len() as f64;
    let mut out: Vec<ClassProportion> = per_class
        .into_iter()
        .map(|(label, imgs)| ClassProportion {
            class_label: label.to_string(),
            image_count: imgs.len(),
            proportion: imgs.len() as f64 / total,
        })
        .collect();
    // Already label-ordered, so a stable sort on count keeps ties lexicographic.
    out.sort_by_key(|p| std::cmp::Reverse(p.image_count));
    Ok(out)
}
