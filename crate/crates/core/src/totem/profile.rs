use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::pipeline::{object_tokens, preprocess, TokenPipelineConfig};
use crate::ingest::{CaptionDoc, ClassVocabulary, DetectionSet};

/// A person's object evidence from two sources: object tokens from their
/// captions and per-class detection counts from the prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersonProfile {
    pub person_id: String,
    pub object_tokens: BTreeSet<String>,
    /// Indexed by vocabulary order.
    pub count_vector: Vec<u64>,
}

impl PersonProfile {
    pub fn new(person_id: impl Into<String>, vocab_len: usize) -> Self {
        PersonProfile {
            person_id: person_id.into(),
            object_tokens: BTreeSet::new(),
            count_vector: vec![0; vocab_len],
        }
    }
}

/// One profile per person seen in captions or detections, ordered by id.
pub fn build_profiles(
    captions: &[CaptionDoc],
    detections: &DetectionSet,
    vocab: &ClassVocabulary,
    config: &TokenPipelineConfig,
) -> Vec<PersonProfile> {
    let mut profiles: BTreeMap<&str, PersonProfile> = BTreeMap::new();
    for doc in captions {
        let tokens = preprocess(&doc.text, config);
        profiles
            .entry(&doc.person_id)
            .or_insert_with(|| PersonProfile::new(&doc.person_id, vocab.len()))
            .object_tokens
            .extend(object_tokens(&tokens, vocab));
    }
    for d in detections {
        let (Some(person), Some(axis)) = (d.person_id.as_deref(), vocab.position(&d.class_label)) else {
            continue;
        };
        profiles
            .entry(person)
            .or_insert_with(|| PersonProfile::new(person, vocab.len()))
            .count_vector[axis] += 1;
    }
    profiles.into_values().collect()
}
