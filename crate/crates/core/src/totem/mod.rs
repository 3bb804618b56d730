//! People analysis over captions and detections: a caption token pipeline,
//! a shared-object graph with maximal-clique extraction, and cosine
//! similarity of per-person object count vectors.

mod cliques;
mod graph;
mod pipeline;
mod profile;
mod similarity;

use thiserror::Error;

pub use cliques::{enumerate_cliques, maximal_cliques};
pub use graph::{build_graph, CooccurrenceGraph, Edge};
pub use pipeline::{
    object_tokens, parse_lemma_table, parse_stopwords, preprocess, TokenPipelineConfig,
    DEFAULT_STOPWORDS,
};
pub use profile::{build_profiles, PersonProfile};
pub use similarity::{cosine, find_groups, similarity_matrix, CandidateGroup, Cosine, SimilarityMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TotemError {
    #[error("line {line}: malformed lemma entry: {reason}")]
    MalformedLemma { line: usize, reason: String },
    #[error("lemma table is not closed: `{token}` -> `{lemma}` but `{lemma}` -> `{next}`")]
    LemmaNotClosed {
        token: String,
        lemma: String,
        next: String,
    },
    #[error("lemma `{0}` is a stopword")]
    LemmaIsStopword(String),
    #[error("`{0}` is not a single lowercase alphanumeric token")]
    InvalidToken(String),
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two profiles are required, found {0}")]
    TooFewProfiles(usize),
    #[error("edge threshold must be at least 1, got {0}")]
    InvalidEdgeThreshold(usize),
    #[error("minimum clique size must be at least 2, got {0}")]
    InvalidMinSize(usize),
    #[error("similarity threshold must lie in [0, 1], got {0}")]
    InvalidSimilarityThreshold(f64),
    #[error("similarity matrix is not square and symmetric")]
    InvalidMatrix,
    #[error("read error: {0}")]
    Io(String),
}
