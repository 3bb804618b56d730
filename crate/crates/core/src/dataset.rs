//! A dataset is the immutable bundle of input files one analysis runs on.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{
    parse_captions, parse_detections, parse_ground_truth, parse_vocabulary, CaptionDoc,
    ClassVocabulary, DetectionSet, GroundTruthAnnotation, IngestError, IngestOptions,
};
use crate::totem::{build_profiles, parse_lemma_table, parse_stopwords, PersonProfile, TokenPipelineConfig, TotemError};

pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const VOCABULARY_FILE: &str = "vocabulary.txt";
pub const CAPTIONS_FILE: &str = "captions.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";
pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const LEMMAS_FILE: &str = "lemmas.tsv";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocabulary: ClassVocabulary,
    pub detections: DetectionSet,
    pub ground_truth: Vec<GroundTruthAnnotation>,
    pub captions: Vec<CaptionDoc>,
    pub pipeline: TokenPipelineConfig,
}

impl Dataset {
    pub fn new(vocabulary: ClassVocabulary, detections: DetectionSet) -> Self {
        Dataset {
            vocabulary,
            detections,
            ground_truth: Vec::new(),
            captions: Vec::new(),
            pipeline: TokenPipelineConfig::default(),
        }
    }

    pub fn profiles(&self) -> Vec<PersonProfile> {
        build_profiles(&self.captions, &self.detections, &self.vocabulary, &self.pipeline)
    }
}

/// Source files of a dataset. Only detections and vocabulary are required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub detections: PathBuf,
    pub vocabulary: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
}

impl DatasetPaths {
    /// Conventional layout: required files are always named, optional ones
    /// only when present on disk.
    pub fn from_dir(dir: &Path) -> Self {
        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        DatasetPaths {
            detections: dir.join(DETECTIONS_FILE),
            vocabulary: dir.join(VOCABULARY_FILE),
            captions: optional(CAPTIONS_FILE),
            ground_truth: optional(GROUND_TRUTH_FILE),
            stopwords: optional(STOPWORDS_FILE),
            lemmas: optional(LEMMAS_FILE),
            images: optional(IMAGES_DIR),
        }
    }

    fn files(&self) -> [(&'static str, Option<&Path>); 6] {
        [
            ("detections", Some(self.detections.as_path())),
            ("vocabulary", Some(self.vocabulary.as_path())),
            ("captions", self.captions.as_deref()),
            ("ground_truth", self.ground_truth.as_deref()),
            ("stopwords", self.stopwords.as_deref()),
            ("lemmas", self.lemmas.as_deref()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io { path: PathBuf, message: String },
    Ingest { path: PathBuf, error: IngestError },
    Totem { path: PathBuf, error: TotemError },
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            LoadError::Ingest { path, error } => write_located(f, path, error.line(), error),
            LoadError::Totem { path, error } => {
                let line = match error {
                    TotemError::MalformedLemma { line, .. } => Some(*line),
                    _ => None,
                };
                write_located(f, path, line, error)
            }
        }
    }
}

fn write_located(f: &mut fmt::Formatter<'_>, path: &Path, line: Option<usize>, e: &dyn fmt::Display) -> fmt::Result {
    match line {
        Some(l) => {
            // Errors carry their own `line N: ` prefix; fold it into the location.
            let msg = e.to_string();
            let prefix = format!("line {l}: ");
            write!(f, "{}:{l}: {}", path.display(), msg.strip_prefix(&prefix).unwrap_or(&msg))
        }
        None => write!(f, "{}: {e}", path.display()),
    }
}

impl std::error::Error for LoadError {}

/// A skipped line in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub error: IngestError,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_located(f, &self.path, self.error.line(), &self.error)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub digest: String,
    pub diagnostics: Vec<Diagnostic>,
}

fn open(path: &Path) -> Result<BufReader<File>, LoadError> {
    File::open(path).map(BufReader::new).map_err(|e| LoadError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// SHA-256 over every source file, tagged by role; absent optional files
/// hash as a distinct marker.
pub fn content_digest(paths: &DatasetPaths) -> Result<String, LoadError> {
    let mut hasher = Sha256::new();
    for (role, path) in paths.files() {
        hasher.update(role.as_bytes());
        match path {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| LoadError::Io {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?;
                hasher.update((bytes.len() as u64).to_le_bytes());
                hasher.update(&bytes);
            }
            None => hasher.update(b"\xffabsent"),
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn load_dataset(paths: &DatasetPaths, opts: &IngestOptions) -> Result<LoadedDataset, LoadError> {
    let ingest_err = |path: &Path| {
        let path = path.to_path_buf();
        move |error| LoadError::Ingest { path, error }
    };
    let mut diagnostics = Vec::new();
    let mut note = |path: &Path, skipped: Vec<IngestError>| {
        diagnostics.extend(skipped.into_iter().map(|error| Diagnostic {
            path: path.to_path_buf(),
            error,
        }));
    };

    let vocabulary = parse_vocabulary(open(&paths.vocabulary)?).map_err(ingest_err(&paths.vocabulary))?;
    let parsed = parse_detections(open(&paths.detections)?, &vocabulary, opts)
        .map_err(ingest_err(&paths.detections))?;
    note(&paths.detections, parsed.skipped);
    let detections = parsed.value;

    let mut dataset = Dataset::new(vocabulary, detections);
    if let Some(p) = &paths.captions {
        let parsed = parse_captions(open(p)?, opts).map_err(ingest_err(p))?;
        note(p, parsed.skipped);
        dataset.captions = parsed.value;
    }
    if let Some(p) = &paths.ground_truth {
        let parsed = parse_ground_truth(open(p)?, &dataset.vocabulary, opts).map_err(ingest_err(p))?;
        note(p, parsed.skipped);
        dataset.ground_truth = parsed.value;
    }

    let totem_err = |path: &Path| {
        let path = path.to_path_buf();
        move |error| LoadError::Totem { path, error }
    };
    let stopwords = match &paths.stopwords {
        Some(p) => parse_stopwords(open(p)?).map_err(totem_err(p))?,
        None => crate::totem::DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
    };
    let (lemmas, lemma_path) = match &paths.lemmas {
        Some(p) => (parse_lemma_table(open(p)?).map_err(totem_err(p))?, p.clone()),
        None => (Default::default(), PathBuf::new()),
    };
    dataset.pipeline = TokenPipelineConfig::new(stopwords, lemmas).map_err(totem_err(&lemma_path))?;

    Ok(LoadedDataset {
        dataset,
        digest: content_digest(paths)?,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    fn fixture(dir: &Path) {
        write(dir, VOCABULARY_FILE, "dog\ncat\n");
        write(
            dir,
            DETECTIONS_FILE,
            "{\"image_id\":\"i1\",\"class\":\"dog\",\"bbox\":[0,0,2,2],\"confidence\":0.5}\n",
        );
    }

    #[test]
    fn loads_conventional_layout() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        write(tmp.path(), CAPTIONS_FILE, "{\"person_id\":\"P1\",\"text\":\"dogs\"}\n");
        write(tmp.path(), LEMMAS_FILE, "dogs\tdog\n");
        let paths = DatasetPaths::from_dir(tmp.path());
        assert!(paths.ground_truth.is_none());
        let loaded = load_dataset(&paths, &IngestOptions::default()).unwrap();
        assert_eq!(loaded.dataset.detections.len(), 1);
        let profiles = loaded.dataset.profiles();
        assert_eq!(profiles[0].object_tokens.len(), 1);
        assert_eq!(loaded.digest.len(), 64);
    }

    #[test]
    fn digest_tracks_content() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        let paths = DatasetPaths::from_dir(tmp.path());
        let a = content_digest(&paths).unwrap();
        assert_eq!(a, content_digest(&paths).unwrap());
        write(tmp.path(), VOCABULARY_FILE, "dog\ncat\nbird\n");
        assert_ne!(a, content_digest(&paths).unwrap());
    }

    #[test]
    fn errors_name_file_and_line() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        write(tmp.path(), DETECTIONS_FILE, "{}\n{\n");
        let err = load_dataset(&DatasetPaths::from_dir(tmp.path()), &IngestOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("detections.jsonl:1: malformed record"), "{msg}");
    }
}
