//! Parsing and validation of the line-delimited input files: detections,
//! class vocabulary, captions and ground-truth annotations.
//!
//! Every parser works over any [`BufRead`]. Line numbers in diagnostics are
//! 1-based. Blank lines carry no record and are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: invalid bounding box: {reason}")]
    InvalidBBox { line: usize, reason: String },
    #[error("line {line}: unknown class `{label}`")]
    UnknownClass { line: usize, label: String },
    #[error("line {line}: confidence {value} outside [0, 1]")]
    ConfidenceOutOfRange { line: usize, value: f64 },
    #[error("line {line}: duplicate detection id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("read error: {0}")]
    Io(String),
}

impl IngestError {
    /// The 1-based line the diagnostic refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::MalformedRecord { line, .. }
            | IngestError::InvalidBBox { line, .. }
            | IngestError::UnknownClass { line, .. }
            | IngestError::ConfidenceOutOfRange { line, .. }
            | IngestError::DuplicateId { line, .. }
            | IngestError::DuplicateLabel { line, .. } => Some(*line),
            IngestError::EmptyVocabulary | IngestError::Io(_) => None,
        }
    }
}

/// Invalid box geometry, independent of where the box came from.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BBoxError {
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("coordinates must be non-negative")]
    Negative,
    #[error("x2 ({x2}) must exceed x1 ({x1})")]
    ZeroWidth { x1: f64, x2: f64 },
    #[error("y2 ({y2}) must exceed y1 ({y1})")]
    ZeroHeight { y1: f64, y2: f64 },
}

/// Axis-aligned box in absolute pixel coordinates, `x2 > x1` and `y2 > y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BBoxError> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(BBoxError::NonFinite);
        }
        if x1 < 0.0 || y1 < 0.0 {
            return Err(BBoxError::Negative);
        }
        if x2 <= x1 {
            return Err(BBoxError::ZeroWidth { x1, x2 });
        }
        if y2 <= y1 {
            return Err(BBoxError::ZeroHeight { y1, y2 });
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Intersection over union. Zero for disjoint or edge-touching boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = self.x2.min(other.x2) - self.x1.max(other.x1);
        let ih = self.y2.min(other.y2) - self.y1.max(other.y1);
        if iw <= 0.0 || ih <= 0.0 {
            return 0.0;
        }
        let inter = iw * ih;
        inter / (self.area() + other.area() - inter)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BBoxError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Ordered, duplicate-free set of class labels. The order defines the axes
/// of per-person count vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassVocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassVocabulary {
    pub fn new<I, S>(labels: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = ClassVocabulary {
            labels: Vec::new(),
            index: HashMap::new(),
        };
        for (i, label) in labels.into_iter().enumerate() {
            let label = label.into();
            if label.is_empty() {
                return Err(IngestError::MalformedRecord {
                    line: i + 1,
                    reason: "empty label".into(),
                });
            }
            if vocab.index.contains_key(&label) {
                return Err(IngestError::DuplicateLabel { line: i + 1, label });
            }
            vocab.index.insert(label.clone(), vocab.labels.len());
            vocab.labels.push(label);
        }
        if vocab.labels.is_empty() {
            return Err(IngestError::EmptyVocabulary);
        }
        Ok(vocab)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: String,
    pub image_id: String,
    pub class_label: String,
    pub bbox: BBox,
    pub confidence: f64,
    /// Owner of the image, used to build per-person count vectors.
    pub person_id: Option<String>,
}

/// Immutable, ordered collection of detections with unique ids.
#[derive(Debug, Clone)]
pub struct DetectionSet {
    detections: Vec<Detection>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for DetectionSet {
    fn eq(&self, other: &Self) -> bool {
        self.detections == other.detections
    }
}

impl DetectionSet {
    /// Builds a set, rejecting duplicate ids (reported with a 1-based
    /// position).
    pub fn new(detections: Vec<Detection>) -> Result<Self, IngestError> {
        let mut by_id = HashMap::with_capacity(detections.len());
        for (i, d) in detections.iter().enumerate() {
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(IngestError::DuplicateId {
                    line: i + 1,
                    id: d.id.clone(),
                });
            }
        }
        Ok(DetectionSet { detections, by_id })
    }

    pub fn empty() -> Self {
        DetectionSet {
            detections: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Detection> {
        self.detections.iter()
    }

    pub fn as_slice(&self) -> &[Detection] {
        &self.detections
    }

    pub fn get(&self, id: &str) -> Option<&Detection> {
        self.by_id.get(id).map(|&i| &self.detections[i])
    }

    pub fn of_class<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Detection> + 'a {
        self.detections.iter().filter(move |d| d.class_label == label)
    }
}

impl<'a> IntoIterator for &'a DetectionSet {
    type Item = &'a Detection;
    type IntoIter = std::slice::Iter<'a, Detection>;

    fn into_iter(self) -> Self::IntoIter {
        self.detections.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionDoc {
    pub person_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Provided,
    UserAdded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthAnnotation {
    pub image_id: String,
    pub class_label: String,
    pub bbox: BBox,
    pub source: AnnotationSource,
}

/// How parsers react to a bad line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IngestOptions {
    /// Skip bad lines and collect their diagnostics instead of failing.
    pub lenient: bool,
    /// When set, incoming boxes are in `[0, 1]` and are scaled by
    /// `(width, height)` into pixels.
    pub normalized_image_size: Option<(f64, f64)>,
}

/// Parse output plus the diagnostics of skipped lines (lenient mode only).
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub skipped: Vec<IngestError>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    #[serde(default)]
    id: Option<String>,
    image_id: String,
    class: String,
    bbox: [f64; 4],
    confidence: f64,
    #[serde(default)]
    person_id: Option<String>,
}

#[derive(Debug, Serialize)]
struct DetectionRecordOut<'a> {
    id: &'a str,
    image_id: &'a str,
    class: &'a str,
    bbox: [f64; 4],
    confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    person_id: Option<&'a str>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionRecord {
    person_id: String,
    text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthRecord {
    image_id: String,
    class: String,
    bbox: [f64; 4],
}

/// One line of the ground-truth file format, also used for exports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthLine<'a> {
    pub image_id: &'a str,
    pub class: &'a str,
    pub bbox: [f64; 4],
}

fn for_each_line<R: BufRead>(
    reader: R,
    mut f: impl FnMut(usize, &str) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IngestError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        f(i + 1, trimmed)?;
    }
    Ok(())
}

fn malformed(line: usize, e: impl fmt::Display) -> IngestError {
    IngestError::MalformedRecord {
        line,
        reason: e.to_string(),
    }
}

fn convert_bbox(line: usize, raw: [f64; 4], opts: &IngestOptions) -> Result<BBox, IngestError> {
    let raw = match opts.normalized_image_size {
        Some((w, h)) => [raw[0] * w, raw[1] * h, raw[2] * w, raw[3] * h],
        None => raw,
    };
    BBox::try_from(raw).map_err(|e| IngestError::InvalidBBox {
        line,
        reason: e.to_string(),
    })
}

fn check_class(line: usize, label: &str, vocab: &ClassVocabulary) -> Result<(), IngestError> {
    if vocab.contains(label) {
        Ok(())
    } else {
        Err(IngestError::UnknownClass {
            line,
            label: label.to_string(),
        })
    }
}

/// Runs `parse` over each non-blank line; in strict mode the first error
/// aborts, in lenient mode bad lines are recorded and skipped.
fn collect_lines<R: BufRead, T>(
    reader: R,
    opts: &IngestOptions,
    mut parse: impl FnMut(usize, &str) -> Result<T, IngestError>,
) -> Result<Parsed<Vec<T>>, IngestError> {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for_each_line(reader, |line_no, line| {
        match parse(line_no, line) {
            Ok(v) => out.push(v),
            Err(e) if opts.lenient => skipped.push(e),
            Err(e) => return Err(e),
        }
        Ok(())
    })?;
    Ok(Parsed {
        value: out,
        skipped,
    })
}

/// Parses a detections file. Missing ids become `<image_id>#<line_no>`.
pub fn parse_detections<R: BufRead>(
    reader: R,
    vocab: &ClassVocabulary,
    opts: &IngestOptions,
) -> Result<Parsed<DetectionSet>, IngestError> {
    let mut seen: HashSet<String> = HashSet::new();
    let parsed = collect_lines(reader, opts, |line_no, line| {
        let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| malformed(line_no, e))?;
        if !(0.0..=1.0).contains(&rec.confidence) {
            return Err(IngestError::ConfidenceOutOfRange {
                line: line_no,
                value: rec.confidence,
            });
        }
        let bbox = convert_bbox(line_no, rec.bbox, opts)?;
        check_class(line_no, &rec.class, vocab)?;
        if rec.image_id.is_empty() {
            return Err(malformed(line_no, "empty image_id"));
        }
        let id = rec
            .id
            .unwrap_or_else(|| format!("{}#{}", rec.image_id, line_no));
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { line: line_no, id });
        }
        Ok(Detection {
            id,
            image_id: rec.image_id,
            class_label: rec.class,
            bbox,
            confidence: rec.confidence,
            person_id: rec.person_id,
        })
    })?;
    Ok(Parsed {
        value: DetectionSet::new(parsed.value)?,
        skipped: parsed.skipped,
    })
}

/// Writes detections back in the input format, ids always explicit.
pub fn write_detections<W: Write>(mut w: W, set: &DetectionSet) -> std::io::Result<()> {
    for d in set {
        let rec = DetectionRecordOut {
            id: &d.id,
            image_id: &d.image_id,
            class: &d.class_label,
            bbox: d.bbox.to_array(),
            confidence: d.confidence,
            person_id: d.person_id.as_deref(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_vocabulary<R: BufRead>(reader: R) -> Result<ClassVocabulary, IngestError> {
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(reader, |line_no, line| {
        if !seen.insert(line.to_string()) {
            return Err(IngestError::DuplicateLabel {
                line: line_no,
                label: line.to_string(),
            });
        }
        labels.push(line.to_string());
        Ok(())
    })?;
    ClassVocabulary::new(labels)
}

pub fn parse_captions<R: BufRead>(
    reader: R,
    opts: &IngestOptions,
) -> Result<Parsed<Vec<CaptionDoc>>, IngestError> {
    collect_lines(reader, opts, |line_no, line| {
        let rec: CaptionRecord = serde_json::from_str(line).map_err(|e| malformed(line_no, e))?;
        if rec.person_id.is_empty() {
            return Err(malformed(line_no, "empty person_id"));
        }
        Ok(CaptionDoc {
            person_id: rec.person_id,
            text: rec.text,
        })
    })
}

pub fn parse_ground_truth<R: BufRead>(
    reader: R,
    vocab: &ClassVocabulary,
    opts: &IngestOptions,
) -> Result<Parsed<Vec<GroundTruthAnnotation>>, IngestError> {
    collect_lines(reader, opts, |line_no, line| {
        let rec: GroundTruthRecord =
            serde_json::from_str(line).map_err(|e| malformed(line_no, e))?;
        let bbox = convert_bbox(line_no, rec.bbox, opts)?;
        check_class(line_no, &rec.class, vocab)?;
        if rec.image_id.is_empty() {
            return Err(malformed(line_no, "empty image_id"));
        }
        Ok(GroundTruthAnnotation {
            image_id: rec.image_id,
            class_label: rec.class,
            bbox,
            source: AnnotationSource::Provided,
        })
    })
}

pub fn write_ground_truth_line<W: Write>(
    mut w: W,
    image_id: &str,
    class: &str,
    bbox: &BBox,
) -> std::io::Result<()> {
    serde_json::to_writer(
        &mut w,
        &GroundTruthLine {
            image_id,
            class,
            bbox: bbox.to_array(),
        },
    )?;
    w.write_all(b"\n")
}
