//! Classifier analysis: per-class confidence statistics against box size,
//! per-image clutter density, their correlations and outlier flagging.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{Detection, DetectionSet};

/// Absolute standardized (deleted) residual above which a point is flagged.
pub const OUTLIER_THRESHOLD: f64 = 2.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no detections carry class `{0}`")]
    NoSuchClass(String),
    #[error("image detection list is empty")]
    EmptyImage,
    #[error("detections span several images (`{0}` and `{1}`)")]
    MixedImages(String, String),
    #[error("image `{0}` has a degenerate coordinate extent")]
    DegenerateExtent(String),
    #[error("at least two classes are required, found {0}")]
    InsufficientClasses(usize),
    #[error("at least two images are required, found {0}")]
    InsufficientImages(usize),
    #[error("at least three points are required, found {0}")]
    TooFewPoints(usize),
}

/// Mean and sample variance (n - 1 denominator, 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Summary {
    /// `None` for an empty input.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n == 1 {
            0.0
        } else {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        };
        Some(Summary { n, mean, variance })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub class_label: String,
    pub n: usize,
    pub mean_confidence: f64,
    pub variance_confidence: f64,
    pub mean_bbox_area: f64,
}

impl ClassStats {
    fn from_members<'a>(label: &str, members: impl IntoIterator<Item = &'a Detection>) -> Option<Self> {
        let (confs, areas): (Vec<f64>, Vec<f64>) = members
            .into_iter()
            .map(|d| (d.confidence, d.bbox.area()))
            .unzip();
        let conf = Summary::of(&confs)?;
        let mean_bbox_area = areas.iter().sum::<f64>() / areas.len() as f64;
        Some(ClassStats {
            class_label: label.to_string(),
            n: conf.n,
            mean_confidence: conf.mean,
            variance_confidence: conf.variance,
            mean_bbox_area,
        })
    }
}

pub fn class_stats(detections: &DetectionSet, class_label: &str) -> Result<ClassStats, MetricsError> {
    ClassStats::from_members(class_label, detections.of_class(class_label))
        .ok_or_else(|| MetricsError::NoSuchClass(class_label.to_string()))
}

/// Stats for every class present, ordered by label.
pub fn all_class_stats(detections: &DetectionSet) -> Vec<ClassStats> {
    group_by(detections, |d| &d.class_label)
        .into_iter()
        .filter_map(|(label, members)| ClassStats::from_members(label, members))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClutterScore {
    pub image_id: String,
    pub rho: f64,
    pub n_objects: usize,
    pub avg_confidence: f64,
}

/// Object density of one image: detection count over the area spanned by
/// every box corner (both x1 and x2 enter the x extent, likewise for y).
pub fn clutter_density<'a, I>(image_detections: I) -> Result<ClutterScore, MetricsError>
where
    I: IntoIterator<Item = &'a Detection>,
{
    let mut iter = image_detections.into_iter();
    let first = iter.next().ok_or(MetricsError::EmptyImage)?;
    let (mut min_x, mut max_x) = (first.bbox.x1(), first.bbox.x2());
    let (mut min_y, mut max_y) = (first.bbox.y1(), first.bbox.y2());
    let mut n = 1usize;
    let mut conf_sum = first.confidence;
    for d in iter {
        if d.image_id != first.image_id {
            return Err(MetricsError::MixedImages(
                first.image_id.clone(),
                d.image_id.clone(),
            ));
        }
        for x in [d.bbox.x1(), d.bbox.x2()] {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
        }
        for y in [d.bbox.y1(), d.bbox.y2()] {
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        n += 1;
        conf_sum += d.confidence;
    }
    // min_x < max_x always holds for valid boxes; this guards converted data.
    if max_x <= min_x || max_y <= min_y {
        return Err(MetricsError::DegenerateExtent(first.image_id.clone()));
    }
    Ok(ClutterScore {
        image_id: first.image_id.clone(),
        rho: n as f64 / ((max_x - min_x) * (max_y - min_y)),
        n_objects: n,
        avg_confidence: conf_sum / n as f64,
    })
}

/// Clutter scores for every image, ordered by image id.
pub fn all_clutter_scores(detections: &DetectionSet) -> Result<Vec<ClutterScore>, MetricsError> {
    group_by(detections, |d| &d.image_id)
        .into_values()
        .map(clutter_density)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    TooFewPoints,
    ConstantX,
    ConstantY,
}

impl UndefinedReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            UndefinedReason::TooFewPoints => "too_few_points",
            UndefinedReason::ConstantX => "constant_x",
            UndefinedReason::ConstantY => "constant_y",
        }
    }
}

/// Pearson correlation, or the reason it does not exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined(UndefinedReason),
}

impl Correlation {
    pub fn value(&self) -> Option<f64> {
        match self {
            Correlation::Defined(r) => Some(*r),
            Correlation::Undefined(_) => None,
        }
    }
}

fn is_constant(values: impl IntoIterator<Item = f64>) -> bool {
    let mut it = values.into_iter();
    match it.next() {
        Some(first) => it.all(|v| v == first),
        None => true,
    }
}

/// Two-pass (centered) Pearson coefficient, clamped into [-1, 1].
pub fn pearson(points: &[(f64, f64)]) -> Correlation {
    if points.len() < 2 {
        return Correlation::Undefined(UndefinedReason::TooFewPoints);
    }
    if is_constant(points.iter().map(|p| p.0)) {
        return Correlation::Undefined(UndefinedReason::ConstantX);
    }
    if is_constant(points.iter().map(|p| p.1)) {
        return Correlation::Undefined(UndefinedReason::ConstantY);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Correlation::Defined((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Flags points whose externally studentized residual against the
/// least-squares line `y = a + bx` exceeds [`OUTLIER_THRESHOLD`] in absolute
/// value. Each point is judged against the residual scale of the other
/// points, so a single gross outlier cannot mask itself.
///
/// Three points leave no residual degrees of freedom once one is held out,
/// so nothing is flagged for them.
pub fn flag_outliers(points: &[(f64, f64)]) -> Result<Vec<usize>, MetricsError> {
    let n = points.len();
    if n < 3 {
        return Err(MetricsError::TooFewPoints(n));
    }
    if n == 3 {
        return Ok(Vec::new());
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;

    let residuals: Vec<f64> = points
        .iter()
        .map(|&(x, y)| y - (intercept + slope * x))
        .collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let y_scale = points.iter().fold(1.0f64, |m, p| m.max(p.1.abs()));
    let tol = 1e-10 * y_scale;

    let mut flagged = Vec::new();
    for (i, (&(x, _), &e)) in points.iter().zip(&residuals).enumerate() {
        if e.abs() <= tol {
            continue;
        }
        let leverage = 1.0 / nf + if sxx > 0.0 { (x - mx).powi(2) / sxx } else { 0.0 };
        let free = 1.0 - leverage;
        if free <= 1e-12 {
            // The remaining points cannot predict this x.
            continue;
        }
        let sse_without = (sse - e * e / free).max(0.0);
        let s_without = (sse_without / (nf - 3.0)).sqrt();
        if s_without <= tol {
            flagged.push(i);
            continue;
        }
        if (e / (s_without * free.sqrt())).abs() > OUTLIER_THRESHOLD {
            flagged.push(i);
        }
    }
    Ok(flagged)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub points: Vec<CorrelationPoint>,
    pub correlation: Correlation,
    pub outlier_ids: Vec<String>,
}

impl CorrelationReport {
    fn from_points(points: Vec<CorrelationPoint>) -> Self {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
        let correlation = pearson(&xy);
        let outlier_ids = flag_outliers(&xy)
            .unwrap_or_default()
            .into_iter()
            .map(|i| points[i].id.clone())
            .collect();
        CorrelationReport {
            points,
            correlation,
            outlier_ids,
        }
    }

    pub fn pearson_r(&self) -> Option<f64> {
        self.correlation.value()
    }
}

impl Serialize for CorrelationReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CorrelationReport", 4)?;
        st.serialize_field("points", &self.points)?;
        st.serialize_field("pearson_r", &self.correlation.value())?;
        let reason = match self.correlation {
            Correlation::Undefined(r) => Some(r),
            Correlation::Defined(_) => None,
        };
        st.serialize_field("undefined_reason", &reason)?;
        st.serialize_field("outlier_ids", &self.outlier_ids)?;
        st.end()
    }
}

/// One point per class: mean box area against mean confidence.
pub fn confidence_size_correlation(detections: &DetectionSet) -> Result<CorrelationReport, MetricsError> {
    let stats = all_class_stats(detections);
    if stats.len() < 2 {
        return Err(MetricsError::InsufficientClasses(stats.len()));
    }
    Ok(CorrelationReport::from_points(
        stats
            .into_iter()
            .map(|s| CorrelationPoint {
                id: s.class_label,
                x: s.mean_bbox_area,
                y: s.mean_confidence,
            })
            .collect(),
    ))
}

/// One point per image: clutter density against average confidence.
pub fn clutter_confidence_series(detections: &DetectionSet) -> Result<CorrelationReport, MetricsError> {
    let scores = all_clutter_scores(detections)?;
    if scores.len() < 2 {
        return Err(MetricsError::InsufficientImages(scores.len()));
    }
    Ok(CorrelationReport::from_points(
        scores
            .into_iter()
            .map(|s| CorrelationPoint {
                id: s.image_id,
                x: s.rho,
                y: s.avg_confidence,
            })
            .collect(),
    ))
}

fn group_by<'a>(
    detections: &'a DetectionSet,
    key: impl Fn(&'a Detection) -> &'a String,
) -> BTreeMap<&'a str, Vec<&'a Detection>> {
    let mut groups: BTreeMap<&str, Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        groups.entry(key(d).as_str()).or_default().push(d);
    }
    groups
}
