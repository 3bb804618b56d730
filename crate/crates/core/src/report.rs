//! The metrics report: class statistics, clutter scores and both
//! correlation series, as sectioned CSV or as JSON lines.
//!
//! CSV layout (sections in this order, each introduced by a `[name]` line):
//!
//! ```text
//! [meta]
//! key,value
//! [class_stats]
//! class,n,mean_conf,var_conf,mean_area
//! [clutter]
//! image_id,rho,n_objects,avg_conf
//! [correlations]
//! series,n_points,pearson_r,undefined_reason,outliers
//! ```
//!
//! Numbers use the shortest representation that round-trips. Outlier ids
//! are `;`-separated.

use std::io::Write;

use serde::Serialize;

use crate::ingest::DetectionSet;
use crate::metrics::{
    all_class_stats, all_clutter_scores, clutter_confidence_series, confidence_size_correlation,
    ClassStats, ClutterScore, Correlation, CorrelationReport, MetricsError, OUTLIER_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOutcome {
    pub name: &'static str,
    /// `Err` carries a reason code when the series could not be built.
    pub report: Result<CorrelationReport, &'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub class_stats: Vec<ClassStats>,
    pub clutter: Vec<ClutterScore>,
    pub correlations: Vec<SeriesOutcome>,
}

fn outcome(name: &'static str, r: Result<CorrelationReport, MetricsError>) -> Result<SeriesOutcome, MetricsError> {
    let report = match r {
        Ok(rep) => Ok(rep),
        Err(MetricsError::InsufficientClasses(_)) => Err("insufficient_classes"),
        Err(MetricsError::InsufficientImages(_)) => Err("insufficient_images"),
        Err(e) => return Err(e),
    };
    Ok(SeriesOutcome { name, report })
}

pub fn metrics_report(detections: &DetectionSet) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport {
        class_stats: all_class_stats(detections),
        clutter: all_clutter_scores(detections)?,
        correlations: vec![
            outcome("confidence_size", confidence_size_correlation(detections))?,
            outcome("clutter_confidence", clutter_confidence_series(detections))?,
        ],
    })
}

fn meta() -> [(&'static str, String); 3] {
    [
        ("variance", "sample".to_string()),
        ("outlier_rule", "externally_studentized_residual".to_string()),
        ("outlier_threshold", OUTLIER_THRESHOLD.to_string()),
    ]
}

#[derive(Serialize)]
#[serde(tag = "section", rename_all = "snake_case")]
enum JsonLine<'a> {
    Meta { key: &'a str, value: &'a str },
    ClassStats(&'a ClassStats),
    Clutter(&'a ClutterScore),
    Correlation {
        series: &'a str,
        #[serde(flatten)]
        report: Option<&'a CorrelationReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        unavailable: Option<&'a str>,
    },
}

impl MetricsReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        wtr.write_record(["[meta]"])?;
        wtr.write_record(["key", "value"])?;
        for (k, v) in meta() {
            wtr.write_record([k, v.as_str()])?;
        }

        wtr.write_record(["[class_stats]"])?;
        wtr.write_record(["class", "n", "mean_conf", "var_conf", "mean_area"])?;
        for s in &self.class_stats {
            wtr.write_record([
                s.class_label.clone(),
                s.n.to_string(),
                s.mean_confidence.to_string(),
                s.variance_confidence.to_string(),
                s.mean_bbox_area.to_string(),
            ])?;
        }

        wtr.write_record(["[clutter]"])?;
        wtr.write_record(["image_id", "rho", "n_objects", "avg_conf"])?;
        for c in &self.clutter {
            wtr.write_record([
                c.image_id.clone(),
                c.rho.to_string(),
                c.n_objects.to_string(),
                c.avg_confidence.to_string(),
            ])?;
        }

        wtr.write_record(["[correlations]"])?;
        wtr.write_record(["series", "n_points", "pearson_r", "undefined_reason", "outliers"])?;
        for s in &self.correlations {
            let row = match &s.report {
                Ok(rep) => {
                    let (r, reason) = match rep.correlation {
                        Correlation::Defined(r) => (r.to_string(), String::new()),
                        Correlation::Undefined(why) => (String::new(), why.as_str().to_string()),
                    };
                    [
                        s.name.to_string(),
                        rep.points.len().to_string(),
                        r,
                        reason,
                        rep.outlier_ids.join(";"),
                    ]
                }
                Err(reason) => [
                    s.name.to_string(),
                    "0".to_string(),
                    String::new(),
                    reason.to_string(),
                    String::new(),
                ],
            };
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut emit = |line: JsonLine| -> std::io::Result<()> {
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")
        };
        for (key, value) in meta() {
            emit(JsonLine::Meta { key, value: &value })?;
        }
        for s in &self.class_stats {
            emit(JsonLine::ClassStats(s))?;
        }
        for c in &self.clutter {
            emit(JsonLine::Clutter(c))?;
        }
        for s in &self.correlations {
            emit(JsonLine::Correlation {
                series: s.name,
                report: s.report.as_ref().ok(),
                unavailable: s.report.as_ref().err().copied(),
            })?;
        }
        Ok(())
    }
}
