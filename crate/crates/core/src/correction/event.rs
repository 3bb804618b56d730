use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::CorrectionError;
use crate::ingest::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    EliminateFp,
    ReannotateBbox,
    AddFalseNegative,
    Revert,
}

/// Kind-specific content of an event; serialized as the `kind` and
/// `payload` fields of a log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    EliminateFp { detection_ids: Vec<String> },
    ReannotateBbox { detection_id: String, bbox: BBox },
    AddFalseNegative { image_id: String, class: String, bbox: BBox },
    Revert { target: u64 },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::EliminateFp { .. } => EventKind::EliminateFp,
            EventPayload::ReannotateBbox { .. } => EventKind::ReannotateBbox,
            EventPayload::AddFalseNegative { .. } => EventKind::AddFalseNegative,
            EventPayload::Revert { .. } => EventKind::Revert,
        }
    }
}

/// One immutable user action. Log lines carry exactly `index`, `kind`,
/// `payload`, `actor` and `at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    pub index: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
    pub actor: String,
    pub at: DateTime<Utc>,
}

pub fn write_event<W: Write>(mut w: W, event: &CorrectionEvent) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, event)?;
    w.write_all(b"\n")
}

pub fn write_event_log<W: Write>(mut w: W, events: &[CorrectionEvent]) -> std::io::Result<()> {
    for e in events {
        write_event(&mut w, e)?;
    }
    Ok(())
}

/// Parses a log file. Structural checks only; semantic validation happens
/// on replay.
pub fn read_event_log<R: BufRead>(reader: R) -> Result<Vec<CorrectionEvent>, CorrectionError> {
    let mut events = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let corrupt = |reason: String| CorrectionError::CorruptLog { index, reason };
        let line = line.map_err(|e| corrupt(e.to_string()))?;
        let event: CorrectionEvent = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn log_line_shape() {
        let e = CorrectionEvent {
            index: 0,
            payload: EventPayload::EliminateFp {
                detection_ids: vec!["d1".into()],
            },
            actor: "ana".into(),
            at: Utc.with_ymd_and_hms(2026, 1, 2, 3, 4, 5).unwrap(),
        };
        let mut out = Vec::new();
        write_event(&mut out, &e).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "{\"index\":0,\"kind\":\"eliminate_fp\",\"payload\":{\"detection_ids\":[\"d1\"]},\"actor\":\"ana\",\"at\":\"2026-01-02T03:04:05Z\"}\n"
        );
        assert_eq!(read_event_log(out.as_slice()).unwrap(), vec![e]);
    }

    #[test]
    fn bad_line_is_reported() {
        let src = "{\"index\":0,\"kind\":\"revert\",\"payload\":{\"target\":0},\"actor\":\"a\",\"at\":\"2026-01-01T00:00:00Z\"}\nnope\n";
        let err = read_event_log(src.as_bytes()).unwrap_err();
        assert!(matches!(err, CorrectionError::CorruptLog { index: 1, .. }));
        let bad_box = "{\"index\":0,\"kind\":\"reannotate_bbox\",\"payload\":{\"detection_id\":\"d\",\"bbox\":[5,5,1,1]},\"actor\":\"a\",\"at\":\"2026-01-01T00:00:00Z\"}";
        assert!(read_event_log(bad_box.as_bytes()).is_err());
    }
}
