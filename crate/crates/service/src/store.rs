//! File-backed state: dataset records and per-session event logs under
//! the data directory, replayed on startup.
//!
//! ```text
//! <data_dir>/datasets/<dataset_id>.json
//! <data_dir>/sessions/<session_id>/session.json
//! <data_dir>/sessions/<session_id>/events.jsonl
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use detscope_core::correction::{read_event_log, write_event, CorrectionError, CorrectionEvent, EventPayload, Session};
use detscope_core::dataset::{content_digest, load_dataset, Dataset, DatasetPaths, LoadError};
use detscope_core::ingest::IngestOptions;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{Mutex, RwLock};

use crate::error::ApiError;

const DATASETS_DIR: &str = "datasets";
const SESSIONS_DIR: &str = "sessions";
const SESSION_FILE: &str = "session.json";
const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("data directory {path}: {message}")]
    DataDir { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Record { path: PathBuf, message: String },
    #[error("dataset {dataset_id}: {source}")]
    Dataset { dataset_id: String, source: LoadError },
    #[error("dataset {dataset_id}: source files changed since load (digest {expected}, now {actual})")]
    DigestMismatch {
        dataset_id: String,
        expected: String,
        actual: String,
    },
    #[error("{path}: {source}")]
    CorruptLog { path: PathBuf, source: CorrectionError },
}

/// Persisted description of a loaded dataset. The source files are
/// referenced in place, never copied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: String,
    pub paths: DatasetPaths,
    #[serde(default)]
    pub lenient: bool,
    pub loaded_at: DateTime<Utc>,
    pub digest: String,
}

#[derive(Debug)]
pub struct DatasetEntry {
    pub record: DatasetRecord,
    pub dataset: Dataset,
    /// Lenient-mode diagnostics, rendered as `path:line: message`.
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionRecord {
    session_id: String,
    dataset_id: String,
    created_at: DateTime<Utc>,
}

pub struct SessionEntry {
    pub dataset: Arc<DatasetEntry>,
    session: Mutex<Session>,
    log_path: PathBuf,
}

impl SessionEntry {
    pub async fn lock(&self) -> tokio::sync::MutexGuard<'_, Session> {
        self.session.lock().await
    }

    /// Appends one event: validated against the folded state, written to
    /// the log, then applied. Appends to one session are serialized by the
    /// session lock.
    pub async fn append(
        &self,
        payload: EventPayload,
        actor: String,
        at: DateTime<Utc>,
    ) -> Result<CorrectionEvent, ApiError> {
        let mut session = self.session.lock().await;
        let dataset = &self.dataset.dataset;
        session.state().validate(dataset, &payload)?;
        let event = CorrectionEvent {
            index: session.events().len() as u64,
            payload: payload.clone(),
            actor: actor.clone(),
            at,
        };
        append_line(&self.log_path, &event).map_err(|e| ApiError::internal(format!("writing event log: {e}")))?;
        Ok(session.append(dataset, payload, actor, at)?.clone())
    }
}

fn append_line(path: &Path, event: &CorrectionEvent) -> std::io::Result<()> {
    let mut line = Vec::new();
    write_event(&mut line, event)?;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()
}

pub struct Store {
    data_dir: PathBuf,
    pub image_dir: PathBuf,
    datasets: RwLock<BTreeMap<String, Arc<DatasetEntry>>>,
    sessions: RwLock<BTreeMap<String, Arc<SessionEntry>>>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(tmp, path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StartupError> {
    let record = |message: String| StartupError::Record {
        path: path.to_path_buf(),
        message,
    };
    let bytes = fs::read(path).map_err(|e| record(e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| record(e.to_string()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, StartupError> {
    let mut out = Vec::new();
    let rd = fs::read_dir(dir).map_err(|e| StartupError::DataDir {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    for entry in rd {
        let entry = entry.map_err(|e| StartupError::DataDir {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

fn opts(lenient: bool) -> IngestOptions {
    IngestOptions {
        lenient,
        ..Default::default()
    }
}

fn load_entry(record: DatasetRecord) -> Result<DatasetEntry, LoadError> {
    let loaded = load_dataset(&record.paths, &opts(record.lenient))?;
    Ok(DatasetEntry {
        diagnostics: loaded.diagnostics.iter().map(|d| d.to_string()).collect(),
        dataset: loaded.dataset,
        record,
    })
}

impl Store {
    /// Opens the data directory, reloading every dataset and replaying every
    /// session log. Any corrupt record or log aborts startup.
    pub fn open(data_dir: &Path, image_dir: &Path) -> Result<Store, StartupError> {
        let mk = |p: PathBuf| {
            fs::create_dir_all(&p).map_err(|e| StartupError::DataDir {
                path: p.clone(),
                message: e.to_string(),
            })
        };
        mk(data_dir.join(DATASETS_DIR))?;
        mk(data_dir.join(SESSIONS_DIR))?;

        let mut datasets = BTreeMap::new();
        for path in sorted_entries(&data_dir.join(DATASETS_DIR))? {
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let record: DatasetRecord = read_json(&path)?;
            let id = record.dataset_id.clone();
            let actual = content_digest(&record.paths).map_err(|source| StartupError::Dataset {
                dataset_id: id.clone(),
                source,
            })?;
            if actual != record.digest {
                return Err(StartupError::DigestMismatch {
                    dataset_id: id,
                    expected: record.digest,
                    actual,
                });
            }
            let entry = load_entry(record).map_err(|source| StartupError::Dataset {
                dataset_id: id.clone(),
                source,
            })?;
            datasets.insert(id, Arc::new(entry));
        }

        let mut sessions = BTreeMap::new();
        for dir in sorted_entries(&data_dir.join(SESSIONS_DIR))? {
            if !dir.is_dir() {
                continue;
            }
            let record: SessionRecord = read_json(&dir.join(SESSION_FILE))?;
            let dataset = datasets.get(&record.dataset_id).cloned().ok_or_else(|| StartupError::Record {
                path: dir.join(SESSION_FILE),
                message: format!("unknown dataset `{}`", record.dataset_id),
            })?;
            let log_path = dir.join(EVENTS_FILE);
            let corrupt = |source| StartupError::CorruptLog {
                path: log_path.clone(),
                source,
            };
            let events = match File::open(&log_path) {
                Ok(f) => read_event_log(BufReader::new(f)).map_err(corrupt)?,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
                Err(e) => {
                    return Err(StartupError::Record {
                        path: log_path,
                        message: e.to_string(),
                    })
                }
            };
            let session = Session::from_log(
                record.session_id.clone(),
                record.dataset_id,
                record.created_at,
                events,
                &dataset.dataset,
            )
            .map_err(corrupt)?;
            sessions.insert(
                record.session_id,
                Arc::new(SessionEntry {
                    dataset,
                    session: Mutex::new(session),
                    log_path,
                }),
            );
        }

        Ok(Store {
            data_dir: data_dir.to_path_buf(),
            image_dir: image_dir.to_path_buf(),
            datasets: RwLock::new(datasets),
            sessions: RwLock::new(sessions),
        })
    }

    /// Loads a dataset. The id is derived from the content digest, so
    /// loading identical files again returns the existing record.
    pub async fn add_dataset(&self, paths: DatasetPaths, lenient: bool) -> Result<(Arc<DatasetEntry>, bool), ApiError> {
        // Holding the write lock keeps loads exclusive with lookups.
        let mut datasets = self.datasets.write().await;
        let digest = content_digest(&paths)?;
        let dataset_id = format!("ds-{}", &digest[..16]);
        if let Some(existing) = datasets.get(&dataset_id) {
            return Ok((existing.clone(), false));
        }
        let record = DatasetRecord {
            dataset_id: dataset_id.clone(),
            paths,
            lenient,
            loaded_at: Utc::now(),
            digest,
        };
        let entry = Arc::new(load_entry(record)?);
        let path = self.data_dir.join(DATASETS_DIR).join(format!("{dataset_id}.json"));
        write_json(&path, &entry.record).map_err(|e| ApiError::internal(format!("writing dataset record: {e}")))?;
        datasets.insert(dataset_id, entry.clone());
        Ok((entry, true))
    }

    pub async fn dataset(&self, id: &str) -> Result<Arc<DatasetEntry>, ApiError> {
        self.datasets
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| CorrectionError::UnknownDataset(id.to_string()).into())
    }

    pub async fn datasets(&self) -> Vec<Arc<DatasetEntry>> {
        self.datasets.read().await.values().cloned().collect()
    }

    pub async fn create_session(&self, dataset_id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        let dataset = self.dataset(dataset_id).await?;
        if dataset.dataset.detections.is_empty() {
            return Err(CorrectionError::EmptyDataset.into());
        }
        let record = SessionRecord {
            session_id: uuid::Uuid::new_v4().to_string(),
            dataset_id: dataset_id.to_string(),
            created_at: Utc::now(),
        };
        let dir = self.data_dir.join(SESSIONS_DIR).join(&record.session_id);
        let io = |e: std::io::Error| ApiError::internal(format!("creating session: {e}"));
        fs::create_dir_all(&dir).map_err(io)?;
        // The log file is created by the first append; a missing log
        // replays as empty.
        write_json(&dir.join(SESSION_FILE), &record).map_err(io)?;
        let entry = Arc::new(SessionEntry {
            dataset,
            session: Mutex::new(Session::new(
                record.session_id.clone(),
                record.dataset_id,
                record.created_at,
            )),
            log_path: dir.join(EVENTS_FILE),
        });
        self.sessions.write().await.insert(record.session_id, entry.clone());
        Ok(entry)
    }

    pub async fn session(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new("unknown_session", format!("unknown session `{id}`")))
    }

    pub async fn session_ids(&self) -> Vec<String> {
        self.sessions.read().await.keys().cloned().collect()
    }
}
