//! The persistent transcript store.
//!
//! One store manages one append-only JSONL file holding every exchange of one
//! (run, backend) pair — the caller encodes that pair in the file path, e.g.
//! `<outdir>/<run_id>/transcripts/<backend_id>.jsonl`. Each line is one
//! [`TranscriptRecord`] serialized as a single JSON object, UTF-8, `\n`
//! terminated, with field names exactly as declared on the struct.
//!
//! The store is the source of resumability and re-scoring: records are keyed
//! by [`request_key`](crate::key::request_key), lookups return the *first*
//! record appended under a key (later duplicates never shadow earlier ones),
//! and nothing is ever rewritten — re-opening a store and appending more
//! records leaves every existing byte in place.
//!
//! All operations are safe for concurrent callers; appends are serialized
//! internally by a mutex so parallel workers cannot interleave partial lines.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use intersent_core::groups::AttributeKind;

use crate::backend::GatewayError;

/// One completed exchange: the prompt that was sent, where it sat in the
/// plan, and the verbatim (untrimmed) response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub run_id: String,
    pub backend_id: String,
    pub attribute: AttributeKind,
    pub from_code: String,
    pub to_code: String,
    pub template_id: String,
    /// 1-based repeat slot.
    pub repeat_index: u32,
    pub system_text: String,
    pub user_text: String,
    /// Assistant message exactly as returned — never trimmed or normalized.
    pub response_text: String,
    /// Content hash binding (backend_id, system_text, user_text, repeat_index).
    pub request_key: String,
    /// When the live exchange happened (UTC). Replay preserves the original.
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug)]
struct StoreInner {
    records: Vec<TranscriptRecord>,
    /// request_key → index of the *first* record appended under it.
    by_key: HashMap<String, usize>,
    /// Lazily opened append handle; `None` until the first append.
    file: Option<File>,
}

/// Append-only JSONL store for one (run, backend) transcript file.
#[derive(Debug)]
pub struct TranscriptStore {
    path: PathBuf,
    inner: Mutex<StoreInner>,
}

impl TranscriptStore {
    /// Open a store at `path`, loading any records already on disk. A missing
    /// file is an empty store; the file is created on the first append.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        let mut records = Vec::new();
        match File::open(&path) {
            Ok(file) => {
                let reader = BufReader::new(file);
                for (lineno, line) in reader.lines().enumerate() {
                    let line = line.map_err(|source| GatewayError::Store {
                        path: path.clone(),
                        source,
                    })?;
                    if line.is_empty() {
                        continue;
                    }
                    let record: TranscriptRecord =
                        serde_json::from_str(&line).map_err(|e| GatewayError::Store {
                            path: path.clone(),
                            source: io::Error::new(
                                io::ErrorKind::InvalidData,
                                format!("line {}: {e}", lineno + 1),
                            ),
                        })?;
                    records.push(record);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(source) => {
                return Err(GatewayError::Store {
                    path: path.clone(),
                    source,
                })
            }
        }
        let mut by_key = HashMap::with_capacity(records.len());
        for (index, record) in records.iter().enumerate() {
            by_key.entry(record.request_key.clone()).or_insert(index);
        }
        Ok(TranscriptStore {
            path,
            inner: Mutex::new(StoreInner {
                records,
                by_key,
                file: None,
            }),
        })
    }

    /// The JSONL file this store manages.
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one record (one JSON line, flushed before return) and index it.
    pub fn append(&self, record: &TranscriptRecord) -> Result<(), GatewayError> {
        let line = serde_json::to_string(record).map_err(|e| GatewayError::Store {
            path: self.path.clone(),
            source: io::Error::new(io::ErrorKind::InvalidData, e),
        })?;
        let mut inner = self.inner.lock().expect("transcript store poisoned");
        if inner.file.is_none() {
            if let Some(parent) = self.path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|source| GatewayError::Store {
                        path: self.path.clone(),
                        source,
                    })?;
                }
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|source| GatewayError::Store {
                    path: self.path.clone(),
                    source,
                })?;
            inner.file = Some(file);
        }
        let file = inner.file.as_mut().expect("append handle just opened");
        file.write_all(line.as_bytes())
            .and_then(|()| file.write_all(b"\n"))
            .and_then(|()| file.flush())
            .map_err(|source| GatewayError::Store {
                path: self.path.clone(),
                source,
            })?;
        let index = inner.records.len();
        inner.records.push(record.clone());
        inner
            .by_key
            .entry(record.request_key.clone())
            .or_insert(index);
        Ok(())
    }

    /// The first record appended under `request_key`, if any.
    pub fn lookup(&self, request_key: &str) -> Option<TranscriptRecord> {
        let inner = self.inner.lock().expect("transcript store poisoned");
        inner
            .by_key
            .get(request_key)
            .map(|&index| inner.records[index].clone())
    }

    /// Snapshot of every record in append order.
    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.inner
            .lock()
            .expect("transcript store poisoned")
            .records
            .clone()
    }

    pub fn len(&self) -> usize {
        self.inner
            .lock()
            .expect("transcript store poisoned")
            .records
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
