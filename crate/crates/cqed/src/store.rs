//! Append-only JSON-lines record store for landscape runs.
//!
//! One [`LandscapeRecord`] per line. On load, later lines win for a
//! repeated key and a torn final line (no trailing newline, not parseable)
//! is cut off, so a killed writer leaves a store that resumes cleanly.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use cqed_core::gates::WeylCoords;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Done,
    Skipped,
    Failed,
}

/// Outcome of one (point, duration, goal) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeRecord {
    pub key: String,
    pub delta2_over_alpha: f64,
    pub deltac_over_g: f64,
    pub t_ns: f64,
    pub goal: String,
    pub status: Status,
    pub seed: u64,
    /// Final value of the stage-3 functional.
    pub value: Option<f64>,
    pub concurrence: Option<f64>,
    pub pop_loss: Option<f64>,
    pub eps_avg: Option<f64>,
    pub eps_avg_no_dissipation: Option<f64>,
    pub weyl: Option<WeylCoords>,
    /// Relative to the run directory.
    pub pulse_file: Option<String>,
    pub message: Option<String>,
}

/// Canonical job key. Floats use the shortest round-trip form.
pub fn job_key(delta2_over_alpha: f64, deltac_over_g: f64, t_ns: f64, goal: &str) -> String {
    format!("d2a={delta2_over_alpha};dcg={deltac_over_g};T={t_ns}ns;goal={goal}")
}

/// First 16 hex digits of the SHA-256 of the key; names the pulse file.
pub fn key_hash(key: &str) -> String {
    hex::encode(&Sha256::digest(key.as_bytes())[..8])
}

/// Per-job seed derived from the run seed and the key, independent of
/// scheduling.
pub fn job_seed(run_seed: u64, key: &str) -> u64 {
    let digest = Sha256::digest(format!("{run_seed}:{key}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    records: Vec<LandscapeRecord>,
    index: HashMap<String, usize>,
}

impl RecordStore {
    /// Open (creating if needed) the store at `path`.
    pub fn open(path: &Path) -> Result<Self, FormatError> {
        let mut store = RecordStore { path: path.to_path_buf(), records: Vec::new(), index: HashMap::new() };
        if !path.exists() {
            File::create(path).map_err(|e| FormatError::io(path, e))?;
            return Ok(store);
        }
        let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
        let mut valid_len = 0usize;
        let mut offset = 0usize;
        for (idx, chunk) in text.split_inclusive('\n').enumerate() {
            let line_no = idx as u64 + 1;
            let complete = chunk.ends_with('\n');
            let line = chunk.trim();
            offset += chunk.len();
            if line.is_empty() {
                if complete {
                    valid_len = offset;
                }
                continue;
            }
            if !complete {
                log::warn!("{}:{line_no}: discarding incomplete final record", path.display());
                break;
            }
            let r = serde_json::from_str::<LandscapeRecord>(line).map_err(|e| FormatError::parse(path, line_no, e.to_string()))?;
            store.insert(r);
            valid_len = offset;
        }
        if valid_len < text.len() {
            let f = OpenOptions::new().write(true).open(path).map_err(|e| FormatError::io(path, e))?;
            f.set_len(valid_len as u64).map_err(|e| FormatError::io(path, e))?;
        }
        Ok(store)
    }

    fn insert(&mut self, r: LandscapeRecord) {
        match self.index.get(&r.key) {
            Some(&i) => self.records[i] = r,
            None => {
                self.index.insert(r.key.clone(), self.records.len());
                self.records.push(r);
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<&LandscapeRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Records in first-seen key order.
    pub fn records(&self) -> &[LandscapeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append records in the given order and flush them to disk.
    pub fn append(&mut self, batch: Vec<LandscapeRecord>) -> Result<(), FormatError> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for r in &batch {
            buf.push_str(&serde_json::to_string(r).map_err(|e| FormatError::invalid(&self.path, e.to_string()))?);
            buf.push('\n');
        }
        let mut f = OpenOptions::new().append(true).open(&self.path).map_err(|e| FormatError::io(&self.path, e))?;
        f.write_all(buf.as_bytes()).map_err(|e| FormatError::io(&self.path, e))?;
        f.sync_data().map_err(|e| FormatError::io(&self.path, e))?;
        for r in batch {
            self.insert(r);
        }
        Ok(())
    }
}
