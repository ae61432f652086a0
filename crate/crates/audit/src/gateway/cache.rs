//! Append-only transcript log with an in-memory index.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::BackendKind;
use crate::ingest::sha256_hex;

/// Digest addressing one (model, template version, prompt text) triple.
pub fn transcript_key(model_name: &str, template_version: &str, prompt: &str) -> String {
    sha256_hex(format!("{model_name}\n{template_version}\n{prompt}").as_bytes())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub key: String,
    pub model_name: String,
    pub template_version: String,
    pub prompt: String,
    pub response: String,
    /// UTC seconds.
    pub timestamp: u64,
    pub backend: BackendKind,
}

impl TranscriptRecord {
    pub fn new(
        model_name: &str,
        template_version: &str,
        prompt: &str,
        response: &str,
        timestamp: u64,
        backend: BackendKind,
    ) -> Self {
        TranscriptRecord {
            key: transcript_key(model_name, template_version, prompt),
            model_name: model_name.to_string(),
            template_version: template_version.to_string(),
            prompt: prompt.to_string(),
            response: response.to_string(),
            timestamp,
            backend,
        }
    }

    /// Key matches the stored fields and the response is nonempty.
    pub fn is_valid(&self) -> bool {
        !self.response.is_empty() && self.key == transcript_key(&self.model_name, &self.template_version, &self.prompt)
    }
}

/// Line-delimited JSON transcript store. Reads go to the index loaded at
/// open time; appends are serialized and flushed per record. The first
/// record for a key wins.
#[derive(Debug)]
pub struct TranscriptStore {
    path: Option<PathBuf>,
    index: RwLock<HashMap<String, TranscriptRecord>>,
    writer: Mutex<Option<File>>,
    skipped: usize,
}

impl TranscriptStore {
    pub fn in_memory() -> Self {
        TranscriptStore { path: None, index: RwLock::default(), writer: Mutex::new(None), skipped: 0 }
    }

    /// Loads `path` if it exists. The file is created on first append.
    /// Unparseable or inconsistent lines (e.g. a torn final write) are
    /// skipped and counted.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut index = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<TranscriptRecord>(&line) {
                    Ok(r) if r.is_valid() => {
                        index.entry(r.key.clone()).or_insert(r);
                    }
                    _ => {
                        log::warn!("{}:{}: skipping unreadable transcript record", path.display(), i + 1);
                        skipped += 1;
                    }
                }
            }
        }
        Ok(TranscriptStore {
            path: Some(path.to_path_buf()),
            index: RwLock::new(index),
            writer: Mutex::new(None),
            skipped,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<TranscriptRecord> {
        self.index.read().expect("index lock").get(key).cloned()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.read().expect("index lock").contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lines ignored while loading.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn models(&self) -> BTreeSet<String> {
        self.index.read().expect("index lock").values().map(|r| r.model_name.clone()).collect()
    }

    /// Appends `record` unless its key is already stored. Returns whether a
    /// line was written.
    pub fn append(&self, record: TranscriptRecord) -> io::Result<bool> {
        if !record.is_valid() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "transcript record key or response invalid"));
        }
        let mut writer = self.writer.lock().expect("writer lock");
        if self.contains(&record.key) {
            return Ok(false);
        }
        if let Some(path) = &self.path {
            if writer.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                *writer = Some(OpenOptions::new().create(true).append(true).open(path)?);
            }
            let file = writer.as_mut().expect("opened above");
            let mut line = serde_json::to_string(&record).map_err(io::Error::other)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.index.write().expect("index lock").insert(record.key.clone(), record);
        Ok(true)
    }
}
