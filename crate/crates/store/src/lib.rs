//! File-backed performance store.
//!
//! Layout under the store root:
//!
//! ```text
//! index.log              append-only, one JSON entry per acknowledged put
//! records/<id>/          metadata.json, events.csv, cached artifacts
//! records/.tmp-<id>/     a put in progress
//! ```
//!
//! A record directory is written under a temporary name, synced and
//! renamed into place before its index line is appended. On open the index
//! is replayed; a torn final line is cut off and record directories with no
//! index entry are removed, so an interrupted put is either fully present or
//! fully absent. The `records` directory doubles as a corpus readable by
//! [`tinyjam_core::corpus::load_corpus`].

use std::collections::{BTreeSet, HashMap};
use std::cmp::Reverse;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tinyjam_core::corpus::{read_performance, CorpusError, EVENTS_FILE, METADATA_FILE};
use tinyjam_core::perf::{LayeredPerformance, Metadata, TinyPerformance, Violation};
use tinyjam_core::synth::ENGINE_VERSION;

pub const INDEX_FILE: &str = "index.log";
pub const RECORDS_DIR: &str = "records";
pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 100;

const TMP_PREFIX: &str = ".tmp-";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("performance failed validation ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("no performance with id {0}")]
    NotFound(String),
    #[error("parent performance {0} does not exist")]
    UnknownParent(String),
    #[error("a performance with id {0} already exists")]
    Conflict(String),
    #[error("invalid id {0:?}")]
    BadId(String),
    #[error("store is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line of the index log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub parent_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Audio,
    Trace,
}

impl ArtifactKind {
    fn stem(self) -> &'static str {
        match self {
            Self::Audio => "audio",
            Self::Trace => "trace",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Self::Audio => "wav",
            Self::Trace => "png",
        }
    }

    /// Cache file name, stamped with the engine version that produced it.
    pub fn file_name(self, version: &str) -> String {
        let version: String = version
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect();
        format!("{}-{version}.{}", self.stem(), self.extension())
    }
}

/// Where a stored performance lives on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreRecord {
    pub metadata: Metadata,
    pub created_at: DateTime<Utc>,
    pub events_path: PathBuf,
    pub trace_path: Option<PathBuf>,
    pub audio_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listed {
    pub metadata: Metadata,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub items: Vec<Listed>,
}

struct Entry {
    meta: Metadata,
    created_at: DateTime<Utc>,
    children: Vec<String>,
}

#[derive(Default)]
struct Index {
    entries: HashMap<String, Entry>,
    // newest first, ties by ascending id
    order: BTreeSet<(Reverse<DateTime<Utc>>, String)>,
}

impl Index {
    fn insert(&mut self, meta: Metadata, created_at: DateTime<Utc>) {
        let id = meta.id.clone();
        if let Some(parent) = meta.parent_id.as_ref().and_then(|p| self.entries.get_mut(p)) {
            parent.children.push(id.clone());
        }
        self.order.insert((Reverse(created_at), id.clone()));
        self.entries.insert(
            id,
            Entry {
                meta,
                created_at,
                children: Vec::new(),
            },
        );
    }
}

pub struct Store {
    root: PathBuf,
    index: RwLock<Index>,
    // serializes writers; holds the index log open for appending
    writer: Mutex<File>,
}

fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn new_id() -> String {
    format!("{:032x}", rand::rng().random::<u128>())
}

fn sync_dir(path: &Path) -> Result<(), StoreError> {
    File::open(path).and_then(|d| d.sync_all()).map_err(io_err(path))
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

/// Parses the index log. A final line that is unterminated or unparsable is
/// a torn append; its byte offset is returned so it can be cut off.
fn replay(text: &str) -> Result<(Vec<IndexEntry>, Option<usize>), StoreError> {
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').peekable();
    while let Some(line) = lines.next() {
        let last = lines.peek().is_none();
        let parsed = line
            .strip_suffix('\n')
            .and_then(|l| serde_json::from_str::<IndexEntry>(l.trim_end_matches('\r')).ok());
        match parsed {
            Some(e) => entries.push(e),
            None if line.trim().is_empty() && !last => {}
            None if last => return Ok((entries, Some(offset))),
            None => {
                return Err(StoreError::Corrupt(format!(
                    "unreadable index entry at byte {offset}"
                )))
            }
        }
        offset += line.len();
    }
    Ok((entries, None))
}

impl Store {
    /// Opens (creating if needed) the store at `root` and recovers from any
    /// interrupted writes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let records = root.join(RECORDS_DIR);
        fs::create_dir_all(&records).map_err(io_err(&records))?;

        let index_path = root.join(INDEX_FILE);
        let mut log = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&index_path)
            .map_err(io_err(&index_path))?;
        let mut text = String::new();
        log.read_to_string(&mut text).map_err(io_err(&index_path))?;
        let (entries, torn) = replay(&text)?;
        if let Some(offset) = torn {
            tracing::warn!(offset, "dropping torn index entry");
            log.set_len(offset as u64).map_err(io_err(&index_path))?;
            log.sync_all().map_err(io_err(&index_path))?;
        }
        log.seek(SeekFrom::End(0)).map_err(io_err(&index_path))?;

        let mut index = Index::default();
        for e in entries {
            if index.entries.contains_key(&e.id) {
                return Err(StoreError::Corrupt(format!("duplicate index entry {}", e.id)));
            }
            let dir = records.join(&e.id);
            let json = dir.join(METADATA_FILE);
            let text = fs::read_to_string(&json)
                .map_err(|_| StoreError::Corrupt(format!("record {} is missing", e.id)))?;
            let meta = Metadata::from_json(&text).map_err(|source| CorpusError::Metadata {
                path: json.clone(),
                source,
            })?;
            if meta.id != e.id || meta.parent_id != e.parent_id {
                return Err(StoreError::Corrupt(format!("record {} disagrees with the index", e.id)));
            }
            index.insert(meta, e.created_at);
        }

        for dirent in fs::read_dir(&records).map_err(io_err(&records))? {
            let dirent = dirent.map_err(io_err(&records))?;
            let name = dirent.file_name().to_string_lossy().into_owned();
            if index.entries.contains_key(&name) {
                continue;
            }
            let path = dirent.path();
            tracing::warn!(path = %path.display(), "removing unacknowledged record");
            let removed = if path.is_dir() {
                fs::remove_dir_all(&path)
            } else {
                fs::remove_file(&path)
            };
            removed.map_err(io_err(&path))?;
        }

        Ok(Self {
            root,
            index: RwLock::new(index),
            writer: Mutex::new(log),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_dir(&self, id: &str) -> PathBuf {
        self.root.join(RECORDS_DIR).join(id)
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.read().unwrap().entries.contains_key(id)
    }

    /// Stores `perf` under a fresh server-generated id and returns it. Any
    /// id already in `perf.meta` is ignored.
    pub fn put(&self, perf: TinyPerformance) -> Result<String, StoreError> {
        self.insert(perf, None)
    }

    /// Stores `perf` under its own id, e.g. when importing an existing
    /// corpus. Fails with [`StoreError::Conflict`] if the id is taken.
    pub fn put_with_id(&self, perf: TinyPerformance) -> Result<String, StoreError> {
        let id = perf.meta.id.clone();
        if !is_valid_id(&id) {
            return Err(StoreError::BadId(id));
        }
        self.insert(perf, Some(id))
    }

    fn insert(&self, mut perf: TinyPerformance, id: Option<String>) -> Result<String, StoreError> {
        perf.validate().into_result().map_err(StoreError::Invalid)?;
        let mut log = self.writer.lock().unwrap();

        let id = {
            let index = self.index.read().unwrap();
            if let Some(parent) = &perf.meta.parent_id {
                if !index.entries.contains_key(parent) {
                    return Err(StoreError::UnknownParent(parent.clone()));
                }
            }
            match id {
                Some(id) if index.entries.contains_key(&id) => return Err(StoreError::Conflict(id)),
                Some(id) => id,
                None => loop {
                    let id = new_id();
                    if !index.entries.contains_key(&id) {
                        break id;
                    }
                },
            }
        };
        perf.meta.id = id.clone();
        let created_at = Utc::now();

        let records = self.root.join(RECORDS_DIR);
        let tmp = records.join(format!("{TMP_PREFIX}{id}"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
        }
        fs::create_dir(&tmp).map_err(io_err(&tmp))?;
        write_synced(&tmp.join(METADATA_FILE), perf.meta.to_json().as_bytes())?;
        write_synced(&tmp.join(EVENTS_FILE), perf.to_csv().as_bytes())?;
        sync_dir(&tmp)?;
        let dir = records.join(&id);
        fs::rename(&tmp, &dir).map_err(io_err(&dir))?;
        sync_dir(&records)?;

        let entry = IndexEntry {
            id: id.clone(),
            created_at,
            parent_id: perf.meta.parent_id.clone(),
        };
        let mut line = serde_json::to_string(&entry).expect("index entry serializes");
        line.push('\n');
        let index_path = self.root.join(INDEX_FILE);
        log.write_all(line.as_bytes()).map_err(io_err(&index_path))?;
        log.sync_data().map_err(io_err(&index_path))?;

        self.index.write().unwrap().insert(perf.meta, created_at);
        Ok(id)
    }

    pub fn metadata(&self, id: &str) -> Result<Metadata, StoreError> {
        let index = self.index.read().unwrap();
        index
            .entries
            .get(id)
            .map(|e| e.meta.clone())
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<TinyPerformance, StoreError> {
        if !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let dir = self.record_dir(id);
        Ok(read_performance(&dir.join(EVENTS_FILE), &dir.join(METADATA_FILE))?)
    }

    pub fn record(&self, id: &str) -> Result<StoreRecord, StoreError> {
        let (metadata, created_at) = {
            let index = self.index.read().unwrap();
            let e = index.entries.get(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
            (e.meta.clone(), e.created_at)
        };
        let cached = |kind: ArtifactKind| {
            let p = self.artifact_path(id, kind, ENGINE_VERSION);
            p.is_file().then_some(p)
        };
        Ok(StoreRecord {
            metadata,
            created_at,
            events_path: self.record_dir(id).join(EVENTS_FILE),
            trace_path: cached(ArtifactKind::Trace),
            audio_path: cached(ArtifactKind::Audio),
        })
    }

    /// Newest-first page of metadata. `page` is 1-based; `page_size` is
    /// clamped to `1..=MAX_PAGE_SIZE`.
    pub fn list(&self, page: usize, page_size: usize) -> Page {
        let page = page.max(1);
        let page_size = page_size.clamp(1, MAX_PAGE_SIZE);
        let index = self.index.read().unwrap();
        let items = index
            .order
            .iter()
            .skip((page - 1).saturating_mul(page_size))
            .take(page_size)
            .map(|(_, id)| {
                let e = &index.entries[id];
                Listed {
                    metadata: e.meta.clone(),
                    created_at: e.created_at,
                }
            })
            .collect();
        Page {
            page,
            page_size,
            total: index.entries.len(),
            items,
        }
    }

    /// Ids from the root of `id`'s reply chain down to `id` itself.
    pub fn lineage(&self, id: &str) -> Result<Vec<String>, StoreError> {
        let index = self.index.read().unwrap();
        let mut ids = Vec::new();
        let mut cur = Some(id.to_string());
        while let Some(c) = cur {
            let e = index
                .entries
                .get(&c)
                .ok_or_else(|| StoreError::NotFound(c.clone()))?;
            if ids.len() > index.entries.len() {
                return Err(StoreError::Corrupt(format!("reply cycle through {c}")));
            }
            ids.push(c);
            cur = e.meta.parent_id.clone();
        }
        ids.reverse();
        Ok(ids)
    }

    /// The reply chain ending at `id`, root first.
    pub fn chain(&self, id: &str) -> Result<LayeredPerformance, StoreError> {
        let layers = self
            .lineage(id)?
            .iter()
            .map(|i| self.get(i))
            .collect::<Result<Vec<_>, _>>()?;
        LayeredPerformance::new(layers).map_err(|e| StoreError::Corrupt(e.to_string()))
    }

    /// Ids of direct replies to `id`, oldest first.
    pub fn children(&self, id: &str) -> Result<Vec<String>, StoreError> {
        let index = self.index.read().unwrap();
        index
            .entries
            .get(id)
            .map(|e| e.children.clone())
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Every stored performance, oldest first.
    pub fn all(&self) -> Result<Vec<TinyPerformance>, StoreError> {
        let ids: Vec<String> = {
            let index = self.index.read().unwrap();
            index.order.iter().rev().map(|(_, id)| id.clone()).collect()
        };
        ids.iter().map(|id| self.get(id)).collect()
    }

    pub fn artifact_path(&self, id: &str, kind: ArtifactKind, version: &str) -> PathBuf {
        self.record_dir(id).join(kind.file_name(version))
    }

    /// Cached artifact bytes for `id`, if rendered by engine `version`.
    pub fn read_artifact(&self, id: &str, kind: ArtifactKind, version: &str) -> Result<Option<Vec<u8>>, StoreError> {
        if !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let path = self.artifact_path(id, kind, version);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Caches an artifact atomically and drops copies made by other engine
    /// versions.
    pub fn write_artifact(&self, id: &str, kind: ArtifactKind, version: &str, bytes: &[u8]) -> Result<(), StoreError> {
        if !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let dir = self.record_dir(id);
        let name = kind.file_name(version);
        let tmp = dir.join(format!("{TMP_PREFIX}{name}-{:08x}", rand::rng().random::<u32>()));
        write_synced(&tmp, bytes)?;
        let path = dir.join(&name);
        fs::rename(&tmp, &path).map_err(io_err(&path))?;

        let prefix = format!("{}-", kind.stem());
        let suffix = format!(".{}", kind.extension());
        for dirent in fs::read_dir(&dir).map_err(io_err(&dir))?.flatten() {
            let other = dirent.file_name().to_string_lossy().into_owned();
            if other != name && other.starts_with(&prefix) && other.ends_with(&suffix) {
                let _ = fs::remove_file(dirent.path());
            }
        }
        Ok(())
    }
}
