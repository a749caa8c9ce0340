//! Reading and writing corpora as directories of CSV + JSON sidecar pairs.

use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::perf::{parse_events_csv, FormatError, Metadata, TinyPerformance};

/// Sidecar name used when a directory holds a single performance.
pub const METADATA_FILE: &str = "metadata.json";
pub const EVENTS_FILE: &str = "events.csv";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: invalid metadata: {source}")]
    Metadata {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}: no metadata sidecar found")]
    MissingMetadata(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sidecar for `events`: `<stem>.json` next to it, or `metadata.json` in
/// the same directory.
fn sidecar_for(events: &Path) -> Option<PathBuf> {
    let own = events.with_extension("json");
    if own.is_file() {
        return Some(own);
    }
    let shared = events.parent()?.join(METADATA_FILE);
    shared.is_file().then_some(shared)
}

pub fn read_performance(events_path: &Path, metadata_path: &Path) -> Result<TinyPerformance, CorpusError> {
    let csv = std::fs::read_to_string(events_path).map_err(io_err(events_path))?;
    let events = parse_events_csv(&csv).map_err(|source| CorpusError::Format {
        path: events_path.to_path_buf(),
        source,
    })?;
    let json = std::fs::read_to_string(metadata_path).map_err(io_err(metadata_path))?;
    let meta = Metadata::from_json(&json).map_err(|source| CorpusError::Metadata {
        path: metadata_path.to_path_buf(),
        source,
    })?;
    Ok(TinyPerformance::new(meta, events))
}

/// Loads every performance CSV below `dir`, in path order. Hidden
/// entries (names starting with `.`) are skipped.
pub fn load_corpus(dir: &Path) -> Result<Vec<TinyPerformance>, CorpusError> {
    let mut out = Vec::new();
    let walker = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().map_or_else(|| dir.to_path_buf(), Path::to_path_buf),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk failed")),
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let meta = sidecar_for(path).ok_or_else(|| CorpusError::MissingMetadata(path.to_path_buf()))?;
        out.push(read_performance(path, &meta)?);
    }
    Ok(out)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_performance(dir: &Path, stem: &str, perf: &TinyPerformance) -> Result<(), CorpusError> {
    let csv = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv, perf.to_csv()).map_err(io_err(&csv))?;
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, perf.meta.to_json()).map_err(io_err(&json))?;
    Ok(())
}
