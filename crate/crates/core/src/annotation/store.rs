//! Append-only annotation log with optimistic revisions.
//!
//! Each committed write appends one JSON line and syncs it before the
//! in-memory view is updated. Opening a store replays the log, keeps the
//! highest revision per `(annotator, narrative)` key, and rewrites the file
//! with one record per key.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::Serialize;
use thiserror::Error;

use super::{validate_annotation_set, AnnotationSet, NarrativeMismatch, Violation, Violations};
use crate::corpus::Narrative;

type Key = (String, String);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("stale revision: stored {stored}, expected {expected}")]
    StaleRevision { stored: u64, expected: u64 },
    #[error("annotation set has {} error(s)", .0.errors.len())]
    ValidationError(Violations),
    #[error(transparent)]
    NarrativeMismatch(#[from] NarrativeMismatch),
    #[error("store i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpsertOutcome {
    pub revision: u64,
    pub warnings: Vec<Violation>,
}

/// A log line that was not applied during replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    /// 1-based line number in the log.
    pub line: usize,
    /// True for an unparseable final line (an interrupted append).
    pub torn: bool,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub applied: usize,
    pub skipped: Vec<SkippedRecord>,
}

impl RecoveryReport {
    pub fn torn(&self) -> Option<&SkippedRecord> {
        self.skipped.iter().find(|s| s.torn)
    }
}

#[derive(Debug, Default)]
pub struct AnnotationStore {
    entries: RwLock<BTreeMap<Key, AnnotationSet>>,
    // Held for the whole check-append-publish sequence of an upsert.
    log: Mutex<Option<BufWriter<File>>>,
    path: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Replay log bytes into a key map.
pub(crate) fn replay(bytes: &[u8]) -> (BTreeMap<Key, AnnotationSet>, RecoveryReport) {
    let mut entries: BTreeMap<Key, AnnotationSet> = BTreeMap::new();
    let mut report = RecoveryReport::default();
    let text = String::from_utf8_lossy(bytes);
    let segments: Vec<&str> = text.split('\n').collect();
    let last = segments.len().saturating_sub(1);
    for (i, raw) in segments.iter().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let torn = i == last;
        let set = match serde_json::from_str::<AnnotationSet>(raw) {
            Ok(set) => set,
            Err(e) => {
                report.skipped.push(SkippedRecord { line: i + 1, torn, reason: e.to_string() });
                continue;
            }
        };
        let key = (set.annotator_id.clone(), set.narrative_id.clone());
        let current = entries.get(&key).map_or(0, |s| s.revision);
        if set.revision <= current {
            report.skipped.push(SkippedRecord {
                line: i + 1,
                torn: false,
                reason: format!("revision {} does not advance stored revision {current}", set.revision),
            });
            continue;
        }
        entries.insert(key, set);
        report.applied += 1;
    }
    (entries, report)
}

fn encode(set: &AnnotationSet) -> String {
    serde_json::to_string(set).expect("annotation sets always serialize")
}

impl AnnotationStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// In-memory store preloaded with sets, keeping each set's revision.
    pub fn from_sets(sets: impl IntoIterator<Item = AnnotationSet>) -> Self {
        let entries = sets.into_iter().map(|s| ((s.annotator_id.clone(), s.narrative_id.clone()), s)).collect();
        AnnotationStore { entries: RwLock::new(entries), ..Self::default() }
    }

    /// Open (or create) a durable store, compacting the log.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, RecoveryReport), StoreError> {
        let path = path.as_ref();
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(path)(e)),
        };
        let (entries, report) = replay(&bytes);

        let tmp = path.with_extension("compact.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
            for set in entries.values() {
                writeln!(w, "{}", encode(set)).map_err(io_err(&tmp))?;
            }
            let f = w.into_inner().map_err(|e| io_err(&tmp)(e.into_error()))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, path).map_err(io_err(path))?;

        let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        Ok((
            AnnotationStore {
                entries: RwLock::new(entries),
                log: Mutex::new(Some(BufWriter::new(file))),
                path: Some(path.to_path_buf()),
            },
            report,
        ))
    }

    /// Replay a log without rewriting it. Writes stay in memory.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<(Self, RecoveryReport), StoreError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
        let (entries, report) = replay(&bytes);
        Ok((AnnotationStore { entries: RwLock::new(entries), ..Self::default() }, report))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, annotator_id: &str, narrative_id: &str) -> Option<AnnotationSet> {
        let key = (annotator_id.to_string(), narrative_id.to_string());
        self.entries.read().unwrap().get(&key).cloned()
    }

    pub fn revision(&self, annotator_id: &str, narrative_id: &str) -> u64 {
        self.get(annotator_id, narrative_id).map_or(0, |s| s.revision)
    }

    /// All sets ordered by `(annotator, narrative)`.
    pub fn snapshot(&self) -> Vec<AnnotationSet> {
        self.entries.read().unwrap().values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Annotators that have a set for `narrative_id`, sorted.
    pub fn annotators_of(&self, narrative_id: &str) -> Vec<String> {
        self.entries.read().unwrap().keys().filter(|(_, n)| n == narrative_id).map(|(a, _)| a.clone()).collect()
    }

    /// Replace the set for its key if `expected_revision` matches the stored
    /// revision (0 when absent). Returns the new revision and any warnings.
    pub fn upsert(
        &self,
        mut set: AnnotationSet,
        expected_revision: u64,
        narrative: &Narrative,
    ) -> Result<UpsertOutcome, StoreError> {
        let violations = validate_annotation_set(&set, narrative)?;
        let mut log = self.log.lock().unwrap();

        let stored = self.revision(&set.annotator_id, &set.narrative_id);
        if stored != expected_revision {
            return Err(StoreError::StaleRevision { stored, expected: expected_revision });
        }
        if violations.has_errors() {
            return Err(StoreError::ValidationError(violations));
        }

        set.revision = expected_revision + 1;
        if let (Some(w), Some(path)) = (log.as_mut(), self.path.as_deref()) {
            let line = encode(&set) + "\n";
            w.write_all(line.as_bytes()).map_err(io_err(path))?;
            w.flush().map_err(io_err(path))?;
            w.get_ref().sync_data().map_err(io_err(path))?;
        }
        let revision = set.revision;
        let key = (set.annotator_id.clone(), set.narrative_id.clone());
        self.entries.write().unwrap().insert(key, set);
        Ok(UpsertOutcome { revision, warnings: violations.warnings })
    }

    pub fn flush(&self) -> Result<(), StoreError> {
        let mut log = self.log.lock().unwrap();
        if let (Some(w), Some(path)) = (log.as_mut(), self.path.as_deref()) {
            w.flush().map_err(io_err(path))?;
            w.get_ref().sync_all().map_err(io_err(path))?;
        }
        Ok(())
    }

    /// Serialize all sets in annotations-file format.
    pub fn export(&self, mut out: impl Write) -> std::io::Result<()> {
        for set in self.snapshot() {
            writeln!(out, "{}", encode(&set))?;
        }
        Ok(())
    }
}
