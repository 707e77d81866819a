//! On-disk layout under a store directory:
//!
//! - `events.jsonl`: one JSON event per line, dense `seq` from 1, never rewritten.
//! - `snapshot.json`: canonical JSON of the state as of its `last_seq`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::orchestrator::{replay, replay_onto, CorruptLog, Event, OrchestratorState};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{file} line {line}: {source}")]
    Parse {
        file: &'static str,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Corrupt(#[from] CorruptLog),
    #[error("snapshot at seq {0} does not match the replayed log")]
    SnapshotMismatch(u64),
}

#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
    events: File,
}

impl FileStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let events = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(EVENTS_FILE))?;
        Ok(Self { dir, events })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, events: &[Event]) -> Result<(), StoreError> {
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e).expect("event serializes");
            buf.push(b'\n');
        }
        self.events.write_all(&buf)?;
        self.events.flush()?;
        Ok(())
    }

    pub fn write_snapshot(&self, state: &OrchestratorState) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, state.canonical_json())?;
        fs::rename(tmp, self.dir.join(SNAPSHOT_FILE))?;
        Ok(())
    }
}

pub fn read_events(dir: impl AsRef<Path>) -> Result<Vec<Event>, StoreError> {
    let path = dir.as_ref().join(EVENTS_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|source| StoreError::Parse {
            file: EVENTS_FILE,
            line: i + 1,
            source,
        })?;
        out.push(event);
    }
    Ok(out)
}

pub fn read_snapshot(dir: impl AsRef<Path>) -> Result<Option<OrchestratorState>, StoreError> {
    match fs::read_to_string(dir.as_ref().join(SNAPSHOT_FILE)) {
        Ok(raw) => serde_json::from_str(&raw)
            .map(Some)
            .map_err(|source| StoreError::Parse {
                file: SNAPSHOT_FILE,
                line: source.line(),
                source,
            }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Loads the latest state: the snapshot if any, plus every later event.
pub fn load(dir: impl AsRef<Path>) -> Result<OrchestratorState, StoreError> {
    let events = read_events(&dir)?;
    let base = read_snapshot(&dir)?.unwrap_or_default();
    let from = base.last_seq;
    Ok(replay_onto(base, events.iter().filter(|e| e.seq > from))?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub events: usize,
    pub last_seq: u64,
    pub pipelines: usize,
    pub complete: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_seq: Option<u64>,
}

/// Replays the whole log from seq 1 and, when a snapshot exists, checks it
/// byte-for-byte against the replayed state at the same seq.
pub fn validate(dir: impl AsRef<Path>) -> Result<ValidationReport, StoreError> {
    let events = read_events(&dir)?;
    let state = replay(&events)?;
    let snapshot = read_snapshot(&dir)?;
    if let Some(snap) = &snapshot {
        let at = replay(events.iter().take_while(|e| e.seq <= snap.last_seq))?;
        if at.canonical_json() != snap.canonical_json() {
            return Err(StoreError::SnapshotMismatch(snap.last_seq));
        }
    }
    let count = |label: &str| {
        state
            .pipelines
            .values()
            .filter(|p| p.state.label() == label)
            .count()
    };
    Ok(ValidationReport {
        events: events.len(),
        last_seq: state.last_seq,
        pipelines: state.pipelines.len(),
        complete: count("complete"),
        failed: count("failed"),
        snapshot_seq: snapshot.map(|s| s.last_seq),
    })
}
