use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EventBody, EventKind, GraphError, TwinEvent, TwinGraph};
use crate::time::Timestamp;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("cannot access event log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("event log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event log line {line}: unknown event kind {kind:?}")]
    UnknownEventKind { line: usize, kind: String },
    #[error("corrupt event log: {0}")]
    Corrupt(#[from] GraphError),
    #[error("snapshot schema version {0} is not supported")]
    SnapshotVersion(u32),
}

/// Serialized graph state at some sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub graph: TwinGraph,
}

impl Snapshot {
    pub fn of(graph: &TwinGraph) -> Self {
        Self { schema_version: SNAPSHOT_SCHEMA_VERSION, graph: graph.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshots always serialize")
    }
}

/// Rebuilds a graph from a complete log starting at seq 1.
pub fn replay(events: &[TwinEvent]) -> Result<TwinGraph, GraphError> {
    replay_onto(TwinGraph::new(), events)
}

/// Applies `tail` on top of a snapshot graph; `tail` must continue at
/// `graph.last_seq + 1`.
pub fn replay_onto(mut graph: TwinGraph, tail: &[TwinEvent]) -> Result<TwinGraph, GraphError> {
    for event in tail {
        graph.apply(event)?;
    }
    Ok(graph)
}

fn parse_line(line_no: usize, line: &str) -> Result<TwinEvent, LogError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| LogError::Parse { line: line_no, message: e.to_string() })?;
    let kind = value.get("kind").and_then(|k| k.as_str()).unwrap_or_default();
    if EventKind::parse(kind).is_none() {
        return Err(LogError::UnknownEventKind { line: line_no, kind: kind.to_string() });
    }
    serde_json::from_value(value).map_err(|e| LogError::Parse { line: line_no, message: e.to_string() })
}

/// Reads a line-delimited event log. Blank lines are skipped.
pub fn read_log(reader: impl BufRead) -> Result<Vec<TwinEvent>, LogError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LogError::Parse { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(parse_line(i + 1, &line)?);
    }
    Ok(events)
}

struct LogSink {
    path: PathBuf,
    writer: BufWriter<File>,
}

/// Single-writer owner of the graph and its log.
///
/// Every mutation goes through [`TwinStore::commit`], which validates the
/// event against the graph, applies it, and appends it to the log. Readers
/// borrow [`TwinStore::graph`] or take a [`Snapshot`].
pub struct TwinStore {
    graph: TwinGraph,
    events: Vec<TwinEvent>,
    sink: Option<LogSink>,
    snapshot_every: Option<u64>,
}

impl Default for TwinStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl TwinStore {
    pub fn in_memory() -> Self {
        Self { graph: TwinGraph::new(), events: Vec::new(), sink: None, snapshot_every: None }
    }

    pub fn from_events(events: Vec<TwinEvent>) -> Result<Self, GraphError> {
        let graph = replay(&events)?;
        Ok(Self { graph, events, sink: None, snapshot_every: None })
    }

    /// Opens (or creates) a log file and replays it. When a snapshot file
    /// exists next to the log it seeds the graph and only the tail is applied.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| LogError::Io { path: path.clone(), source };
        let events = match File::open(&path) {
            Ok(f) => read_log(BufReader::new(f))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(e)),
        };
        for (i, event) in events.iter().enumerate() {
            let expected = i as u64 + 1;
            if event.seq != expected {
                return Err(GraphError::GapInSequence { expected, found: event.seq }.into());
            }
        }

        let snapshot_path = Self::snapshot_path_for(&path);
        let graph = match fs::read_to_string(&snapshot_path) {
            Ok(text) => {
                let snap: Snapshot = serde_json::from_str(&text)
                    .map_err(|e| LogError::Parse { line: 0, message: format!("snapshot: {e}") })?;
                if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
                    return Err(LogError::SnapshotVersion(snap.schema_version));
                }
                let start = snap.graph.last_seq as usize;
                if start > events.len() {
                    // Snapshot is ahead of the log; trust the log.
                    replay(&events)?
                } else {
                    replay_onto(snap.graph, &events[start..])?
                }
            }
            Err(_) => replay(&events)?,
        };

        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        Ok(Self {
            graph,
            events,
            sink: Some(LogSink { path, writer: BufWriter::new(file) }),
            snapshot_every: None,
        })
    }

    /// Write a snapshot next to the log every `n` committed events.
    pub fn with_snapshot_every(mut self, n: u64) -> Self {
        self.snapshot_every = (n > 0).then_some(n);
        self
    }

    pub fn snapshot_path_for(log_path: &Path) -> PathBuf {
        let mut name = log_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".snapshot.json");
        log_path.with_file_name(name)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|s| s.path.as_path())
    }

    pub fn graph(&self) -> &TwinGraph {
        &self.graph
    }

    pub fn events(&self) -> &[TwinEvent] {
        &self.events
    }

    pub fn last_seq(&self) -> u64 {
        self.graph.last_seq
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::of(&self.graph)
    }

    /// Validates and appends one event. Nothing is written when validation fails.
    pub fn commit(&mut self, at: Timestamp, body: EventBody) -> Result<&TwinEvent, GraphError> {
        let event = TwinEvent { seq: self.graph.last_seq + 1, at, body };
        self.graph.apply(&event)?;
        if let Some(sink) = self.sink.as_mut() {
            // The graph already holds the event; a failed write is surfaced as
            // an invalid-state error so callers stop issuing commits.
            let line = event.to_line();
            if let Err(e) = writeln!(sink.writer, "{line}").and_then(|_| sink.writer.flush()) {
                return Err(GraphError::Invalid(format!("event log write failed: {e}")));
            }
        }
        self.events.push(event);
        if let Some(n) = self.snapshot_every {
            if self.graph.last_seq.is_multiple_of(n) {
                let _ = self.write_snapshot();
            }
        }
        Ok(self.events.last().unwrap())
    }

    /// Writes the snapshot file next to the log (no-op for in-memory stores).
    pub fn write_snapshot(&mut self) -> io::Result<()> {
        let Some(sink) = self.sink.as_mut() else { return Ok(()) };
        sink.writer.flush()?;
        let path = Self::snapshot_path_for(&sink.path);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.snapshot_json())?;
        fs::rename(tmp, path)
    }

    pub fn snapshot_json(&self) -> String {
        Snapshot::of(&self.graph).to_json()
    }

    /// Flushes buffered log writes.
    pub fn flush(&mut self) -> io::Result<()> {
        match self.sink.as_mut() {
            Some(sink) => sink.writer.flush(),
            None => Ok(()),
        }
    }

    /// Events after `seq`, in commit order.
    pub fn events_since(&self, seq: u64) -> &[TwinEvent] {
        &self.events[(seq as usize).min(self.events.len())..]
    }
}

impl Drop for TwinStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}
