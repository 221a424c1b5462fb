//! Append-only event log with periodic snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use lexalign_core::pipeline::LoadedRun;
use lexalign_core::store::Versioned;
use lexalign_core::SCHEMA_VERSION;

use crate::queue::{items_for_run, Event, ItemId, Queue, QueueError, Verdict, VerdictRecord, VerificationItem};

pub const EVENTS: &str = "events.jsonl";
pub const SNAPSHOT: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Run(#[from] lexalign_core::store::StoreError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schema_version: u32,
    queue: Queue,
}

/// Rebuilds a queue from the event log alone.
pub fn replay(path: &Path, lease_ms: u64) -> Result<Queue, StoreError> {
    let mut queue = Queue::new(lease_ms);
    apply_log(&mut queue, path, 0)?;
    Ok(queue)
}

fn apply_log(queue: &mut Queue, path: &Path, skip: u64) -> Result<(), StoreError> {
    if !path.exists() {
        return Ok(());
    }
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut seen = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        if seen <= skip {
            continue;
        }
        let corrupt = |message: String| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let event: Versioned<Event> = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        queue.apply(&event.record).map_err(|e| corrupt(e.to_string()))?;
    }
    Ok(())
}

/// A queue backed by a directory holding the event log and a snapshot.
/// Every change is appended to the log before it takes effect in memory.
pub struct QueueStore {
    dir: PathBuf,
    queue: Queue,
    log: File,
    snapshot_every: u64,
}

impl QueueStore {
    /// Opens or creates the store, loading the snapshot and replaying the
    /// events logged after it.
    pub fn open(dir: &Path, lease_ms: u64) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let snapshot_path = dir.join(SNAPSHOT);
        let mut queue = if snapshot_path.exists() {
            let text = fs::read_to_string(&snapshot_path).map_err(io_err(&snapshot_path))?;
            let snapshot: Snapshot = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: snapshot_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            let mut q = snapshot.queue;
            q.lease_ms = lease_ms;
            q
        } else {
            Queue::new(lease_ms)
        };
        let log_path = dir.join(EVENTS);
        let skip = queue.events_applied();
        apply_log(&mut queue, &log_path, skip)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        Ok(QueueStore {
            dir: dir.to_path_buf(),
            queue,
            log,
            snapshot_every: 100,
        })
    }

    pub fn with_snapshot_interval(mut self, every: u64) -> Self {
        self.snapshot_every = every.max(1);
        self
    }

    pub fn queue(&self) -> &Queue {
        &self.queue
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn commit(&mut self, event: Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(&Versioned::new(&event)).expect("events serialize");
        line.push(b'\n');
        let path = self.dir.join(EVENTS);
        self.log.write_all(&line).map_err(io_err(&path))?;
        self.log.flush().map_err(io_err(&path))?;
        self.queue.apply(&event)?;
        if self.queue.events_applied().is_multiple_of(self.snapshot_every) {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Enqueues a stored run unless this queue already holds it.
    pub fn enqueue_run(&mut self, run: &LoadedRun) -> Result<(), StoreError> {
        if let Some(existing) = &self.queue.run_id {
            return Err(QueueError::DuplicateRun(existing.clone()).into());
        }
        let items = items_for_run(run)?;
        self.commit(Event::Enqueued {
            run_id: run.manifest.run_id.clone(),
            items,
        })
    }

    /// Leases the next pending item to `verifier`.
    pub fn next_item(&mut self, verifier: &str, now_ms: u64) -> Result<Option<VerificationItem>, StoreError> {
        let Some(event) = self.queue.next_event(verifier, now_ms) else {
            return Ok(None);
        };
        let Event::Leased { item, .. } = &event else {
            unreachable!("next_event only leases");
        };
        let id = *item;
        self.commit(event)?;
        Ok(self.queue.item(id).cloned())
    }

    pub fn record_verdict(
        &mut self,
        item: ItemId,
        verdict: Verdict,
        verifier: &str,
        now_ms: u64,
    ) -> Result<VerdictRecord, StoreError> {
        let event = self.queue.verdict_event(item, verdict, verifier, now_ms)?;
        let Event::Judged(record) = &event else {
            unreachable!("verdict_event only judges");
        };
        let record = record.clone();
        self.commit(event)?;
        Ok(record)
    }

    /// Writes the current state next to the log.
    pub fn snapshot(&self) -> Result<(), StoreError> {
        let path = self.dir.join(SNAPSHOT);
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        let body = serde_json::to_vec(&Snapshot {
            schema_version: SCHEMA_VERSION,
            queue: self.queue.clone(),
        })
        .expect("queue serializes");
        fs::write(&tmp, body).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}
