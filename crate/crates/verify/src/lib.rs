//! Human verification of proposed matches.
//!
//! A stored merge run is turned into a queue of items, each pairing a
//! proposal with ranked alternatives. Reviewers lease items, record
//! verdicts and read back per-phase accuracy; accepted matches can be
//! exported as seeds for the next run.

pub mod queue;
pub mod server;
pub mod store;

use std::path::{Path, PathBuf};

use lexalign_core::hiermatch::{read_stats_tsv, write_stats_tsv};
use lexalign_core::pipeline::{LoadedRun, HIERMATCH_STATS};
use lexalign_core::store::write_file;

pub use queue::{Queue, QueueError, Verdict, VerificationItem};
pub use store::{QueueStore, StoreError};

/// Where a run keeps its verification state.
pub fn queue_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("verify")
}

/// Opens the queue of a run, enqueueing the run on first use.
pub fn open_run_queue(run: &LoadedRun, lease_ms: u64) -> Result<QueueStore, StoreError> {
    let mut store = QueueStore::open(&queue_dir(&run.dir), lease_ms)?;
    match &store.queue().run_id {
        None => store.enqueue_run(run)?,
        Some(id) if *id == run.manifest.run_id => {}
        Some(id) => return Err(QueueError::DuplicateRun(id.clone()).into()),
    }
    Ok(store)
}

/// Writes the run's hierarchy-step counts with the accuracy column filled
/// from reviewer verdicts, next to the queue. The run directory itself is
/// left untouched.
pub fn write_verified_stats(run_dir: &Path, queue: &Queue) -> Result<PathBuf, StoreError> {
    let source = run_dir.join(HIERMATCH_STATS);
    let text = std::fs::read_to_string(&source).map_err(|e| StoreError::Io {
        path: source.clone(),
        source: e,
    })?;
    let stats = read_stats_tsv(&text, &source)?;
    let pct = queue
        .stats()
        .into_iter()
        .filter_map(|s| s.pct_correct.map(|p| (s.phase, p)))
        .collect();
    let target = queue_dir(run_dir).join(HIERMATCH_STATS);
    write_file(&target, |w| write_stats_tsv(&stats, Some(&pct), w))?;
    Ok(target)
}
