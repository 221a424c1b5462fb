//! Line-delimited JSON and TSV formats shared by the matchers, the pipeline
//! and the verification service.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexmodel::{Match, MatchStatus, Phase, SenseId};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl StoreError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead, origin: &Path) -> Result<Vec<T>, StoreError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| StoreError::Format {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    read_jsonl(BufReader::new(file), path)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    items: impl IntoIterator<Item = &'a T>,
    mut out: impl Write,
) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes a file through a buffered writer, creating parent directories.
pub fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| StoreError::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| StoreError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    body(&mut writer).map_err(|e| StoreError::io(path, e))?;
    writer.flush().map_err(|e| StoreError::io(path, e))
}

/// Wraps a record with the schema version field every output line carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: T,
}

impl<T> Versioned<T> {
    pub fn new(record: T) -> Self {
        Versioned {
            schema_version: SCHEMA_VERSION,
            record,
        }
    }
}

pub fn write_versioned<'a, T: Serialize + Clone + 'a>(
    items: impl IntoIterator<Item = &'a T>,
    out: impl Write,
) -> io::Result<()> {
    let lines: Vec<Versioned<&T>> = items.into_iter().map(Versioned::new).collect();
    write_jsonl(&lines, out)
}

pub fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let lines: Vec<Versioned<T>> = read_jsonl_file(path)?;
    Ok(lines.into_iter().map(|l| l.record).collect())
}

/// On-disk form of a [`Match`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchLine {
    pub schema_version: u32,
    pub left: SenseId,
    pub right: SenseId,
    pub confidence: f64,
    pub phase: Phase,
    #[serde(default)]
    pub status: MatchStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_right: Option<SenseId>,
}

impl From<&Match> for MatchLine {
    fn from(m: &Match) -> Self {
        MatchLine {
            schema_version: SCHEMA_VERSION,
            left: m.left.clone(),
            right: m.right.clone(),
            confidence: m.confidence,
            phase: m.phase,
            status: m.status,
            corrected_right: m.corrected_right.clone(),
        }
    }
}

impl From<MatchLine> for Match {
    fn from(line: MatchLine) -> Self {
        Match {
            left: line.left,
            right: line.right,
            confidence: line.confidence,
            phase: line.phase,
            status: line.status,
            corrected_right: line.corrected_right,
        }
    }
}

pub fn write_matches<'a>(matches: impl IntoIterator<Item = &'a Match>, out: impl Write) -> io::Result<()> {
    let lines: Vec<MatchLine> = matches.into_iter().map(MatchLine::from).collect();
    write_jsonl(&lines, out)
}

pub fn read_matches(path: &Path) -> Result<Vec<Match>, StoreError> {
    let lines: Vec<MatchLine> = read_jsonl_file(path)?;
    Ok(lines.into_iter().map(Match::from).collect())
}

/// A hand-crafted or verified pairing. Match lines also parse as seeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLine {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub left: SenseId,
    pub right: SenseId,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

pub fn read_seeds(path: &Path) -> Result<Vec<SeedLine>, StoreError> {
    read_jsonl_file(path)
}

pub fn write_seeds<'a>(pairs: impl IntoIterator<Item = (&'a SenseId, &'a SenseId)>, out: impl Write) -> io::Result<()> {
    let lines: Vec<SeedLine> = pairs
        .into_iter()
        .map(|(left, right)| SeedLine {
            schema_version: SCHEMA_VERSION,
            left: left.clone(),
            right: right.clone(),
        })
        .collect();
    write_jsonl(&lines, out)
}
