//! Append-only JSONL event log.
//!
//! Two line kinds: `session` opens a session with everything needed to
//! rebuild it, `result` is a playtrace record. Lines are never rewritten.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use adapt_core::engine::Domain;
use adapt_harness::PlaytraceRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOpened {
    pub session_id: String,
    pub domain: Domain,
    pub policy: String,
    pub goal_seconds: f64,
    pub seed: u64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogLine {
    Session(SessionOpened),
    Result(PlaytraceRecord),
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("log line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// Reads every line of an existing log; a missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<LogLine>, LogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(LogError::Io {
                path: path.to_owned(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| LogError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?,
        );
    }
    Ok(out)
}

/// Single appender. Every line is flushed before `append` returns.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LogError::Io {
                path: path.to_owned(),
                source,
            })?;
        Ok(LogWriter {
            path: path.to_owned(),
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, line: &LogLine) -> Result<(), LogError> {
        let io_err = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        let text = serde_json::to_string(line).expect("log lines serialize");
        writeln!(self.out, "{text}").map_err(io_err)?;
        self.out.flush().map_err(io_err)
    }
}
