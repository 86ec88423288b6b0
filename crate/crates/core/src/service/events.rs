//! Append-only per-session event log (`{state_dir}/{session_id}.jsonl`).

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::samplers::SamplerKind;

/// Normalized creation request, enough to rebuild the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub dataset: String,
    pub hyperparams: Hyperparams,
    pub strategy: SamplerKind,
    pub eval_split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Created {
        session_id: String,
        created_at: u64,
        spec: SessionSpec,
    },
    /// Answers to display `t`, as `(sample_id, ±1)`.
    Labeled { t: usize, answers: Vec<(String, i8)> },
    Advanced { t: usize },
}

pub fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

/// Appends events as one write and syncs.
pub fn append(path: &Path, events: &[Event]) -> Result<()> {
    let mut buf = Vec::new();
    for e in events {
        serde_json::to_writer(&mut buf, e)
            .map_err(|err| Error::Format(format!("encoding event: {err}")))?;
        buf.push(b'\n');
    }
    let ctx = || format!("appending to {}", path.display());
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(ctx(), e))?;
    file.write_all(&buf).map_err(|e| Error::io(ctx(), e))?;
    file.sync_data().map_err(|e| Error::io(ctx(), e))
}

/// Reads a log. A torn last line (crash mid-append) is dropped; any other
/// malformed line is an error.
pub fn read(path: &Path) -> Result<Vec<Event>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut events = Vec::with_capacity(lines.len());
    for (no, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => events.push(e),
            Err(_) if no + 1 == lines.len() => {
                tracing::warn!(path = %path.display(), "dropping torn final event");
            }
            Err(err) => {
                return Err(Error::Format(format!(
                    "{} line {}: {err}",
                    path.display(),
                    no + 1
                )))
            }
        }
    }
    Ok(events)
}
