//! Append-only journal of evaluated individuals, one JSON record per line.
//!
//! The first line is a header carrying the configuration; each accepted
//! submission appends one batch record and is flushed before the submission
//! is acknowledged. Restarting an algorithm rotates the file to
//! `<id>.<epoch>.journal` and starts a new one.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use evofarm_core::{AlgorithmConfig, Chromosome};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub id: u64,
    pub chromosome: Chromosome,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JournalRecord {
    Header {
        algorithm_id: String,
        epoch: u64,
        config: AlgorithmConfig,
    },
    Batch {
        packet_id: String,
        client: String,
        results: Vec<JournalEntry>,
    },
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    out: BufWriter<File>,
}

pub fn journal_path(dir: &Path, algorithm_id: &str) -> PathBuf {
    dir.join(format!("{algorithm_id}.journal"))
}

impl Journal {
    /// Starts a new journal, replacing any file already at the path.
    pub fn create(dir: &Path, algorithm_id: &str, epoch: u64, config: &AlgorithmConfig) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = journal_path(dir, algorithm_id);
        let file = File::create(&path)?;
        let mut journal = Journal {
            path,
            out: BufWriter::new(file),
        };
        journal.append(&JournalRecord::Header {
            algorithm_id: algorithm_id.to_string(),
            epoch,
            config: config.clone(),
        })?;
        Ok(journal)
    }

    /// Continues an existing journal after replay.
    pub fn reopen(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Journal {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &JournalRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn rotate(&mut self, old_epoch: u64, new_epoch: u64, config: &AlgorithmConfig) -> io::Result<()> {
        self.out.flush()?;
        let dir = self.path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let stem = self
            .path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("journal")
            .to_string();
        fs::rename(&self.path, dir.join(format!("{stem}.{old_epoch}.journal")))?;
        *self = Journal::create(&dir, &stem, new_epoch, config)?;
        Ok(())
    }
}

/// Everything recoverable from one journal file.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub algorithm_id: String,
    pub epoch: u64,
    pub config: AlgorithmConfig,
    pub batches: Vec<(String, String, Vec<JournalEntry>)>,
}

impl Replay {
    pub fn evaluated_count(&self) -> u64 {
        self.batches.iter().map(|(_, _, r)| r.len() as u64).sum()
    }
}

/// Reads a journal back. A torn final line (crash mid-write) is ignored;
/// corruption anywhere else is an error.
pub fn replay(path: &Path) -> io::Result<Replay> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<io::Result<_>>()?;
    let bad = |n: usize, msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{n}: {msg}", path.display()));

    let mut records = Vec::with_capacity(lines.len());
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JournalRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if n + 1 == lines.len() => break,
            Err(e) => return Err(bad(n + 1, e.to_string())),
        }
    }
    let mut records = records.into_iter();
    let Some(JournalRecord::Header {
        algorithm_id,
        epoch,
        config,
    }) = records.next()
    else {
        return Err(bad(1, "missing header".into()));
    };
    let mut batches = Vec::new();
    for (i, record) in records.enumerate() {
        match record {
            JournalRecord::Batch {
                packet_id,
                client,
                results,
            } => batches.push((packet_id, client, results)),
            JournalRecord::Header { .. } => return Err(bad(i + 2, "unexpected second header".into())),
        }
    }
    Ok(Replay {
        algorithm_id,
        epoch,
        config,
        batches,
    })
}
