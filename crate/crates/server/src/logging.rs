//! Request log with a background writer.
//!
//! Handlers only format a line and push it onto a channel; a dedicated
//! thread owns the file. `Quiet` keeps lifecycle events (create, restart,
//! finish) and drops everything on the request path.

use std::fs::OpenOptions;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::JoinHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogMode {
    Quiet,
    Debug,
}

impl FromStr for LogMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quiet" => Ok(LogMode::Quiet),
            "debug" => Ok(LogMode::Debug),
            other => Err(format!("unknown log mode {other:?} (expected quiet|debug)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogSink {
    /// Nothing is formatted or written, in either mode.
    Null,
    Stderr,
    File(PathBuf),
}

pub struct RequestLog {
    mode: LogMode,
    tx: Option<Sender<String>>,
    writer: Option<JoinHandle<()>>,
}

impl RequestLog {
    pub fn disabled() -> Self {
        RequestLog {
            mode: LogMode::Quiet,
            tx: None,
            writer: None,
        }
    }

    pub fn open(mode: LogMode, sink: LogSink) -> io::Result<Self> {
        let mut out: Box<dyn Write + Send> = match &sink {
            LogSink::Null => {
                return Ok(RequestLog {
                    mode,
                    tx: None,
                    writer: None,
                })
            }
            LogSink::Stderr => Box::new(io::stderr()),
            LogSink::File(path) => Box::new(OpenOptions::new().create(true).append(true).open(path)?),
        };
        let mode_name = match mode {
            LogMode::Quiet => "quiet",
            LogMode::Debug => "debug",
        };
        writeln!(out, "# evofarm request log mode={mode_name}")?;
        out.flush()?;
        let (tx, rx) = mpsc::channel();
        let writer = std::thread::Builder::new()
            .name("evofarm-log".into())
            .spawn(move || write_loop(rx, BufWriter::new(out)))?;
        Ok(RequestLog {
            mode,
            tx: Some(tx),
            writer: Some(writer),
        })
    }

    pub fn mode(&self) -> LogMode {
        self.mode
    }

    pub fn is_debug(&self) -> bool {
        self.tx.is_some() && self.mode == LogMode::Debug
    }

    pub fn lifecycle(&self, line: impl FnOnce() -> String) {
        self.send(line);
    }

    /// Per-request detail; a no-op outside debug mode.
    pub fn request(&self, line: impl FnOnce() -> String) {
        if self.mode == LogMode::Debug {
            self.send(line);
        }
    }

    /// One timestamped line per item of `lines`; a no-op outside debug mode.
    pub fn request_lines<I: IntoIterator<Item = String>>(&self, lines: impl FnOnce() -> I) {
        if self.mode == LogMode::Debug {
            if let Some(tx) = &self.tx {
                for line in lines() {
                    let stamp = chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.6fZ");
                    let _ = tx.send(format!("{stamp} {line}"));
                }
            }
        }
    }

    fn send(&self, line: impl FnOnce() -> String) {
        if let Some(tx) = &self.tx {
            let stamp = chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.6fZ");
            let line = format!("{stamp} {}", line());
            let _ = tx.send(line);
        }
    }
}

fn write_loop(rx: Receiver<String>, mut out: BufWriter<Box<dyn Write + Send>>) {
    while let Ok(line) = rx.recv() {
        let _ = writeln!(out, "{line}");
        for line in rx.try_iter() {
            let _ = writeln!(out, "{line}");
        }
        let _ = out.flush();
    }
    let _ = out.flush();
}

impl Drop for RequestLog {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(writer) = self.writer.take() {
            let _ = writer.join();
        }
    }
}
