//! Trace files on disk. Episodes are written to `<name>.jsonl.partial` one
//! line at a time and renamed into place once the outcome line is written,
//! so a crashed run leaves only `.partial` files behind.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use autocab_core::episode::{EpisodeTrace, TraceLine, TraceParseError};
use thiserror::Error;

pub const TRACE_DIR_ENV: &str = "AUTOCAB_TRACE_DIR";
const PARTIAL_EXT: &str = "partial";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: TraceParseError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Seconds since the Unix epoch, for the informational header field.
pub fn wall_clock_now() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

#[derive(Clone, Debug)]
pub struct TraceStore {
    root: PathBuf,
}

impl TraceStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        TraceStore { root: root.into() }
    }

    /// `$AUTOCAB_TRACE_DIR` if set, else `fallback`.
    pub fn from_env(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(TRACE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => TraceStore::new(dir),
            _ => TraceStore::new(fallback),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative path of a suite episode trace.
    pub fn episode_name(label: &str, template_id: &str, seed: u64) -> PathBuf {
        Path::new(label).join(format!("{template_id}__s{seed}.jsonl"))
    }

    pub fn writer(&self, name: &Path) -> Result<TraceWriter, StoreError> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let partial = partial_path(&path);
        let file = File::create(&partial).map_err(io_err(&partial))?;
        Ok(TraceWriter { out: BufWriter::new(file), partial, path, wall_clock: None })
    }

    pub fn save(&self, name: &Path, trace: &EpisodeTrace) -> Result<PathBuf, StoreError> {
        let mut w = self.writer(name)?;
        for line in trace.lines() {
            w.write_line(&line)?;
        }
        w.commit()
    }

    /// All committed trace files, sorted by path.
    pub fn list(&self) -> Result<Vec<PathBuf>, StoreError> {
        let mut out = Vec::new();
        walk(&self.root, &mut |p| {
            if p.extension().is_some_and(|e| e == "jsonl") {
                out.push(p.to_path_buf());
            }
        })?;
        out.sort();
        Ok(out)
    }

    pub fn load_all(&self) -> Result<Vec<(PathBuf, EpisodeTrace)>, StoreError> {
        self.list()?.into_iter().map(|p| load_trace(&p).map(|t| (p, t))).collect()
    }

    /// Deletes leftover `.partial` files; returns how many were removed.
    pub fn cleanup_partials(&self) -> Result<usize, StoreError> {
        let mut stale = Vec::new();
        walk(&self.root, &mut |p| {
            if p.extension().is_some_and(|e| e == PARTIAL_EXT) {
                stale.push(p.to_path_buf());
            }
        })?;
        for p in &stale {
            fs::remove_file(p).map_err(io_err(p))?;
        }
        Ok(stale.len())
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(PARTIAL_EXT);
    PathBuf::from(s)
}

fn walk(dir: &Path, f: &mut dyn FnMut(&Path)) -> Result<(), StoreError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(StoreError::Io { path: dir.to_path_buf(), source: e }),
    };
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if entry.file_type().map_err(io_err(&path))?.is_dir() {
            walk(&path, f)?;
        } else {
            f(&path);
        }
    }
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<EpisodeTrace, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    EpisodeTrace::from_jsonl(&text).map_err(|source| StoreError::Parse { path: path.to_path_buf(), source })
}

/// Line-at-a-time trace writer; see the module docs.
pub struct TraceWriter {
    out: BufWriter<File>,
    partial: PathBuf,
    path: PathBuf,
    wall_clock: Option<String>,
}

impl TraceWriter {
    /// Stamps the header line with `stamp` when it is written.
    pub fn with_wall_clock(mut self, stamp: String) -> Self {
        self.wall_clock = Some(stamp);
        self
    }

    pub fn write_line(&mut self, line: &TraceLine) -> Result<(), StoreError> {
        let text = match (line, &self.wall_clock) {
            (TraceLine::Header(h), Some(stamp)) => {
                let mut h = h.clone();
                h.wall_clock = Some(stamp.clone());
                serde_json::to_string(&TraceLine::Header(h))
            }
            _ => serde_json::to_string(line),
        }
        .map_err(|e| StoreError::Io { path: self.partial.clone(), source: e.into() })?;
        writeln!(self.out, "{text}").and_then(|_| self.out.flush()).map_err(io_err(&self.partial))
    }

    pub fn partial_path(&self) -> &Path {
        &self.partial
    }

    /// Drops the partial file.
    pub fn discard(self) {
        let TraceWriter { out, partial, .. } = self;
        drop(out);
        let _ = fs::remove_file(partial);
    }

    /// Renames the partial file into place.
    pub fn commit(mut self) -> Result<PathBuf, StoreError> {
        self.out.flush().map_err(io_err(&self.partial))?;
        fs::rename(&self.partial, &self.path).map_err(io_err(&self.path))?;
        Ok(self.path)
    }
}
