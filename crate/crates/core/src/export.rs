//! On-disk formats: learning-curve CSV, episode traces (JSON and a text
//! sequence chart) and versioned Q-table snapshots.
//!
//! All writers are pure functions of their inputs, so re-exporting the same
//! results yields byte-identical files.

use crate::error::{Error, Result};
use crate::learner::{QTables, StateKey};
use crate::trainer::{EpisodeTrace, SessionResult};
use crate::types::ChannelEvent;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

pub const TRACE_FORMAT: &str = "macsim-trace";
pub const TRACE_VERSION: u32 = 1;
pub const SNAPSHOT_FORMAT: &str = "macsim-qtables";
pub const SNAPSHOT_VERSION: u32 = 1;

/// `# config_hash=<hash>` followed by `episode,return,epsilon,session_id`.
pub fn write_learning_curve<W: Write>(
    mut w: W,
    config_hash: &str,
    sessions: &[SessionResult],
) -> Result<()> {
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "episode,return,epsilon,session_id")?;
    for s in sessions {
        for p in &s.learning_curve {
            writeln!(w, "{},{},{},{}", p.episode, p.ret, p.epsilon, s.session)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format: String,
    pub version: u32,
    pub trace: EpisodeTrace,
}

impl TraceFile {
    pub fn new(trace: EpisodeTrace) -> Self {
        TraceFile {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            trace,
        }
    }
}

pub fn export_trace(trace: &EpisodeTrace) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TraceFile::new(
        trace.clone(),
    ))?)
}

pub fn parse_trace(text: &str) -> Result<EpisodeTrace> {
    let f: TraceFile = serde_json::from_str(text)?;
    check_trace_header(&f)?;
    Ok(f.trace)
}

fn check_trace_header(f: &TraceFile) -> Result<()> {
    if f.format != TRACE_FORMAT {
        return Err(Error::Snapshot(format!(
            "not a trace file: format `{}`",
            f.format
        )));
    }
    if f.version != TRACE_VERSION {
        return Err(Error::FormatVersion {
            kind: "trace",
            expected: TRACE_VERSION,
            found: f.version,
        });
    }
    Ok(())
}

/// One compact [`TraceFile`] per line.
pub fn write_traces_jsonl<'a, W: Write>(
    mut w: W,
    traces: impl IntoIterator<Item = &'a EpisodeTrace>,
) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut w, &TraceFile::new(t.clone()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_traces_jsonl<R: BufRead>(r: R) -> Result<Vec<EpisodeTrace>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: TraceFile = serde_json::from_str(&line)?;
        check_trace_header(&f)?;
        out.push(f.trace);
    }
    Ok(out)
}

/// Plain-text message sequence chart: one row per slot, one column per UE
/// showing `o a/n -> m`, then the channel outcome of the slot.
pub fn render_msc(trace: &EpisodeTrace) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>4}", "t");
    for u in 0..trace.num_ues {
        let _ = write!(s, " | {:<24}", format!("UE{u}: o a/n -> m"));
    }
    let _ = writeln!(s, " | channel");
    for step in &trace.steps {
        let _ = write!(s, "{:>4}", step.t);
        for ue in &step.ues {
            let cell = format!("{} {}/{} -> {}", ue.o.0, ue.a, ue.n, ue.m);
            let _ = write!(s, " | {cell:<24}");
        }
        let channel = match step.bs_obs.event(trace.num_ues) {
            ChannelEvent::Idle => "idle".to_string(),
            ChannelEvent::Received(u) => format!("rx UE{u}"),
            ChannelEvent::Collision => "collision".to_string(),
        };
        let _ = writeln!(s, " | {channel}");
    }
    let _ = writeln!(s, "R = {}", trace.total_return);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotFile {
    format: String,
    version: u32,
    config_hash: String,
    memory_len: usize,
    default_value: f64,
    /// `(state key as 32 hex digits, [nothing, transmit, delete])`
    q_p: Vec<(String, [f64; 3])>,
    /// `(state key, [null, sr])`
    q_s: Vec<(String, [f64; 2])>,
}

pub fn snapshot_qtables<W: Write>(mut w: W, q: &QTables, config_hash: &str) -> Result<()> {
    let file = SnapshotFile {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        config_hash: config_hash.to_string(),
        memory_len: q.memory_len,
        default_value: q.default_value,
        q_p: q
            .access_entries()
            .into_iter()
            .map(|(k, v)| (format!("{:032x}", k.0), v))
            .collect(),
        q_s: q
            .signaling_entries()
            .into_iter()
            .map(|(k, v)| (format!("{:032x}", k.0), v))
            .collect(),
    };
    serde_json::to_writer(&mut w, &file)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LoadedTables {
    pub tables: QTables,
    pub config_hash: String,
}

/// Reads a snapshot; when `expected_memory_len` is given the file must match.
pub fn load_qtables<R: std::io::Read>(
    r: R,
    expected_memory_len: Option<usize>,
) -> Result<LoadedTables> {
    let f: SnapshotFile = serde_json::from_reader(r)?;
    if f.format != SNAPSHOT_FORMAT {
        return Err(Error::Snapshot(format!(
            "not a Q-table snapshot: format `{}`",
            f.format
        )));
    }
    if f.version != SNAPSHOT_VERSION {
        return Err(Error::FormatVersion {
            kind: "snapshot",
            expected: SNAPSHOT_VERSION,
            found: f.version,
        });
    }
    if let Some(expected) = expected_memory_len {
        if expected != f.memory_len {
            return Err(Error::MemoryLenMismatch {
                expected,
                found: f.memory_len,
            });
        }
    }
    let key = |s: &str| {
        let k = u128::from_str_radix(s, 16)
            .map(StateKey)
            .map_err(|_| Error::Snapshot(format!("bad state key `{s}`")))?;
        if k.decode(f.memory_len).is_none() {
            return Err(Error::Snapshot(format!(
                "state key `{s}` is not valid for memory_len {}",
                f.memory_len
            )));
        }
        Ok(k)
    };
    let mut q = QTables::with_default(f.memory_len, f.default_value);
    for (k, v) in &f.q_p {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Snapshot(format!("non-finite value at `{k}`")));
        }
        q.set_access_values(key(k)?, *v);
    }
    for (k, v) in &f.q_s {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Snapshot(format!("non-finite value at `{k}`")));
        }
        q.set_signaling_values(key(k)?, *v);
    }
    Ok(LoadedTables {
        tables: q,
        config_hash: f.config_hash,
    })
}
