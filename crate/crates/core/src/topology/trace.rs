//! Plain-text contact traces: `<time_s> <up|down> <a> <b>` per line, `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{AdjacencySnapshot, NodeId};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContactKind {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContactEvent {
    pub time: SimTime,
    pub kind: ContactKind,
    pub a: NodeId,
    pub b: NodeId,
}

impl ContactEvent {
    pub fn pair(&self) -> (NodeId, NodeId) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

impl fmt::Display for ContactEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ContactKind::Up => "up",
            ContactKind::Down => "down",
        };
        write!(f, "{} {} {} {}", self.time, kind, self.a, self.b)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_trace(text: &str) -> Result<Vec<ContactEvent>, TraceError> {
    let mut events: Vec<(usize, ContactEvent)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        let perr = |message: String| TraceError::Parse { line, message };
        if fields.len() != 4 {
            return Err(perr(format!("expected 4 fields, found {}", fields.len())));
        }
        let secs: f64 = fields[0]
            .parse()
            .map_err(|_| perr(format!("bad time `{}`", fields[0])))?;
        if !secs.is_finite() || secs < 0.0 {
            return Err(perr(format!("time must be non-negative, got `{}`", fields[0])));
        }
        let kind = match fields[1] {
            "up" => ContactKind::Up,
            "down" => ContactKind::Down,
            other => return Err(perr(format!("expected `up` or `down`, got `{other}`"))),
        };
        let a: NodeId = fields[2].parse().map_err(|_| perr(format!("bad node id `{}`", fields[2])))?;
        let b: NodeId = fields[3].parse().map_err(|_| perr(format!("bad node id `{}`", fields[3])))?;
        if a == b {
            return Err(TraceError::Validation { line, message: format!("self-loop on node {a}") });
        }
        events.push((line, ContactEvent { time: SimTime::from_secs_f64(secs), kind, a, b }));
    }
    events.sort_by_key(|(_, e)| e.time);
    let mut up: BTreeMap<(NodeId, NodeId), bool> = BTreeMap::new();
    for (line, e) in &events {
        let state = up.entry(e.pair()).or_insert(false);
        match (e.kind, *state) {
            (ContactKind::Up, false) => *state = true,
            (ContactKind::Down, true) => *state = false,
            (ContactKind::Up, true) => {
                return Err(TraceError::Validation {
                    line: *line,
                    message: format!("link {}-{} is already up", e.a, e.b),
                })
            }
            (ContactKind::Down, false) => {
                return Err(TraceError::Validation {
                    line: *line,
                    message: format!("link {}-{} is not up", e.a, e.b),
                })
            }
        }
    }
    Ok(events.into_iter().map(|(_, e)| e).collect())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<ContactEvent>, TraceError> {
    parse_trace(&std::fs::read_to_string(path)?)
}

pub fn write_trace<W: Write>(mut w: W, header: &str, events: &[ContactEvent]) -> io::Result<()> {
    for l in header.lines() {
        writeln!(w, "# {l}")?;
    }
    for e in events {
        writeln!(w, "{e}")?;
    }
    Ok(())
}

/// Converts a snapshot sequence into link up/down events.
pub fn trace_from_snapshots<'a>(snapshots: impl IntoIterator<Item = &'a AdjacencySnapshot>) -> Vec<ContactEvent> {
    let mut out = Vec::new();
    let mut prev: Option<&AdjacencySnapshot> = None;
    for s in snapshots {
        let empty;
        let p = match prev {
            Some(p) => p,
            None => {
                empty = AdjacencySnapshot::empty(s.time, s.nodes);
                &empty
            }
        };
        let (ups, downs) = s.diff(p);
        out.extend(downs.into_iter().map(|(a, b)| ContactEvent { time: s.time, kind: ContactKind::Down, a, b }));
        out.extend(ups.into_iter().map(|(a, b)| ContactEvent { time: s.time, kind: ContactKind::Up, a, b }));
        prev = Some(s);
    }
    out
}
