//! Event logs: events, traces, JSON Lines (de)serialization and syntactic
//! correctness against a net.
//!
//! One event per line:
//!
//! ```json
//! {"trace":"ob1","seq":6,"ts":"09:30:06","activity":"trade2","objects":[{"color":"OB","values":["b1",1,22.0,4]}]}
//! ```
//!
//! Lines starting with `#` are comments and are kept as log metadata. Lines of
//! different traces may interleave; traces are ordered by first appearance.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::Cpn;
use crate::value::Value;

/// Post-activity state of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub color: String,
    pub values: Vec<Value>,
}

impl ObjectState {
    pub fn new(color: impl Into<String>, values: Vec<Value>) -> Self {
        ObjectState {
            color: color.into(),
            values,
        }
    }

    pub fn id(&self) -> &str {
        self.values.first().and_then(Value::as_str).unwrap_or("")
    }
}

impl fmt::Display for ObjectState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// An executed activity and the objects it involved. Objects are kept sorted
/// by identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub seq: u64,
    pub timestamp: Option<String>,
    pub activity: String,
    pub objects: Vec<ObjectState>,
}

impl EventRecord {
    pub fn new(seq: u64, activity: impl Into<String>, mut objects: Vec<ObjectState>) -> Self {
        objects.sort_by(|a, b| a.id().cmp(b.id()));
        EventRecord {
            seq,
            timestamp: None,
            activity: activity.into(),
            objects,
        }
    }

    pub fn with_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    pub events: Vec<EventRecord>,
}

impl Trace {
    pub fn new(id: impl Into<String>, events: Vec<EventRecord>) -> Self {
        Trace {
            id: id.into(),
            events,
        }
    }

    /// Identifier of every object in the trace mapped to its color and the
    /// state at its first occurrence, in order of first occurrence.
    pub fn distinct_objects(&self) -> Result<Vec<(String, ObjectState)>, LogError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut out: Vec<(String, ObjectState)> = Vec::new();
        for e in &self.events {
            for o in &e.objects {
                match index.get(o.id()) {
                    Some(&i) => {
                        let first = &out[i].1;
                        if first.color != o.color || first.values.len() != o.values.len() {
                            return Err(LogError::ConflictingColor {
                                trace: self.id.clone(),
                                object: o.id().to_owned(),
                                first: first.color.clone(),
                                second: o.color.clone(),
                            });
                        }
                    }
                    None => {
                        index.insert(o.id(), out.len());
                        out.push((o.id().to_owned(), o.clone()));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn last_timestamp(&self) -> Option<&str> {
        self.events.last().and_then(|e| e.timestamp.as_deref())
    }
}

/// A multiset of traces plus free-form metadata comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub comments: Vec<String>,
    pub traces: Vec<Trace>,
}

impl EventLog {
    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn trace(&self, id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("trace {trace}: object {object} appears with colors {first} and {second}")]
    ConflictingColor {
        trace: String,
        object: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    trace: String,
    seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts: Option<String>,
    activity: String,
    objects: Vec<ObjectLine>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectLine {
    color: String,
    values: Vec<Value>,
}

/// Parses a JSON Lines log.
pub fn parse_log(reader: impl BufRead) -> Result<EventLog, LogError> {
    let mut log = EventLog::default();
    let mut trace_ix: HashMap<String, usize> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| LogError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            log.comments.push(comment.trim().to_owned());
            continue;
        }
        let ev: EventLine = serde_json::from_str(trimmed).map_err(|e| {
            if e.is_data() {
                LogError::Schema {
                    line: line_no,
                    message: e.to_string(),
                }
            } else {
                LogError::Parse {
                    line: line_no,
                    message: e.to_string(),
                }
            }
        })?;
        let schema = |message: String| LogError::Schema {
            line: line_no,
            message,
        };
        if ev.objects.is_empty() {
            return Err(schema("event has no objects".into()));
        }
        let mut objects = Vec::with_capacity(ev.objects.len());
        for o in ev.objects {
            if o.values.first().and_then(Value::as_str).is_none() {
                return Err(schema(format!(
                    "object of color {} lacks a string identifier",
                    o.color
                )));
            }
            objects.push(ObjectState::new(o.color, o.values));
        }
        let record = EventRecord {
            timestamp: ev.ts,
            ..EventRecord::new(ev.seq, ev.activity, objects)
        };
        if record.objects.windows(2).any(|w| w[0].id() == w[1].id()) {
            return Err(schema(
                "two objects of one event share an identifier".into(),
            ));
        }
        let ix = *trace_ix.entry(ev.trace.clone()).or_insert_with(|| {
            log.traces.push(Trace::new(ev.trace.clone(), Vec::new()));
            log.traces.len() - 1
        });
        let trace = &mut log.traces[ix];
        if let Some(prev) = trace.events.last() {
            if record.seq <= prev.seq {
                return Err(schema(format!(
                    "trace {}: seq {} does not follow {}",
                    trace.id, record.seq, prev.seq
                )));
            }
        }
        trace.events.push(record);
    }
    Ok(log)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<EventLog, LogError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_log(BufReader::new(file))
}

/// Canonical serialization: comments first, then traces in order, events in
/// sequence order, objects sorted by identifier.
pub fn write_log_to(log: &EventLog, mut out: impl Write) -> std::io::Result<()> {
    for c in &log.comments {
        writeln!(out, "# {c}")?;
    }
    for t in &log.traces {
        for e in &t.events {
            let mut objects: Vec<&ObjectState> = e.objects.iter().collect();
            objects.sort_by(|a, b| a.id().cmp(b.id()));
            let line = EventLine {
                trace: t.id.clone(),
                seq: e.seq,
                ts: e.timestamp.clone(),
                activity: e.activity.clone(),
                objects: objects
                    .into_iter()
                    .map(|o| ObjectLine {
                        color: o.color.clone(),
                        values: o.values.clone(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_log(log: &EventLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let path = path.as_ref();
    let io = |source| LogError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_log_to(log, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn log_to_string(log: &EventLog) -> String {
    let mut buf = Vec::new();
    write_log_to(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogViolationKind {
    UnknownActivity,
    UnknownColor,
    MissingObject,
    ExtraObject,
    ValueDomain,
    ConflictingColor,
}

/// One syntactically incorrect event (or trace, for color conflicts).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogViolation {
    pub trace: String,
    pub seq: Option<u64>,
    pub kind: LogViolationKind,
    pub message: String,
}

impl fmt::Display for LogViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.seq {
            Some(s) => write!(f, "trace {} event {}: {}", self.trace, s, self.message),
            None => write!(f, "trace {}: {}", self.trace, self.message),
        }
    }
}

/// Syntactic correctness of one trace: every event names a transition, and
/// its objects map one-to-one onto the transition's input places by color.
pub fn check_trace(trace: &Trace, cpn: &Cpn) -> Vec<LogViolation> {
    let mut out = Vec::new();
    let mut push = |seq: Option<u64>, kind, message: String| {
        out.push(LogViolation {
            trace: trace.id.clone(),
            seq,
            kind,
            message,
        })
    };
    if let Err(e) = trace.distinct_objects() {
        push(None, LogViolationKind::ConflictingColor, e.to_string());
    }
    for e in &trace.events {
        let seq = Some(e.seq);
        let Some(t) = cpn.transition_by_activity(&e.activity) else {
            push(
                seq,
                LogViolationKind::UnknownActivity,
                format!("no transition labeled {}", e.activity),
            );
            continue;
        };
        let mut colors = Vec::with_capacity(e.objects.len());
        for o in &e.objects {
            match cpn.color_by_name(&o.color) {
                Some(c) => {
                    if let Err(err) = cpn.make_token(c, &o.values) {
                        push(
                            seq,
                            LogViolationKind::ValueDomain,
                            format!("object {}: {err}", o.id()),
                        );
                    }
                    colors.push(Some(c));
                }
                None => {
                    push(
                        seq,
                        LogViolationKind::UnknownColor,
                        format!("object {}: unknown color {}", o.id(), o.color),
                    );
                    colors.push(None);
                }
            }
        }
        let inputs: Vec<usize> = cpn
            .input_arcs(t)
            .iter()
            .map(|&a| cpn.arc_place(a))
            .collect();
        let mut per_color: BTreeMap<usize, usize> = BTreeMap::new();
        for c in colors.iter().flatten() {
            *per_color.entry(*c).or_default() += 1;
        }
        for &p in &inputs {
            let c = cpn.places[p].color;
            let places_of_color = inputs.iter().filter(|&&q| cpn.places[q].color == c).count();
            match per_color.get(&c).copied().unwrap_or(0) {
                0 => push(
                    seq,
                    LogViolationKind::MissingObject,
                    format!("no object for input place {}", cpn.places[p].id),
                ),
                1 if places_of_color == 1 => {}
                n => push(
                    seq,
                    LogViolationKind::ExtraObject,
                    format!(
                        "{n} objects of color {} for {places_of_color} input place(s)",
                        cpn.colors[c].name
                    ),
                ),
            }
        }
        for (o, c) in e.objects.iter().zip(&colors) {
            if let Some(c) = c {
                if !inputs.iter().any(|&p| cpn.places[p].color == *c) {
                    push(
                        seq,
                        LogViolationKind::ExtraObject,
                        format!(
                            "object {} has no input place of color {} on {}",
                            o.id(),
                            o.color,
                            e.activity
                        ),
                    );
                }
            }
        }
    }
    out.dedup();
    out
}

/// Syntactic correctness of every trace in `log`.
pub fn check_syntactic_correctness(log: &EventLog, cpn: &Cpn) -> Vec<LogViolation> {
    log.traces
        .iter()
        .flat_map(|t| check_trace(t, cpn))
        .collect()
}
