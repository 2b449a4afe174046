use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{
    Direction, EventRecord, GraphError, Gender, Kind, NodeAttr, NodeId, ObservationWindow,
    RawNodeAttr, Result,
};

pub const EVENT_HEADER: [&str; 5] = ["ego", "alter", "timestamp", "kind", "direction"];
pub const ATTR_HEADER: [&str; 5] = ["node", "age", "gender", "lat", "lon"];

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line in the source file (or position in an in-memory stream).
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Events of one (ego, alter) pair within one month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairBucket {
    pub calls_out: u32,
    pub calls_in: u32,
    pub sms_out: u32,
    pub sms_in: u32,
    pub first_ts: i64,
    pub last_ts: i64,
}

impl PairBucket {
    pub fn events(&self) -> u64 {
        u64::from(self.calls_out)
            + u64::from(self.calls_in)
            + u64::from(self.sms_out)
            + u64::from(self.sms_in)
    }

    pub fn calls(&self) -> u64 {
        u64::from(self.calls_out) + u64::from(self.calls_in)
    }

    fn add(&mut self, ev: &EventRecord) {
        if self.events() == 0 {
            self.first_ts = ev.timestamp;
            self.last_ts = ev.timestamp;
        } else {
            self.first_ts = self.first_ts.min(ev.timestamp);
            self.last_ts = self.last_ts.max(ev.timestamp);
        }
        match (ev.kind, ev.direction) {
            (Kind::Call, Direction::Outgoing) => self.calls_out += 1,
            (Kind::Call, Direction::Incoming) => self.calls_in += 1,
            (Kind::Sms, Direction::Outgoing) => self.sms_out += 1,
            (Kind::Sms, Direction::Incoming) => self.sms_in += 1,
        }
    }
}

/// Ingested events grouped per ordered (ego, alter) pair and month, plus the
/// attribute table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawStore {
    pub window: ObservationWindow,
    pub attrs: BTreeMap<NodeId, RawNodeAttr>,
    /// Keyed by (ego, alter, month).
    pub buckets: BTreeMap<(NodeId, NodeId, usize), PairBucket>,
    /// Event endpoints with no attribute row.
    pub unknown_nodes: BTreeSet<NodeId>,
}

impl RawStore {
    pub fn event_count(&self) -> u64 {
        self.buckets.values().map(PairBucket::events).sum()
    }

    /// Attribute-table nodes plus every event endpoint.
    pub fn node_count(&self) -> usize {
        let mut ids: BTreeSet<NodeId> = self.attrs.keys().copied().collect();
        for &(a, b, _) in self.buckets.keys() {
            ids.insert(a);
            ids.insert(b);
        }
        ids.len()
    }

    pub fn complete_attrs(&self) -> impl Iterator<Item = (NodeId, NodeAttr)> + '_ {
        self.attrs
            .iter()
            .filter_map(|(&id, a)| a.complete().map(|c| (id, c)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub store: RawStore,
    pub diagnostics: Vec<Diagnostic>,
}

/// Groups events into the store; invalid events become diagnostics.
pub fn ingest<E, A>(events: E, attrs: A, window: ObservationWindow) -> Ingested
where
    E: IntoIterator<Item = EventRecord>,
    A: IntoIterator<Item = (NodeId, RawNodeAttr)>,
{
    ingest_lines(
        events.into_iter().enumerate().map(|(i, e)| (i + 1, e)),
        attrs,
        window,
    )
}

pub(crate) fn ingest_lines<E, A>(events: E, attrs: A, window: ObservationWindow) -> Ingested
where
    E: IntoIterator<Item = (usize, EventRecord)>,
    A: IntoIterator<Item = (NodeId, RawNodeAttr)>,
{
    let mut store = RawStore {
        window,
        attrs: attrs.into_iter().collect(),
        ..RawStore::default()
    };
    let mut diagnostics = Vec::new();
    for (line, ev) in events {
        if ev.ego == ev.alter {
            diagnostics.push(Diagnostic {
                line,
                message: format!("ego and alter are both {}", ev.ego),
            });
            continue;
        }
        let Some(month) = window.month_of(ev.timestamp) else {
            diagnostics.push(Diagnostic {
                line,
                message: format!("timestamp {} outside the observation window", ev.timestamp),
            });
            continue;
        };
        for id in [ev.ego, ev.alter] {
            if !store.attrs.contains_key(&id) {
                store.unknown_nodes.insert(id);
            }
        }
        store
            .buckets
            .entry((ev.ego, ev.alter, month))
            .or_default()
            .add(&ev);
    }
    Ingested { store, diagnostics }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let found = rdr.headers()?.clone();
    let ok = found.len() == expected.len() && found.iter().zip(expected).all(|(f, e)| f == *e);
    if !ok {
        return Err(GraphError::HeaderMismatch {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_event(rec: &csv::StringRecord) -> std::result::Result<EventRecord, String> {
    if rec.len() != EVENT_HEADER.len() {
        return Err(format!("expected 5 fields, found {}", rec.len()));
    }
    let id = |i: usize| {
        rec[i]
            .parse::<NodeId>()
            .map_err(|_| format!("bad {} `{}`", EVENT_HEADER[i], &rec[i]))
    };
    let timestamp = rec[2]
        .parse::<i64>()
        .map_err(|_| format!("bad timestamp `{}`", &rec[2]))?;
    let kind = match &rec[3] {
        "call" => Kind::Call,
        "sms" => Kind::Sms,
        other => return Err(format!("bad kind `{other}`")),
    };
    let direction = match &rec[4] {
        "out" => Direction::Outgoing,
        "in" => Direction::Incoming,
        other => return Err(format!("bad direction `{other}`")),
    };
    Ok(EventRecord {
        ego: id(0)?,
        alter: id(1)?,
        timestamp,
        kind,
        direction,
    })
}

/// Reads an event file. Only a header mismatch aborts; bad rows are reported.
pub fn read_events_csv<R: Read>(input: R) -> Result<(Vec<(usize, EventRecord)>, Vec<Diagnostic>)> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &EVENT_HEADER)?;
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for row in rdr.records() {
        match row {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                match parse_event(&rec) {
                    Ok(ev) => out.push((line, ev)),
                    Err(message) => diags.push(Diagnostic { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                diags.push(Diagnostic {
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok((out, diags))
}

fn opt<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<Option<T>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<T>()
        .map(Some)
        .map_err(|_| format!("bad {what} `{s}`"))
}

fn parse_attr(rec: &csv::StringRecord) -> std::result::Result<(NodeId, RawNodeAttr), String> {
    if rec.len() != ATTR_HEADER.len() {
        return Err(format!("expected 5 fields, found {}", rec.len()));
    }
    let node = rec[0]
        .parse::<NodeId>()
        .map_err(|_| format!("bad node `{}`", &rec[0]))?;
    let gender = match &rec[2] {
        "" => None,
        "A" => Some(Gender::A),
        "B" => Some(Gender::B),
        other => return Err(format!("bad gender `{other}`")),
    };
    Ok((
        node,
        RawNodeAttr {
            age: opt(&rec[1], "age")?,
            gender,
            lat: opt(&rec[3], "lat")?,
            lon: opt(&rec[4], "lon")?,
        },
    ))
}

/// Reads a node attribute file. Empty fields are kept as missing values.
pub fn read_attrs_csv<R: Read>(input: R) -> Result<(Vec<(NodeId, RawNodeAttr)>, Vec<Diagnostic>)> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &ATTR_HEADER)?;
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for row in rdr.records() {
        match row {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                match parse_attr(&rec) {
                    Ok(a) => out.push(a),
                    Err(message) => diags.push(Diagnostic { line, message }),
                }
            }
            Err(e) => diags.push(Diagnostic {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            }),
        }
    }
    Ok((out, diags))
}

pub fn ingest_files(
    events: impl AsRef<Path>,
    attrs: impl AsRef<Path>,
    window: ObservationWindow,
) -> Result<Ingested> {
    let (attr_rows, mut diags) = read_attrs_csv(BufReader::new(File::open(attrs)?))?;
    let (event_rows, event_diags) = read_events_csv(BufReader::new(File::open(events)?))?;
    let mut ing = ingest_lines(event_rows, attr_rows, window);
    diags.extend(event_diags);
    diags.append(&mut ing.diagnostics);
    ing.diagnostics = diags;
    Ok(ing)
}

pub fn write_events_csv<W: Write>(out: W, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for ev in events {
        w.write_record([
            ev.ego.to_string(),
            ev.alter.to_string(),
            ev.timestamp.to_string(),
            match ev.kind {
                Kind::Call => "call",
                Kind::Sms => "sms",
            }
            .to_string(),
            match ev.direction {
                Direction::Outgoing => "out",
                Direction::Incoming => "in",
            }
            .to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_attrs_csv<W: Write>(out: W, attrs: &[(NodeId, NodeAttr)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ATTR_HEADER)?;
    for (id, a) in attrs {
        w.write_record([
            id.to_string(),
            a.age.to_string(),
            a.gender.as_str().to_string(),
            format!("{:.6}", a.lat),
            format!("{:.6}", a.lon),
        ])?;
    }
    w.flush()?;
    Ok(())
}
