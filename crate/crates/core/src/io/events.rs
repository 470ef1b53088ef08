use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, fmt_f64, open, Provenance, PROVENANCE_FILE};
use crate::error::{Error, Result};
use crate::events::{jitter_ties, EventSequence, NetworkEvent, NetworkEventLog, NodeId, PairIndex};
use crate::models::LatentPath;

/// How to complete the information an events CSV does not carry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReadOptions {
    /// Observation horizon `T`. When absent it is taken from a
    /// `provenance.json` next to the events file.
    pub horizon: Option<f64>,
    /// Node count of a network file. Falls back to the provenance file and
    /// then to the largest node id present.
    pub node_count: Option<usize>,
    /// Spread tied timestamps by `k·1e-9` instead of rejecting them.
    pub jitter_ties: bool,
}

/// Contents of an events CSV: a single stream (`time` column only) or a
/// network log (`time,sender,receiver`).
#[derive(Debug, Clone, PartialEq)]
pub enum EventTable {
    Univariate(EventSequence),
    Network(NetworkEventLog),
}

impl EventTable {
    pub fn horizon(&self) -> f64 {
        match self {
            EventTable::Univariate(s) => s.horizon(),
            EventTable::Network(l) => l.horizon(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EventTable::Univariate(s) => s.len(),
            EventTable::Network(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_sequence(self) -> Result<EventSequence> {
        match self {
            EventTable::Univariate(s) => Ok(s),
            EventTable::Network(_) => Err(Error::validation(
                "expected a single event stream (a `time` column only), got a network log",
            )),
        }
    }

    pub fn into_network(self) -> Result<NetworkEventLog> {
        match self {
            EventTable::Network(l) => Ok(l),
            EventTable::Univariate(_) => Err(Error::validation(
                "expected a network log with `time,sender,receiver` columns",
            )),
        }
    }
}

pub fn read_events(path: &Path, opts: &ReadOptions) -> Result<EventTable> {
    let file = open(path)?;
    let provenance = match (opts.horizon, opts.node_count) {
        (Some(_), Some(_)) => None,
        _ => sibling_provenance(path)?,
    };
    let horizon = opts
        .horizon
        .or(provenance.as_ref().map(|p| p.horizon))
        .ok_or_else(|| {
            Error::Usage(format!(
                "{}: horizon unknown; pass it explicitly or place a {PROVENANCE_FILE} next to the file",
                path.display()
            ))
        })?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let network = match header.as_slice() {
        [t] if t == "time" => false,
        [t, s, r] if t == "time" && s == "sender" && r == "receiver" => true,
        _ => {
            return Err(parse_error(
                path,
                1,
                format!("header must be `time` or `time,sender,receiver`, got `{}`", header.join(",")),
            ))
        }
    };

    let mut times = Vec::new();
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let time: f64 = parse_field(path, line, &record[0], "time")?;
        if network {
            events.push(NetworkEvent {
                time,
                sender: parse_field(path, line, &record[1], "sender")?,
                receiver: parse_field(path, line, &record[2], "receiver")?,
            });
        } else {
            times.push(time);
        }
    }

    if !network {
        if opts.jitter_ties {
            jitter_ties(&mut times);
        }
        return EventSequence::new(times, horizon)
            .map(EventTable::Univariate)
            .map_err(|e| in_file(path, e));
    }
    if opts.jitter_ties {
        events = jitter_pairs(events);
    }
    let node_count = opts
        .node_count
        .or(provenance.and_then(|p| p.node_count))
        .unwrap_or_else(|| {
            events
                .iter()
                .map(|e| e.sender.max(e.receiver))
                .max()
                .unwrap_or(0)
        });
    NetworkEventLog::new(node_count, events, horizon)
        .map(EventTable::Network)
        .map_err(|e| in_file(path, e))
}

fn jitter_pairs(events: Vec<NetworkEvent>) -> Vec<NetworkEvent> {
    let mut by_pair: BTreeMap<(NodeId, NodeId), Vec<f64>> = BTreeMap::new();
    for e in events {
        by_pair.entry((e.sender, e.receiver)).or_default().push(e.time);
    }
    let mut out = Vec::new();
    for ((sender, receiver), mut times) in by_pair {
        jitter_ties(&mut times);
        out.extend(times.into_iter().map(|time| NetworkEvent {
            time,
            sender,
            receiver,
        }));
    }
    out
}

fn sibling_provenance(path: &Path) -> Result<Option<Provenance>> {
    let candidate = path.with_file_name(PROVENANCE_FILE);
    if !candidate.is_file() {
        return Ok(None);
    }
    super::read_json(&candidate).map(Some)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, raw: &str, name: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| parse_error(path, line, format!("cannot parse {name} from {raw:?}")))
}

fn parse_error(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    }
}

pub fn write_sequence(path: &Path, seq: &EventSequence) -> Result<()> {
    write_lines(path, "time", seq.times().iter().map(|t| fmt_f64(*t)))
}

pub fn write_network(path: &Path, log: &NetworkEventLog) -> Result<()> {
    write_lines(
        path,
        "time,sender,receiver",
        log.events()
            .iter()
            .map(|e| format!("{},{},{}", fmt_f64(e.time), e.sender, e.receiver)),
    )
}

pub fn write_table(path: &Path, table: &EventTable) -> Result<()> {
    match table {
        EventTable::Univariate(s) => write_sequence(path, s),
        EventTable::Network(l) => write_network(path, l),
    }
}

/// One row per segment: `start,end,state`.
pub fn write_path(path: &Path, latent: &LatentPath) -> Result<()> {
    write_lines(path, "start,end,state", segment_rows(latent))
}

/// Segments of every pair's path: `sender,receiver,start,end,state`.
pub fn write_pair_paths<'a, I>(path: &Path, paths: I) -> Result<()>
where
    I: IntoIterator<Item = (PairIndex, &'a LatentPath)>,
{
    let rows = paths.into_iter().flat_map(|(pair, latent)| {
        segment_rows(latent)
            .map(move |row| format!("{},{},{row}", pair.sender(), pair.receiver()))
            .collect::<Vec<_>>()
    });
    write_lines(path, "sender,receiver,start,end,state", rows)
}

fn segment_rows(latent: &LatentPath) -> impl Iterator<Item = String> + '_ {
    latent
        .segments()
        .map(|(a, b, s)| format!("{},{},{s}", fmt_f64(a), fmt_f64(b)))
}

pub fn read_path(path: &Path) -> Result<LatentPath> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut transitions = Vec::new();
    let mut states = Vec::new();
    let mut horizon = 0.0;
    for record in reader.deserialize::<Segment>() {
        let seg = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        if !states.is_empty() {
            transitions.push(horizon);
        }
        states.push(seg.state);
        horizon = seg.end;
    }
    LatentPath::new(transitions, states, horizon).map_err(|e| in_file(path, e))
}

#[derive(Deserialize, Serialize)]
struct Segment {
    #[allow(dead_code)]
    start: f64,
    end: f64,
    state: u8,
}

/// Writes `header` and `rows` as LF-terminated lines.
pub fn write_lines<I, S>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = BufWriter::new(create(path)?);
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for row in rows {
        writeln!(out, "{}", row.as_ref()).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}
