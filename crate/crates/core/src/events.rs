//! Event streams on an observation window `(0, T]` and directed network
//! event logs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing added to the k-th member of a group of tied timestamps.
pub const TIE_JITTER: f64 = 1e-9;

/// Strictly increasing event times on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct EventSequence {
    times: Vec<f64>,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    times: Vec<f64>,
    horizon: f64,
}

impl TryFrom<RawSequence> for EventSequence {
    type Error = Error;
    fn try_from(raw: RawSequence) -> Result<Self> {
        EventSequence::new(raw.times, raw.horizon)
    }
}

impl From<EventSequence> for RawSequence {
    fn from(seq: EventSequence) -> Self {
        RawSequence {
            times: seq.times,
            horizon: seq.horizon,
        }
    }
}

impl EventSequence {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::validation(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        for (m, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::validation(format!("event {m} has non-finite time {t}")));
            }
            if t <= 0.0 {
                return Err(Error::validation(format!(
                    "event {m} at time {t}: the window (0, T] excludes times <= 0"
                )));
            }
            if t > horizon {
                return Err(Error::validation(format!(
                    "event {m} at time {t} lies beyond the horizon {horizon}"
                )));
            }
            if m > 0 && t <= times[m - 1] {
                return Err(Error::validation(format!(
                    "event times must be strictly increasing: times[{}] = {} >= times[{m}] = {t}",
                    m - 1,
                    times[m - 1]
                )));
            }
        }
        Ok(EventSequence { times, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Same event times observed on a different window.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.times.clone(), horizon)
    }

    /// N(t): number of events in `(0, t]`.
    pub fn counting_process(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.times.partition_point(|&s| s <= t))
    }

    /// Number of events strictly before `t`. No range check.
    pub(crate) fn count_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            Err(Error::Range {
                t,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }
}

/// Sorts `times` and spreads each group of equal timestamps by adding
/// `k * TIE_JITTER` to its k-th member.
pub fn jitter_ties(times: &mut [f64]) {
    times.sort_by(f64::total_cmp);
    let mut k = 0u32;
    let mut anchor = f64::NAN;
    for t in times.iter_mut() {
        if *t == anchor {
            k += 1;
            *t = anchor + f64::from(k) * TIE_JITTER;
        } else {
            anchor = *t;
            k = 0;
        }
    }
}

/// A node of the network, numbered from 1.
pub type NodeId = usize;

/// An ordered (sender, receiver) pair; self-loops are not representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(NodeId, NodeId)", into = "(NodeId, NodeId)")]
pub struct PairIndex {
    sender: NodeId,
    receiver: NodeId,
}

impl PairIndex {
    pub fn new(sender: NodeId, receiver: NodeId) -> Result<Self> {
        if sender == receiver {
            return Err(Error::validation(format!(
                "pair ({sender}, {receiver}) is a self-loop"
            )));
        }
        if sender == 0 || receiver == 0 {
            return Err(Error::validation("node ids start at 1"));
        }
        Ok(PairIndex { sender, receiver })
    }

    pub fn sender(&self) -> NodeId {
        self.sender
    }

    pub fn receiver(&self) -> NodeId {
        self.receiver
    }

    /// All N(N-1) ordered pairs, sender-major.
    pub fn all(node_count: usize) -> impl Iterator<Item = PairIndex> {
        (1..=node_count).flat_map(move |i| {
            (1..=node_count)
                .filter(move |&j| j != i)
                .map(move |j| PairIndex { sender: i, receiver: j })
        })
    }
}

impl TryFrom<(NodeId, NodeId)> for PairIndex {
    type Error = Error;
    fn try_from((s, r): (NodeId, NodeId)) -> Result<Self> {
        PairIndex::new(s, r)
    }
}

impl From<PairIndex> for (NodeId, NodeId) {
    fn from(p: PairIndex) -> Self {
        (p.sender, p.receiver)
    }
}

impl fmt::Display for PairIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.sender, self.receiver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkEvent {
    pub time: f64,
    pub sender: NodeId,
    pub receiver: NodeId,
}

/// Timestamped directed interactions among `node_count` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEventLog {
    node_count: usize,
    events: Vec<NetworkEvent>,
    horizon: f64,
}

impl NetworkEventLog {
    /// Validates and time-sorts the events. Ties between different pairs are
    /// allowed; ties within a pair are not.
    pub fn new(node_count: usize, mut events: Vec<NetworkEvent>, horizon: f64) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::validation(format!(
                "a network needs at least 2 nodes, got {node_count}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::validation(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        for (k, e) in events.iter().enumerate() {
            if e.sender == e.receiver {
                return Err(Error::validation(format!(
                    "event {k} at time {} is a self-loop on node {}",
                    e.time, e.sender
                )));
            }
            for node in [e.sender, e.receiver] {
                if node == 0 || node > node_count {
                    return Err(Error::validation(format!(
                        "event {k}: node {node} outside 1..={node_count}"
                    )));
                }
            }
            if !(e.time.is_finite() && e.time > 0.0 && e.time <= horizon) {
                return Err(Error::validation(format!(
                    "event {k}: time {} outside (0, {horizon}]",
                    e.time
                )));
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let log = NetworkEventLog {
            node_count,
            events,
            horizon,
        };
        // Per-pair strict increase.
        let mut last = vec![0.0f64; node_count * node_count];
        for e in &log.events {
            let slot = &mut last[log.slot(e.sender, e.receiver)];
            if e.time <= *slot {
                return Err(Error::validation(format!(
                    "pair ({}, {}) has tied events at time {}",
                    e.sender, e.receiver, e.time
                )));
            }
            *slot = e.time;
        }
        Ok(log)
    }

    fn slot(&self, sender: NodeId, receiver: NodeId) -> usize {
        (sender - 1) * self.node_count + (receiver - 1)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[NetworkEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn check_pair(&self, pair: PairIndex) -> Result<()> {
        if pair.sender > self.node_count || pair.receiver > self.node_count {
            return Err(Error::validation(format!(
                "pair {pair} outside a {}-node network",
                self.node_count
            )));
        }
        Ok(())
    }

    /// Event times of one ordered pair on the log's window.
    pub fn project_pair(&self, pair: PairIndex) -> Result<EventSequence> {
        self.check_pair(pair)?;
        let times = self
            .events
            .iter()
            .filter(|e| e.sender == pair.sender && e.receiver == pair.receiver)
            .map(|e| e.time)
            .collect();
        EventSequence::new(times, self.horizon)
    }

    /// Projection onto every ordered pair in sender-major order, in one pass.
    pub fn project_all(&self) -> Vec<(PairIndex, EventSequence)> {
        let n = self.node_count;
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n * n];
        for e in &self.events {
            buckets[self.slot(e.sender, e.receiver)].push(e.time);
        }
        PairIndex::all(n)
            .map(|p| {
                let times = std::mem::take(&mut buckets[self.slot(p.sender, p.receiver)]);
                let seq = EventSequence {
                    times,
                    horizon: self.horizon,
                };
                (p, seq)
            })
            .collect()
    }

    /// N × N matrix (row = sender) of per-pair event counts; diagonal is 0.
    pub fn pair_counts(&self) -> Vec<Vec<usize>> {
        let n = self.node_count;
        let mut counts = vec![vec![0usize; n]; n];
        for e in &self.events {
            counts[e.sender - 1][e.receiver - 1] += 1;
        }
        counts
    }

    /// A log holding a single pair's events, the univariate special case.
    pub fn from_pair(node_count: usize, pair: PairIndex, seq: &EventSequence) -> Result<Self> {
        let events = seq
            .times()
            .iter()
            .map(|&time| NetworkEvent {
                time,
                sender: pair.sender,
                receiver: pair.receiver,
            })
            .collect();
        Self::new(node_count, events, seq.horizon())
    }
}

/// Disjoint labelled classes covering nodes `1..=N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<NodeId>>", into = "Vec<Vec<NodeId>>")]
pub struct Partition {
    blocks: Vec<Vec<NodeId>>,
    membership: Vec<usize>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<NodeId>>, node_count: usize) -> Result<Self> {
        let mut membership = vec![usize::MAX; node_count];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::validation(format!("block {} is empty", b + 1)));
            }
            for &node in block {
                if node == 0 || node > node_count {
                    return Err(Error::validation(format!(
                        "block {} lists node {node}, outside 1..={node_count}",
                        b + 1
                    )));
                }
                if membership[node - 1] != usize::MAX {
                    return Err(Error::validation(format!("node {node} appears in two blocks")));
                }
                membership[node - 1] = b;
            }
        }
        if let Some(missing) = membership.iter().position(|&m| m == usize::MAX) {
            return Err(Error::validation(format!(
                "node {} is not in any block",
                missing + 1
            )));
        }
        Ok(Partition { blocks, membership })
    }

    /// A single block holding every node.
    pub fn single(node_count: usize) -> Self {
        Partition {
            blocks: vec![(1..=node_count).collect()],
            membership: vec![0; node_count],
        }
    }

    pub fn blocks(&self) -> &[Vec<NodeId>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn node_count(&self) -> usize {
        self.membership.len()
    }

    /// Zero-based block index of a node.
    pub fn block_of(&self, node: NodeId) -> usize {
        self.membership[node - 1]
    }

    pub fn same_block(&self, pair: PairIndex) -> bool {
        self.block_of(pair.sender) == self.block_of(pair.receiver)
    }
}

impl TryFrom<Vec<Vec<NodeId>>> for Partition {
    type Error = Error;
    fn try_from(blocks: Vec<Vec<NodeId>>) -> Result<Self> {
        let n = blocks.iter().flatten().copied().max().unwrap_or(0);
        Partition::new(blocks, n)
    }
}

impl From<Partition> for Vec<Vec<NodeId>> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_log() -> NetworkEventLog {
        let ev = |time, sender, receiver| NetworkEvent {
            time,
            sender,
            receiver,
        };
        NetworkEventLog::new(3, vec![ev(1.0, 1, 2), ev(2.0, 2, 1), ev(3.0, 1, 2)], 5.0).unwrap()
    }

    #[test]
    fn project_pair_filters_by_sender_and_receiver() {
        let log = small_log();
        let seq = log.project_pair(PairIndex::new(1, 2).unwrap()).unwrap();
        assert_eq!(seq.times(), &[1.0, 3.0]);
        assert_eq!(seq.horizon(), 5.0);
        let empty = log.project_pair(PairIndex::new(3, 1).unwrap()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn self_loops_are_rejected() {
        assert!(PairIndex::new(2, 2).is_err());
        let bad = NetworkEventLog::new(
            3,
            vec![NetworkEvent {
                time: 1.0,
                sender: 2,
                receiver: 2,
            }],
            5.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn out_of_range_pair_is_rejected() {
        let log = small_log();
        assert!(log.project_pair(PairIndex::new(1, 4).unwrap()).is_err());
        assert!(PairIndex::new(0, 1).is_err());
    }

    #[test]
    fn counting_process_is_right_continuous() {
        let seq = EventSequence::new(vec![1.0, 3.0], 4.0).unwrap();
        assert_eq!(seq.counting_process(0.0).unwrap(), 0);
        assert_eq!(seq.counting_process(1.0).unwrap(), 1);
        assert_eq!(seq.counting_process(2.5).unwrap(), 1);
        assert_eq!(seq.counting_process(4.0).unwrap(), 2);
        assert!(seq.counting_process(4.5).is_err());
        assert!(seq.counting_process(-0.1).is_err());
    }

    #[test]
    fn construction_rejects_bad_times() {
        assert!(EventSequence::new(vec![1.0, 1.0], 2.0).is_err());
        assert!(EventSequence::new(vec![2.0, 1.0], 3.0).is_err());
        assert!(EventSequence::new(vec![0.0, 1.0], 3.0).is_err());
        assert!(EventSequence::new(vec![1.0, 4.0], 3.0).is_err());
        assert!(EventSequence::new(vec![], 0.0).is_err());
        assert!(EventSequence::new(vec![3.0], 3.0).is_ok());
    }

    #[test]
    fn tied_pair_events_are_rejected_but_cross_pair_ties_are_fine() {
        let ev = |time, sender, receiver| NetworkEvent {
            time,
            sender,
            receiver,
        };
        assert!(NetworkEventLog::new(2, vec![ev(1.0, 1, 2), ev(1.0, 2, 1)], 2.0).is_ok());
        assert!(NetworkEventLog::new(2, vec![ev(1.0, 1, 2), ev(1.0, 1, 2)], 2.0).is_err());
    }

    #[test]
    fn jitter_spreads_tie_groups() {
        let mut t = vec![2.0, 1.0, 2.0, 2.0, 3.0];
        jitter_ties(&mut t);
        assert_eq!(t, vec![1.0, 2.0, 2.0 + 1e-9, 2.0 + 2e-9, 3.0]);
        assert!(EventSequence::new(t, 3.0).is_ok());
    }

    #[test]
    fn partition_validation() {
        let p = Partition::new(vec![vec![1, 2], vec![3]], 3).unwrap();
        assert_eq!(p.block_of(3), 1);
        assert!(p.same_block(PairIndex::new(2, 1).unwrap()));
        assert!(Partition::new(vec![vec![1, 2], vec![2, 3]], 3).is_err());
        assert!(Partition::new(vec![vec![1, 2]], 3).is_err());
        assert!(Partition::new(vec![vec![1, 2], vec![3, 11]], 10).is_err());
    }

    #[test]
    fn project_all_matches_project_pair() {
        let log = small_log();
        for (pair, seq) in log.project_all() {
            assert_eq!(seq, log.project_pair(pair).unwrap());
        }
    }
}
