//! Request-level vocabulary shared by every pipeline stage.

use serde::{Deserialize, Serialize};

/// Simulation tick index. Wall time is `tick * tick_len`.
pub type Tick = u64;

/// Identity of a traffic source (a client address or a workload identity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    /// Well-formed request from a real user.
    Legit,
    /// Malformed request; the service rejects it with a 4xx/5xx.
    Malformed,
    /// Connection-level flood (SYN-flood-like); never completes an HTTP exchange.
    Volumetric,
}

impl TrafficKind {
    pub const ALL: [TrafficKind; 3] = [TrafficKind::Legit, TrafficKind::Malformed, TrafficKind::Volumetric];

    pub fn index(self) -> usize {
        match self {
            TrafficKind::Legit => 0,
            TrafficKind::Malformed => 1,
            TrafficKind::Volumetric => 2,
        }
    }

    pub fn is_malicious(self) -> bool {
        !matches!(self, TrafficKind::Legit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Http2xx,
    Http4xx5xx,
    DroppedPrefilter,
    DroppedPolicy,
    TimedOut,
}

impl Outcome {
    pub fn is_http(self) -> bool {
        matches!(self, Outcome::Http2xx | Outcome::Http4xx5xx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrival {
    pub source: SourceId,
    pub kind: TrafficKind,
}

/// One observed request with its terminal outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub tick: Tick,
    pub source: SourceId,
    pub kind: TrafficKind,
    pub outcome: Outcome,
}

impl FlowRecord {
    pub fn new(tick: Tick, arrival: Arrival, outcome: Outcome) -> Self {
        debug_assert!(
            !(arrival.kind == TrafficKind::Volumetric && outcome.is_http()),
            "volumetric traffic cannot carry an HTTP outcome"
        );
        FlowRecord {
            tick,
            source: arrival.source,
            kind: arrival.kind,
            outcome,
        }
    }

    /// Volumetric traffic never carries an HTTP outcome.
    pub fn is_consistent(&self) -> bool {
        !(self.kind == TrafficKind::Volumetric && self.outcome.is_http())
    }
}

/// Per-kind counter triple, indexed by [`TrafficKind::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub legit: u64,
    pub malformed: u64,
    pub volumetric: u64,
}

impl KindCounts {
    pub fn add(&mut self, kind: TrafficKind, n: u64) {
        match kind {
            TrafficKind::Legit => self.legit += n,
            TrafficKind::Malformed => self.malformed += n,
            TrafficKind::Volumetric => self.volumetric += n,
        }
    }

    pub fn get(&self, kind: TrafficKind) -> u64 {
        match kind {
            TrafficKind::Legit => self.legit,
            TrafficKind::Malformed => self.malformed,
            TrafficKind::Volumetric => self.volumetric,
        }
    }

    pub fn total(&self) -> u64 {
        self.legit + self.malformed + self.volumetric
    }

    pub fn malicious(&self) -> u64 {
        self.malformed + self.volumetric
    }

    pub fn merge(&mut self, other: &KindCounts) {
        self.legit += other.legit;
        self.malformed += other.malformed;
        self.volumetric += other.volumetric;
    }
}
