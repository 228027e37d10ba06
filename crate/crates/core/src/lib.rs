//! Deterministic simulation of a filtered, legitimacy-gated autoscaling
//! pipeline: traffic generation, an XDP-style prefilter, per-identity L7
//! rate limiting, a pod cluster with startup and datapath delays, sliding
//! window telemetry and a predictive meta-scaler.

pub mod bucket;
pub mod cluster;
pub mod engine;
pub mod error;
pub mod flow;
pub mod l7policy;
pub mod prefilter;
pub mod report;
pub mod scaling;
pub mod telemetry;
pub mod traffic;

pub use engine::{run, run_all, scenario, RunTrace, SimConfig, TickSnapshot};
pub use error::{Error, Result};
pub use flow::{Arrival, FlowRecord, KindCounts, Outcome, SourceId, Tick, TrafficKind};
pub use report::{compare, compute, Comparison, MetricsReport};
