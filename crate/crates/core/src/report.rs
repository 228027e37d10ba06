//! Run metrics and side-by-side comparisons.
//!
//! JSON is the canonical format. Field names below are stable; any change
//! bumps [`REPORT_SCHEMA_VERSION`].
//!
//! | field | meaning |
//! |---|---|
//! | `avg_pods` | mean reachable pods per tick |
//! | `peak_pods` | most reachable pods in any tick |
//! | `peak_desired` | highest replica decision |
//! | `timeout_rate` | timed-out / admitted, percent |
//! | `error_count` | timed-out plus 4xx/5xx responses |
//! | `scale_lag` | seconds from surge start until reachable capacity covers the sustained legitimate rate; `null` if never |
//! | `time_to_stabilize` | as `scale_lag`, additionally requiring an empty queue |
//! | `ingress_drop_fraction` | prefilter drops / malicious offered; `null` without malicious traffic |
//! | `legitimacy_series` | `[tick, score]` per tick |

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::error::{Error, Result};
use crate::flow::{KindCounts, Tick};
use crate::scaling::Rule;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const FLAG_CAPACITY_NEVER_ADEQUATE: &str = "capacity_never_adequate";
pub const FLAG_QUEUE_NEVER_DRAINED: &str = "queue_never_drained";
pub const FLAG_FORECAST_FALLBACK: &str = "forecast_fallback";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub tick_len: f64,
    pub ticks: u64,
    pub avg_pods: f64,
    pub peak_pods: u32,
    pub peak_desired: u32,
    pub timeout_rate: f64,
    pub error_count: u64,
    pub scale_lag: Option<f64>,
    pub time_to_stabilize: Option<f64>,
    pub ingress_drop_fraction: Option<f64>,
    pub offered: KindCounts,
    pub dropped_prefilter: KindCounts,
    pub dropped_policy: u64,
    pub admitted: u64,
    pub served_2xx: u64,
    pub served_4xx_5xx: u64,
    pub timed_out: u64,
    pub in_flight_at_end: u64,
    pub blocklist_events: u64,
    pub gate_capped_decisions: u64,
    pub legitimacy_series: Vec<(Tick, f64)>,
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn first_tick_from(trace: &RunTrace, start: Tick, pred: impl Fn(&crate::engine::TickSnapshot) -> bool) -> Option<Tick> {
    trace
        .snapshots
        .iter()
        .filter(|s| s.tick >= start)
        .find(|s| pred(s))
        .map(|s| s.tick)
}

pub fn compute(trace: &RunTrace) -> Result<MetricsReport> {
    if trace.is_empty() {
        return Err(Error::Report("cannot compute metrics for an empty trace".into()));
    }
    let n = trace.snapshots.len() as f64;
    let mut offered = KindCounts::default();
    let mut dropped_prefilter = KindCounts::default();
    let (mut dropped_policy, mut admitted, mut ok, mut err, mut timed_out) = (0, 0, 0, 0, 0);
    let mut pod_ticks = 0u64;
    let mut peak_pods = 0;
    for s in &trace.snapshots {
        offered.merge(&s.offered);
        dropped_prefilter.merge(&s.dropped_prefilter);
        dropped_policy += s.dropped_policy;
        admitted += s.admitted;
        ok += s.served_2xx;
        err += s.served_4xx_5xx;
        timed_out += s.timed_out;
        pod_ticks += s.reachable_pods as u64;
        peak_pods = peak_pods.max(s.reachable_pods);
    }

    let demand = trace.sustained_legit_rps;
    let adequate = |s: &crate::engine::TickSnapshot| s.capacity_rps + 1e-9 >= demand;
    let lag_tick = first_tick_from(trace, trace.surge_start_tick, adequate);
    let stable_tick = first_tick_from(trace, trace.surge_start_tick, |s| adequate(s) && s.queue_depth == 0);
    let secs = |t: Tick| (t - trace.surge_start_tick) as f64 * trace.tick_len;

    let mut flags = Vec::new();
    if lag_tick.is_none() {
        flags.push(FLAG_CAPACITY_NEVER_ADEQUATE.to_owned());
    }
    if lag_tick.is_some() && stable_tick.is_none() {
        flags.push(FLAG_QUEUE_NEVER_DRAINED.to_owned());
    }
    if trace.decisions.iter().any(|d| d.forecast_warning.is_some()) {
        flags.push(FLAG_FORECAST_FALLBACK.to_owned());
    }

    let malicious = offered.malicious();
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        name: trace.name.clone(),
        seed: trace.seed,
        tick_len: trace.tick_len,
        ticks: trace.snapshots.len() as u64,
        avg_pods: pod_ticks as f64 / n,
        peak_pods,
        peak_desired: trace.decisions.iter().map(|d| d.desired).max().unwrap_or(0),
        timeout_rate: if admitted == 0 {
            0.0
        } else {
            100.0 * timed_out as f64 / admitted as f64
        },
        error_count: timed_out + err,
        scale_lag: lag_tick.map(secs),
        time_to_stabilize: stable_tick.map(secs),
        ingress_drop_fraction: (malicious > 0).then(|| dropped_prefilter.malicious() as f64 / malicious as f64),
        offered,
        dropped_prefilter,
        dropped_policy,
        admitted,
        served_2xx: ok,
        served_4xx_5xx: err,
        timed_out,
        in_flight_at_end: trace.in_flight_at_end,
        blocklist_events: trace.blocklist_events,
        gate_capped_decisions: trace
            .decisions
            .iter()
            .filter(|d| d.rule_fired == Rule::LegitimacyCap)
            .count() as u64,
        legitimacy_series: trace.snapshots.iter().map(|s| (s.tick, s.legitimacy_score)).collect(),
        flags,
    })
}

/// `(candidate - baseline) / baseline` in percent. Zero against zero is 0%;
/// anything else against zero has no relative delta.
pub fn relative_delta(baseline: f64, candidate: f64) -> Option<f64> {
    if baseline == 0.0 {
        return (candidate == 0.0).then_some(0.0);
    }
    Some(100.0 * (candidate - baseline) / baseline + 0.0)
}

pub const COMPARED_METRICS: &[&str] = &[
    "avg_pods",
    "peak_pods",
    "peak_desired",
    "timeout_rate",
    "error_count",
    "scale_lag",
    "time_to_stabilize",
    "ingress_drop_fraction",
];

/// Raw value of a compared metric.
pub fn metric(report: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "avg_pods" => Some(report.avg_pods),
        "peak_pods" => Some(report.peak_pods as f64),
        "peak_desired" => Some(report.peak_desired as f64),
        "timeout_rate" => Some(report.timeout_rate),
        "error_count" => Some(report.error_count as f64),
        "scale_lag" => report.scale_lag,
        "time_to_stabilize" => report.time_to_stabilize,
        "ingress_drop_fraction" => report.ingress_drop_fraction,
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    pub baseline: Option<f64>,
    pub candidate: Option<f64>,
    /// Percent change from baseline; `null` when undefined.
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub baseline: String,
    pub candidate: String,
    pub seed: u64,
    pub rows: Vec<DeltaRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn delta(&self, metric: &str) -> Option<f64> {
        self.row(metric).and_then(|r| r.delta_pct)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table ending in an improvement column.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}"));
        let header = ["metric", self.baseline.as_str(), self.candidate.as_str(), "improvement"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.metric.clone(),
                    fmt(r.baseline),
                    fmt(r.candidate),
                    r.delta_pct.map_or_else(|| "n/a".to_owned(), |d| format!("{d:+.1}%")),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: [&str; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(header);
        for row in &body {
            line([&row[0], &row[1], &row[2], &row[3]]);
        }
        out
    }
}

/// Per-metric relative deltas of `candidate` against `baseline`.
///
/// Both reports must come from runs with the same traffic seed.
pub fn compare(baseline: &MetricsReport, candidate: &MetricsReport) -> Result<Comparison> {
    if baseline.seed != candidate.seed {
        return Err(Error::Report(format!(
            "refusing to compare runs with different traffic seeds ({} vs {})",
            baseline.seed, candidate.seed
        )));
    }
    let rows = COMPARED_METRICS
        .iter()
        .map(|&m| {
            let (b, c) = (metric(baseline, m), metric(candidate, m));
            DeltaRow {
                metric: m.to_owned(),
                baseline: b,
                candidate: c,
                delta_pct: b.zip(c).and_then(|(b, c)| relative_delta(b, c)),
            }
        })
        .collect();
    Ok(Comparison {
        schema_version: REPORT_SCHEMA_VERSION,
        baseline: baseline.name.clone(),
        candidate: candidate.name.clone(),
        seed: baseline.seed,
        rows,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    name: &'a str,
    seed: u64,
    ticks: u64,
    avg_pods: f64,
    peak_pods: u32,
    peak_desired: u32,
    timeout_rate: f64,
    error_count: u64,
    scale_lag: Option<f64>,
    time_to_stabilize: Option<f64>,
    ingress_drop_fraction: Option<f64>,
    offered_legit: u64,
    offered_malformed: u64,
    offered_volumetric: u64,
    dropped_prefilter: u64,
    dropped_policy: u64,
    admitted: u64,
    served_2xx: u64,
    served_4xx_5xx: u64,
    timed_out: u64,
    in_flight_at_end: u64,
    flags: String,
}

/// One CSV row per report, with a header.
pub fn to_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(CsvRow {
            name: &r.name,
            seed: r.seed,
            ticks: r.ticks,
            avg_pods: r.avg_pods,
            peak_pods: r.peak_pods,
            peak_desired: r.peak_desired,
            timeout_rate: r.timeout_rate,
            error_count: r.error_count,
            scale_lag: r.scale_lag,
            time_to_stabilize: r.time_to_stabilize,
            ingress_drop_fraction: r.ingress_drop_fraction,
            offered_legit: r.offered.legit,
            offered_malformed: r.offered.malformed,
            offered_volumetric: r.offered.volumetric,
            dropped_prefilter: r.dropped_prefilter.total(),
            dropped_policy: r.dropped_policy,
            admitted: r.admitted,
            served_2xx: r.served_2xx,
            served_4xx_5xx: r.served_4xx_5xx,
            timed_out: r.timed_out,
            in_flight_at_end: r.in_flight_at_end,
            flags: r.flags.join(";"),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}
