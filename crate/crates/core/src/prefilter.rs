//! Edge pre-filter: blocklist plus per-source token-bucket rate-limit map.
//!
//! Everything dropped here is returned to the caller as
//! [`Outcome::DroppedPrefilter`] records and must never reach the telemetry
//! windows that feed the scaler.
//!
//! The mitigation feedback rule ([`PrefilterState::mitigation_update`]) is a
//! modelling choice: a source whose count of 4xx/5xx responses inside a
//! sliding feedback window exceeds `mitigation_threshold` is blocklisted for
//! `blocklist_ttl` seconds.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bucket::TokenBucket;
use crate::error::{Error, Result};
use crate::flow::{FlowRecord, KindCounts, Outcome, SourceId, Tick, TrafficKind};
use crate::traffic::ArrivalBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefilterConfig {
    /// Tokens per second per source.
    pub bucket_rate: f64,
    /// Bucket capacity per source.
    pub bucket_burst: f64,
    /// Volumetric packets per second from one source that trigger blocklisting.
    pub volumetric_threshold: f64,
    /// Seconds a source stays on the blocklist.
    pub blocklist_ttl: f64,
    /// 4xx/5xx responses within `mitigation_window` above which a source is blocklisted.
    pub mitigation_threshold: u32,
    /// Seconds of error history considered by the mitigation engine.
    pub mitigation_window: f64,
    /// Traffic from a blocklisted source re-arms its TTL.
    pub refresh_on_blocked_traffic: bool,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        PrefilterConfig {
            bucket_rate: 20.0,
            bucket_burst: 40.0,
            volumetric_threshold: 200.0,
            blocklist_ttl: 60.0,
            mitigation_threshold: 50,
            mitigation_window: 10.0,
            refresh_on_blocked_traffic: true,
        }
    }
}

impl PrefilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bucket_rate > 0.0 && self.bucket_rate.is_finite()) {
            return Err(Error::config("prefilter.bucket_rate", "must be > 0"));
        }
        if !(self.bucket_burst >= 1.0 && self.bucket_burst.is_finite()) {
            return Err(Error::config("prefilter.bucket_burst", "must be >= 1"));
        }
        if self.volumetric_threshold.is_nan() || self.volumetric_threshold <= self.bucket_rate {
            return Err(Error::config(
                "prefilter.volumetric_threshold",
                "must exceed bucket_rate",
            ));
        }
        if !(self.blocklist_ttl >= 0.0 && self.blocklist_ttl.is_finite()) {
            return Err(Error::config("prefilter.blocklist_ttl", "must be >= 0"));
        }
        if !(self.mitigation_window > 0.0 && self.mitigation_window.is_finite()) {
            return Err(Error::config("prefilter.mitigation_window", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounters {
    /// Drops by traffic kind.
    pub by_kind: KindCounts,
    /// Drops because the source was on the blocklist.
    pub blocklisted: u64,
    /// Drops because the source's bucket was empty.
    pub rate_limited: u64,
    /// Drops in the tick a volumetric source crossed the threshold.
    pub volumetric: u64,
}

impl DropCounters {
    pub fn total(&self) -> u64 {
        self.by_kind.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefilterOutput {
    pub passed: ArrivalBatch,
    pub dropped: Vec<FlowRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct PrefilterState {
    /// Source → tick at which the entry expires.
    blocklist: BTreeMap<SourceId, Tick>,
    buckets: BTreeMap<SourceId, TokenBucket>,
    /// Per-source (tick, error count) history for the mitigation engine.
    offenses: BTreeMap<SourceId, VecDeque<(Tick, u32)>>,
    drops: DropCounters,
    last_tick: Option<Tick>,
    blocklist_events: u64,
}

fn secs_to_ticks(secs: f64, tick_len: f64) -> Tick {
    (secs / tick_len - 1e-9).ceil().max(0.0) as Tick
}

impl PrefilterState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn drop_counters(&self) -> &DropCounters {
        &self.drops
    }

    /// Number of times a source was newly added to the blocklist.
    pub fn blocklist_events(&self) -> u64 {
        self.blocklist_events
    }

    pub fn blocklist_len(&self) -> usize {
        self.blocklist.len()
    }

    pub fn bucket(&self, source: SourceId) -> Option<&TokenBucket> {
        self.buckets.get(&source)
    }

    /// True when `source` is listed and its entry has not expired at `now`.
    pub fn is_blocklisted(&self, source: SourceId, now: Tick) -> bool {
        self.blocklist.get(&source).is_some_and(|&expiry| expiry > now)
    }

    pub fn blocklist_expiry(&self, source: SourceId) -> Option<Tick> {
        self.blocklist.get(&source).copied()
    }

    /// Adds `source` with the given expiry, or extends an existing entry.
    /// Returns true when the source was not listed before.
    pub fn blocklist(&mut self, source: SourceId, expiry: Tick) -> bool {
        match self.blocklist.get_mut(&source) {
            Some(e) => {
                *e = (*e).max(expiry);
                false
            }
            None => {
                self.blocklist.insert(source, expiry);
                self.offenses.remove(&source);
                self.blocklist_events += 1;
                true
            }
        }
    }

    fn purge_expired(&mut self, now: Tick) {
        self.blocklist.retain(|_, expiry| *expiry > now);
    }

    /// Filters one tick of arrivals.
    pub fn prefilter_pass(
        &mut self,
        batch: ArrivalBatch,
        cfg: &PrefilterConfig,
        tick_len: f64,
    ) -> Result<PrefilterOutput> {
        let now = batch.tick;
        if let Some(last) = self.last_tick {
            if now < last {
                return Err(Error::TickRegression { got: now, last });
            }
        }
        self.last_tick = Some(now);
        self.purge_expired(now);
        let ttl = secs_to_ticks(cfg.blocklist_ttl, tick_len);

        let mut volumetric_counts: BTreeMap<SourceId, u64> = BTreeMap::new();
        for a in batch.arrivals.iter().filter(|a| a.kind == TrafficKind::Volumetric) {
            *volumetric_counts.entry(a.source).or_default() += 1;
        }
        let mut flooding = Vec::new();
        for (source, count) in volumetric_counts {
            if count as f64 / tick_len > cfg.volumetric_threshold && !self.is_blocklisted(source, now) {
                self.blocklist(source, now + ttl);
                flooding.push(source);
            }
        }

        let mut passed = Vec::with_capacity(batch.arrivals.len());
        let mut dropped = Vec::new();
        for arrival in batch.arrivals {
            let source = arrival.source;
            if self.is_blocklisted(source, now) {
                if flooding.contains(&source) {
                    self.drops.volumetric += 1;
                } else {
                    self.drops.blocklisted += 1;
                    if cfg.refresh_on_blocked_traffic {
                        self.blocklist(source, now + ttl);
                    }
                }
                self.drops.by_kind.add(arrival.kind, 1);
                dropped.push(FlowRecord::new(now, arrival, Outcome::DroppedPrefilter));
                continue;
            }
            let bucket = self
                .buckets
                .entry(source)
                .or_insert_with(|| TokenBucket::full(cfg.bucket_burst, now));
            bucket.refill(now, cfg.bucket_rate, cfg.bucket_burst, tick_len);
            if bucket.try_take() {
                passed.push(arrival);
            } else {
                self.drops.rate_limited += 1;
                self.drops.by_kind.add(arrival.kind, 1);
                dropped.push(FlowRecord::new(now, arrival, Outcome::DroppedPrefilter));
            }
        }

        Ok(PrefilterOutput {
            passed: ArrivalBatch {
                tick: now,
                arrivals: passed,
            },
            dropped,
        })
    }

    /// Feeds L7 observations back into the blocklist.
    ///
    /// Only 4xx/5xx records count as offenses. The evaluation time is the
    /// latest observation tick.
    pub fn mitigation_update(&mut self, observations: &[FlowRecord], cfg: &PrefilterConfig, tick_len: f64) {
        let Some(now) = observations.iter().map(|r| r.tick).max() else {
            return;
        };
        let window = secs_to_ticks(cfg.mitigation_window, tick_len);
        let ttl = secs_to_ticks(cfg.blocklist_ttl, tick_len);

        let mut touched: BTreeMap<SourceId, u32> = BTreeMap::new();
        for r in observations.iter().filter(|r| r.outcome == Outcome::Http4xx5xx) {
            *touched.entry(r.source).or_default() += 1;
            let log = self.offenses.entry(r.source).or_default();
            match log.back_mut() {
                Some((t, n)) if *t == r.tick => *n += 1,
                _ => log.push_back((r.tick, 1)),
            }
        }

        for source in touched.keys() {
            let log = self.offenses.get_mut(source).expect("inserted above");
            while log.front().is_some_and(|(t, _)| *t + window <= now) {
                log.pop_front();
            }
            let count: u64 = log.iter().map(|(_, n)| *n as u64).sum();
            if count > cfg.mitigation_threshold as u64 {
                self.blocklist(*source, now + ttl);
            }
        }
        self.offenses
            .retain(|_, log| log.back().is_some_and(|(t, _)| *t + window > now));
    }
}
