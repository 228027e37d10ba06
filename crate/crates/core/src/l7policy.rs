//! Identity-based L7 policy: a per-source HTTP rate limit in front of the pods.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bucket::TokenBucket;
use crate::error::{Error, Result};
use crate::flow::{FlowRecord, Outcome, SourceId, Tick, TrafficKind};
use crate::traffic::ArrivalBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L7PolicyConfig {
    /// Requests per second per source identity.
    pub per_identity_rate: f64,
    pub per_identity_burst: f64,
    pub enabled: bool,
}

impl Default for L7PolicyConfig {
    fn default() -> Self {
        L7PolicyConfig {
            per_identity_rate: 25.0,
            per_identity_burst: 50.0,
            enabled: true,
        }
    }
}

impl L7PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.enabled {
            if !(self.per_identity_rate > 0.0 && self.per_identity_rate.is_finite()) {
                return Err(Error::config("l7.per_identity_rate", "must be > 0 when enabled"));
            }
            if !(self.per_identity_burst >= 1.0 && self.per_identity_burst.is_finite()) {
                return Err(Error::config("l7.per_identity_burst", "must be >= 1 when enabled"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub admitted: ArrivalBatch,
    pub denied: Vec<FlowRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct L7PolicyState {
    buckets: BTreeMap<SourceId, TokenBucket>,
    denied: u64,
    last_tick: Option<Tick>,
}

impl L7PolicyState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn denied_total(&self) -> u64 {
        self.denied
    }

    pub fn policy_pass(&mut self, batch: ArrivalBatch, cfg: &L7PolicyConfig, tick_len: f64) -> Result<PolicyOutput> {
        let now = batch.tick;
        if let Some(last) = self.last_tick {
            if now < last {
                return Err(Error::TickRegression { got: now, last });
            }
        }
        self.last_tick = Some(now);
        if !cfg.enabled {
            return Ok(PolicyOutput {
                admitted: batch,
                denied: Vec::new(),
            });
        }

        let mut admitted = Vec::with_capacity(batch.arrivals.len());
        let mut denied = Vec::new();
        for arrival in batch.arrivals {
            let bucket = self
                .buckets
                .entry(arrival.source)
                .or_insert_with(|| TokenBucket::full(cfg.per_identity_burst, now));
            bucket.refill(now, cfg.per_identity_rate, cfg.per_identity_burst, tick_len);
            if bucket.try_take() {
                admitted.push(arrival);
            } else {
                denied.push(FlowRecord::new(now, arrival, Outcome::DroppedPolicy));
            }
        }
        self.denied += denied.len() as u64;
        Ok(PolicyOutput {
            admitted: ArrivalBatch {
                tick: now,
                arrivals: admitted,
            },
            denied,
        })
    }
}

/// Response class of a request served by a pod.
///
/// Volumetric traffic never completes an HTTP exchange and has no response.
pub fn classify_response(kind: TrafficKind) -> Option<Outcome> {
    match kind {
        TrafficKind::Legit => Some(Outcome::Http2xx),
        TrafficKind::Malformed => Some(Outcome::Http4xx5xx),
        TrafficKind::Volumetric => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Arrival;

    fn from(sources: &[(u32, usize)], tick: Tick) -> ArrivalBatch {
        ArrivalBatch {
            tick,
            arrivals: sources
                .iter()
                .flat_map(|&(s, n)| {
                    std::iter::repeat_n(
                        Arrival {
                            source: SourceId(s),
                            kind: TrafficKind::Legit,
                        },
                        n,
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn disabled_admits_everything() {
        let cfg = L7PolicyConfig {
            enabled: false,
            per_identity_rate: 0.0,
            ..L7PolicyConfig::default()
        };
        assert!(cfg.validate().is_ok());
        let mut st = L7PolicyState::new();
        let out = st.policy_pass(from(&[(1, 1000)], 0), &cfg, 1.0).unwrap();
        assert_eq!(out.admitted.len(), 1000);
        assert!(out.denied.is_empty());
    }

    #[test]
    fn single_identity_flood() {
        let cfg = L7PolicyConfig {
            per_identity_rate: 10.0,
            per_identity_burst: 10.0,
            enabled: true,
        };
        let mut st = L7PolicyState::new();
        let out = st.policy_pass(from(&[(1, 100)], 0), &cfg, 1.0).unwrap();
        assert_eq!(out.admitted.len(), 10);
        assert_eq!(out.denied.len(), 90);
        assert!(out.denied.iter().all(|r| r.outcome == Outcome::DroppedPolicy));
        assert_eq!(st.denied_total(), 90);
    }

    #[test]
    fn identities_under_limit() {
        let cfg = L7PolicyConfig::default();
        let mut st = L7PolicyState::new();
        for t in 0..5 {
            let out = st.policy_pass(from(&[(1, 20), (2, 25)], t), &cfg, 1.0).unwrap();
            assert_eq!(out.admitted.len(), 45);
            assert!(out.denied.is_empty());
        }
    }

    #[test]
    fn response_classes() {
        assert_eq!(classify_response(TrafficKind::Legit), Some(Outcome::Http2xx));
        assert_eq!(classify_response(TrafficKind::Malformed), Some(Outcome::Http4xx5xx));
        assert_eq!(classify_response(TrafficKind::Volumetric), None);
    }

    #[test]
    fn enabled_requires_positive_rate() {
        let cfg = L7PolicyConfig {
            per_identity_rate: 0.0,
            ..L7PolicyConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
