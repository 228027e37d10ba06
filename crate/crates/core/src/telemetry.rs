//! Sliding-window flow telemetry and the two scaler-facing signals derived
//! from it: observed request rate and the legitimacy score.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowRecord, Outcome, Tick};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetryConfig {
    /// Seconds of admitted traffic averaged into the observed request rate.
    pub rps_window: f64,
    /// Seconds of HTTP responses used for the legitimacy score.
    pub legitimacy_window: f64,
    /// Count L7 policy denials as non-2xx responses in the score denominator.
    pub denials_in_legitimacy: bool,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        TelemetryConfig {
            rps_window: 30.0,
            legitimacy_window: 30.0,
            denials_in_legitimacy: false,
        }
    }
}

impl TelemetryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rps_window > 0.0 && self.rps_window.is_finite()) {
            return Err(Error::config("telemetry.rps_window", "must be > 0"));
        }
        if !(self.legitimacy_window > 0.0 && self.legitimacy_window.is_finite()) {
            return Err(Error::config("telemetry.legitimacy_window", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickCounts {
    pub tick: Tick,
    pub http_2xx: u64,
    pub http_4xx_5xx: u64,
    pub admitted: u64,
    pub timed_out: u64,
    pub denied: u64,
}

impl TickCounts {
    fn merge(&mut self, o: &TickCounts) {
        self.http_2xx += o.http_2xx;
        self.http_4xx_5xx += o.http_4xx_5xx;
        self.admitted += o.admitted;
        self.timed_out += o.timed_out;
        self.denied += o.denied;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegitimacySignal {
    pub score: f64,
    pub sample_count: u64,
    pub legitimate: bool,
}

impl LegitimacySignal {
    /// `2xx / (2xx + errors)`. An empty window counts as legitimate: no
    /// evidence of an attack must not cap scaling.
    pub fn from_counts(http_2xx: u64, errors: u64, threshold: f64) -> Self {
        let total = http_2xx + errors;
        if total == 0 {
            return LegitimacySignal {
                score: 1.0,
                sample_count: 0,
                legitimate: true,
            };
        }
        let score = http_2xx as f64 / total as f64;
        LegitimacySignal {
            score,
            sample_count: total,
            legitimate: score >= threshold,
        }
    }
}

/// Per-tick counters over the trailing `window_len` seconds.
///
/// At tick `now` the window holds ticks `now - span + 1 ..= now`, where
/// `span = window_len / tick_len`.
#[derive(Debug, Clone)]
pub struct MetricsWindow {
    window_len: f64,
    span: u64,
    slots: VecDeque<TickCounts>,
    now: Option<Tick>,
    count_denials: bool,
}

impl MetricsWindow {
    pub fn new(window_len: f64, tick_len: f64) -> Result<Self> {
        if !(window_len > 0.0 && window_len.is_finite()) {
            return Err(Error::config("window_len", "must be > 0"));
        }
        if !(tick_len > 0.0 && tick_len.is_finite()) {
            return Err(Error::config("tick_len", "must be > 0"));
        }
        let span = ((window_len / tick_len) - 1e-9).ceil().max(1.0) as u64;
        Ok(MetricsWindow {
            window_len,
            span,
            slots: VecDeque::with_capacity(span as usize + 1),
            now: None,
            count_denials: false,
        })
    }

    pub fn with_denials_in_legitimacy(mut self, on: bool) -> Self {
        self.count_denials = on;
        self
    }

    pub fn window_len(&self) -> f64 {
        self.window_len
    }

    pub fn now(&self) -> Option<Tick> {
        self.now
    }

    /// Moves the window's right edge to `tick`, expiring old slots.
    pub fn advance_to(&mut self, tick: Tick) -> Result<()> {
        if let Some(now) = self.now {
            if tick < now {
                return Err(Error::TickRegression { got: tick, last: now });
            }
        }
        self.now = Some(tick);
        while self.slots.front().is_some_and(|s| s.tick + self.span <= tick) {
            self.slots.pop_front();
        }
        Ok(())
    }

    fn slot(&mut self, tick: Tick) -> &mut TickCounts {
        if self.slots.back().is_none_or(|s| s.tick != tick) {
            self.slots.push_back(TickCounts {
                tick,
                ..TickCounts::default()
            });
        }
        self.slots.back_mut().expect("pushed above")
    }

    /// Adds flow records. Prefilter drops are refused outright: they must
    /// never influence the scaler.
    pub fn record(&mut self, records: &[FlowRecord]) -> Result<()> {
        if let Some(r) = records.iter().find(|r| r.outcome == Outcome::DroppedPrefilter) {
            return Err(Error::ContractViolation(format!(
                "prefilter-dropped record from source {} at tick {} offered to scaler telemetry",
                r.source.0, r.tick
            )));
        }
        let mut floor = self.now;
        for r in records {
            if let Some(f) = floor {
                if r.tick < f {
                    return Err(Error::TickRegression { got: r.tick, last: f });
                }
            }
            floor = Some(r.tick);
        }
        for r in records {
            self.advance_to(r.tick)?;
            let slot = self.slot(r.tick);
            match r.outcome {
                Outcome::Http2xx => slot.http_2xx += 1,
                Outcome::Http4xx5xx => slot.http_4xx_5xx += 1,
                Outcome::TimedOut => slot.timed_out += 1,
                Outcome::DroppedPolicy => slot.denied += 1,
                Outcome::DroppedPrefilter => unreachable!("rejected above"),
            }
        }
        Ok(())
    }

    /// Counts requests that passed every filter and reached the service.
    pub fn record_admitted(&mut self, tick: Tick, count: u64) -> Result<()> {
        self.advance_to(tick)?;
        self.slot(tick).admitted += count;
        Ok(())
    }

    pub fn totals(&self) -> TickCounts {
        let mut acc = TickCounts {
            tick: self.now.unwrap_or(0),
            ..TickCounts::default()
        };
        for s in &self.slots {
            acc.merge(s);
        }
        acc
    }

    pub fn legitimacy_score(&self, threshold: f64) -> LegitimacySignal {
        let t = self.totals();
        let errors = t.http_4xx_5xx + if self.count_denials { t.denied } else { 0 };
        LegitimacySignal::from_counts(t.http_2xx, errors, threshold)
    }

    /// Admitted arrivals in the window divided by the window length.
    pub fn observed_rps(&self) -> f64 {
        self.totals().admitted as f64 / self.window_len
    }
}

/// The rate window and the legitimacy window, fed together.
#[derive(Debug, Clone)]
pub struct Telemetry {
    pub rate: MetricsWindow,
    pub legitimacy: MetricsWindow,
}

impl Telemetry {
    pub fn new(cfg: &TelemetryConfig, tick_len: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Telemetry {
            rate: MetricsWindow::new(cfg.rps_window, tick_len)?,
            legitimacy: MetricsWindow::new(cfg.legitimacy_window, tick_len)?
                .with_denials_in_legitimacy(cfg.denials_in_legitimacy),
        })
    }

    pub fn record(&mut self, records: &[FlowRecord]) -> Result<()> {
        self.rate.record(records)?;
        self.legitimacy.record(records)
    }

    pub fn record_admitted(&mut self, tick: Tick, count: u64) -> Result<()> {
        self.rate.record_admitted(tick, count)?;
        self.legitimacy.record_admitted(tick, count)
    }

    pub fn advance_to(&mut self, tick: Tick) -> Result<()> {
        self.rate.advance_to(tick)?;
        self.legitimacy.advance_to(tick)
    }

    pub fn observed_rps(&self) -> f64 {
        self.rate.observed_rps()
    }

    pub fn legitimacy_score(&self, threshold: f64) -> LegitimacySignal {
        self.legitimacy.legitimacy_score(threshold)
    }
}
