//! The meta-scaler: reactive threshold scaling, forecast-driven
//! pre-provisioning, and the legitimacy gate that caps both.
//!
//! Fusion order for one control interval:
//!
//! 1. `base = max(reactive, predictive)`
//! 2. scale-down stabilization raises `base` to the highest recommendation made in
//!    the last `scale_down_stabilization` seconds
//! 3. when the gate is engaged (score below threshold) the result is capped at
//!    the replica need of legitimate traffic, `ceil(score * rps / rps_per_pod)`
//! 4. clamp to `[min_replicas, max_replicas]`

pub mod forecast;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Tick;
use crate::telemetry::LegitimacySignal;

pub use forecast::{
    detect_period, persistence, Forecast, ForecastSeries, ForecastWarning, Forecaster, ForecasterKind, NoForecast,
    SeasonalNaive,
};

/// Allowed prediction window, seconds.
pub const PREDICTION_WINDOW_RANGE: (f64, f64) = (300.0, 600.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalerConfig {
    /// Target requests per second handled by one pod.
    pub rps_per_pod: f64,
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub legitimacy_threshold: f64,
    /// Seconds of forecast considered when pre-provisioning.
    pub prediction_window: f64,
    /// Seconds a scale-down is held back.
    pub scale_down_stabilization: f64,
    pub forecaster: ForecasterKind,
    /// Season length in seconds for seasonal-naive; detected when absent.
    pub season_length: Option<f64>,
    /// Fraction of a pod ignored before rounding a replica need up.
    pub tolerance: f64,
}

impl Default for ScalerConfig {
    fn default() -> Self {
        ScalerConfig {
            rps_per_pod: 50.0,
            min_replicas: 1,
            max_replicas: 20,
            legitimacy_threshold: 0.85,
            prediction_window: 300.0,
            scale_down_stabilization: 60.0,
            forecaster: ForecasterKind::None,
            season_length: None,
            tolerance: 1e-6,
        }
    }
}

impl ScalerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rps_per_pod > 0.0 && self.rps_per_pod.is_finite()) {
            return Err(Error::config("scaler.rps_per_pod", "must be > 0"));
        }
        if self.min_replicas > self.max_replicas {
            return Err(Error::config("scaler.min_replicas", "must not exceed max_replicas"));
        }
        if !(self.legitimacy_threshold > 0.0 && self.legitimacy_threshold <= 1.0) {
            return Err(Error::config("scaler.legitimacy_threshold", "must lie in (0, 1]"));
        }
        let (lo, hi) = PREDICTION_WINDOW_RANGE;
        if !(self.prediction_window >= lo && self.prediction_window <= hi) {
            return Err(Error::config(
                "scaler.prediction_window",
                format!("must lie in [{lo}, {hi}] seconds"),
            ));
        }
        if !(self.scale_down_stabilization >= 0.0 && self.scale_down_stabilization.is_finite()) {
            return Err(Error::config("scaler.scale_down_stabilization", "must be >= 0"));
        }
        if let Some(s) = self.season_length {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("scaler.season_length", "must be > 0"));
            }
        }
        if !(0.0..0.5).contains(&self.tolerance) {
            return Err(Error::config("scaler.tolerance", "must lie in [0, 0.5)"));
        }
        Ok(())
    }

    fn clamp(&self, replicas: u32) -> u32 {
        replicas.clamp(self.min_replicas, self.max_replicas)
    }

    /// Pods needed to serve `rps`, before clamping.
    pub fn replicas_for(&self, rps: f64) -> u32 {
        let pods = (rps.max(0.0) / self.rps_per_pod - self.tolerance).ceil();
        pods.clamp(0.0, u32::MAX as f64) as u32
    }

    pub fn forecaster(&self, tick_len: f64) -> Box<dyn Forecaster + Send + Sync> {
        match self.forecaster {
            ForecasterKind::None => Box::new(NoForecast),
            ForecasterKind::SeasonalNaive => Box::new(SeasonalNaive {
                season: self.season_length.map(|s| ((s / tick_len).round() as usize).max(1)),
            }),
        }
    }

    pub fn horizon_ticks(&self, tick_len: f64) -> usize {
        ((self.prediction_window / tick_len) - 1e-9).ceil().max(1.0) as usize
    }
}

/// `ceil(rps / rps_per_pod)` clamped to the replica bounds.
pub fn reactive_desired(rps: f64, cfg: &ScalerConfig) -> u32 {
    cfg.clamp(cfg.replicas_for(rps))
}

/// Replicas for the peak of the forecast inside the prediction window.
pub fn predictive_desired(forecast: &ForecastSeries, cfg: &ScalerConfig, tick_len: f64) -> u32 {
    cfg.clamp(cfg.replicas_for(forecast.peak(cfg.horizon_ticks(tick_len))))
}

/// Runs the configured forecaster over `history` (one value per tick).
pub fn forecast(history: &[f64], horizon: usize, cfg: &ScalerConfig, tick_len: f64) -> Forecast {
    cfg.forecaster(tick_len).forecast(history, horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Reactive,
    Predictive,
    LegitimacyCap,
    StabilizationHold,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuseInputs {
    pub reactive: u32,
    pub predictive: u32,
    pub legitimacy: LegitimacySignal,
    /// Estimated request rate of legitimate traffic alone.
    pub legit_rps: f64,
    pub current: u32,
    pub gate_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerDecision {
    pub tick: Tick,
    pub desired: u32,
    pub reactive_input: u32,
    pub predictive_input: u32,
    pub legitimacy: LegitimacySignal,
    pub legit_rps: f64,
    pub current: u32,
    pub gate_enabled: bool,
    /// Highest recommendation inside the stabilization horizon (0 if none).
    pub held: u32,
    /// Gate cap, present only when the gate was engaged.
    pub cap: Option<u32>,
    pub rule_fired: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast_warning: Option<ForecastWarning>,
}

impl ScalerDecision {
    /// Rule implied by the stored inputs; must equal `rule_fired`.
    pub fn expected_rule(&self, cfg: &ScalerConfig) -> Rule {
        let base = self.reactive_input.max(self.predictive_input);
        let stabilized = base.max(self.held);
        let capped = self.cap.map_or(stabilized, |c| stabilized.min(c));
        if cfg.clamp(capped) != capped {
            Rule::Clamp
        } else if self.cap.is_some_and(|c| c < stabilized) {
            Rule::LegitimacyCap
        } else if self.held > base {
            Rule::StabilizationHold
        } else if self.predictive_input > self.reactive_input {
            Rule::Predictive
        } else {
            Rule::Reactive
        }
    }
}

/// Remembers recent recommendations to delay scale-down.
#[derive(Debug, Clone, Default)]
pub struct Stabilizer {
    horizon: Tick,
    history: VecDeque<(Tick, u32)>,
}

impl Stabilizer {
    pub fn new(cfg: &ScalerConfig, tick_len: f64) -> Self {
        Stabilizer {
            horizon: ((cfg.scale_down_stabilization / tick_len) - 1e-9).ceil().max(0.0) as Tick,
            history: VecDeque::new(),
        }
    }

    /// Highest recommendation made within the horizon before `now`.
    pub fn held(&mut self, now: Tick) -> u32 {
        while self.history.front().is_some_and(|(t, _)| t + self.horizon <= now) {
            self.history.pop_front();
        }
        self.history.iter().map(|(_, d)| *d).max().unwrap_or(0)
    }

    pub fn push(&mut self, now: Tick, desired: u32) {
        self.history.push_back((now, desired));
    }
}

/// Combines the three signals into one replica decision.
pub fn fuse(inputs: &FuseInputs, cfg: &ScalerConfig, stabilizer: &mut Stabilizer, tick: Tick) -> ScalerDecision {
    let held = stabilizer.held(tick);
    let gate_engaged = inputs.gate_enabled && !inputs.legitimacy.legitimate;
    let cap = gate_engaged.then(|| cfg.replicas_for(inputs.legit_rps));

    let base = inputs.reactive.max(inputs.predictive);
    let stabilized = base.max(held);
    let capped = cap.map_or(stabilized, |c| stabilized.min(c));
    let desired = cfg.clamp(capped);

    let mut decision = ScalerDecision {
        tick,
        desired,
        reactive_input: inputs.reactive,
        predictive_input: inputs.predictive,
        legitimacy: inputs.legitimacy,
        legit_rps: inputs.legit_rps,
        current: inputs.current,
        gate_enabled: inputs.gate_enabled,
        held,
        cap,
        rule_fired: Rule::Reactive,
        forecast_warning: None,
    };
    decision.rule_fired = decision.expected_rule(cfg);
    // Store the recommendation, not the held output, so a hold cannot renew itself.
    stabilizer.push(tick, cfg.clamp(cap.map_or(base, |c| base.min(c))));
    decision
}
