//! The simulation loop and its configuration.
//!
//! Each tick runs the stages in a fixed order:
//!
//! ```text
//! traffic → prefilter → l7 policy → cluster → telemetry → mitigation feedback
//! ```
//!
//! and every `control_interval` the scaler reads the telemetry windows and
//! applies a decision to the cluster at the end of the tick.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterState, Pod, PodSpec, IPTABLES_CONVERGENCE_SECS};
use crate::error::{Error, Result};
use crate::flow::{KindCounts, Tick};
use crate::l7policy::{L7PolicyConfig, L7PolicyState};
use crate::prefilter::{PrefilterConfig, PrefilterOutput, PrefilterState};
use crate::scaling::{
    fuse, predictive_desired, reactive_desired, ForecasterKind, FuseInputs, ScalerConfig, ScalerDecision, Stabilizer,
};
use crate::telemetry::{Telemetry, TelemetryConfig};
use crate::traffic::{self, ArrivalGenerator, TrafficProfile};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Free-form label carried into traces and reports.
    pub name: String,
    /// Seconds per tick.
    pub tick_len: f64,
    /// Seconds to simulate; defaults to the profile duration.
    pub duration: Option<f64>,
    pub seed: u64,
    /// Seconds between scaler evaluations.
    pub control_interval: f64,
    pub gate_enabled: bool,
    pub prefilter_enabled: bool,
    /// Pods reachable at tick 0; defaults to `scaler.min_replicas`.
    pub initial_replicas: Option<u32>,
    pub profile: TrafficProfile,
    /// Traffic replayed into the forecaster's history before the run.
    pub warmup: Option<TrafficProfile>,
    pub prefilter: PrefilterConfig,
    pub l7: L7PolicyConfig,
    pub telemetry: TelemetryConfig,
    pub scaler: ScalerConfig,
    pub pod: PodSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            name: String::new(),
            tick_len: 1.0,
            duration: None,
            seed: traffic::DEFAULT_SEED,
            control_interval: 5.0,
            gate_enabled: true,
            prefilter_enabled: true,
            initial_replicas: None,
            profile: traffic::flash_crowd_profile(),
            warmup: None,
            prefilter: PrefilterConfig::default(),
            l7: L7PolicyConfig::default(),
            telemetry: TelemetryConfig::default(),
            scaler: ScalerConfig::default(),
            pod: PodSpec::default(),
        }
    }
}

fn is_multiple(value: f64, step: f64) -> bool {
    let q = value / step;
    (q - q.round()).abs() < 1e-9
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.profile.duration())
    }

    pub fn ticks(&self) -> Tick {
        (self.duration() / self.tick_len).round() as Tick
    }

    pub fn control_every(&self) -> Tick {
        ((self.control_interval / self.tick_len).round() as Tick).max(1)
    }

    pub fn initial_replicas(&self) -> u32 {
        self.initial_replicas.unwrap_or(self.scaler.min_replicas)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick_len > 0.0 && self.tick_len.is_finite()) {
            return Err(Error::config("tick_len", "must be > 0"));
        }
        let duration = self.duration();
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::config("duration", "must be >= 0"));
        }
        if !is_multiple(duration, self.tick_len) {
            return Err(Error::config("duration", "must be a multiple of tick_len"));
        }
        if !(self.control_interval > 0.0 && is_multiple(self.control_interval, self.tick_len)) {
            return Err(Error::config(
                "control_interval",
                "must be a positive multiple of tick_len",
            ));
        }
        self.profile.validate()?;
        if let Some(w) = &self.warmup {
            w.validate().map_err(|e| match e {
                Error::InvalidConfig { field, reason } => Error::config(field.replacen("profile", "warmup", 1), reason),
                other => other,
            })?;
        }
        self.prefilter.validate()?;
        self.l7.validate()?;
        self.telemetry.validate()?;
        self.scaler.validate()?;
        self.pod.validate()?;
        let init = self.initial_replicas();
        if init < self.scaler.min_replicas || init > self.scaler.max_replicas {
            return Err(Error::config(
                "initial_replicas",
                "must lie within [min_replicas, max_replicas]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlashCrowdVariant {
    Reactive,
    Predictive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedAttackVariant {
    Unprotected,
    Protected,
}

/// Flash crowd with either the reactive threshold scaler or a seasonal-naive
/// forecaster warmed with an hour of the recurring surge pattern.
pub fn scenario_flash_crowd(variant: FlashCrowdVariant) -> SimConfig {
    let mut cfg = SimConfig {
        name: format!("flash-crowd/{}", variant_name(&variant)),
        profile: traffic::flash_crowd_profile(),
        gate_enabled: true,
        prefilter_enabled: true,
        ..SimConfig::default()
    };
    if variant == FlashCrowdVariant::Predictive {
        cfg.scaler.forecaster = ForecasterKind::SeasonalNaive;
        cfg.scaler.season_length = Some(traffic::recurring_surge_cycle().duration());
        cfg.warmup = Some(traffic::default_training_history());
    }
    cfg
}

/// Request rate window of the mixed-traffic scenario, seconds.
pub const MIXED_ATTACK_RPS_WINDOW: f64 = 5.0;

/// Attack blend at 500 RPS, with both defence layers off or on.
///
/// The rate window matches the control interval so that once the attack
/// pool is blocklisted, the request rate the scaler sees is clean before the
/// legitimacy score climbs back over the threshold.
pub fn scenario_mixed_attack(variant: MixedAttackVariant) -> SimConfig {
    let protected = variant == MixedAttackVariant::Protected;
    SimConfig {
        name: format!("mixed-attack/{}", variant_name(&variant)),
        profile: traffic::mixed_attack_profile(),
        gate_enabled: protected,
        prefilter_enabled: protected,
        telemetry: TelemetryConfig {
            rps_window: MIXED_ATTACK_RPS_WINDOW,
            ..TelemetryConfig::default()
        },
        ..SimConfig::default()
    }
}

fn variant_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub const SCENARIOS: &[(&str, &[&str])] = &[
    ("flash-crowd", &["reactive", "predictive"]),
    ("mixed-attack", &["unprotected", "protected"]),
];

/// Looks up a canned scenario by name and variant.
pub fn scenario(name: &str, variant: &str) -> Result<SimConfig> {
    match (name, variant) {
        ("flash-crowd", "reactive") => Ok(scenario_flash_crowd(FlashCrowdVariant::Reactive)),
        ("flash-crowd", "predictive") => Ok(scenario_flash_crowd(FlashCrowdVariant::Predictive)),
        ("mixed-attack", "unprotected") => Ok(scenario_mixed_attack(MixedAttackVariant::Unprotected)),
        ("mixed-attack", "protected") => Ok(scenario_mixed_attack(MixedAttackVariant::Protected)),
        _ => Err(Error::InvalidArgument(format!(
            "unknown scenario `{name}` variant `{variant}` (known: flash-crowd reactive|predictive, mixed-attack unprotected|protected)"
        ))),
    }
}

/// Same as the default scenario config but with datapath convergence of the
/// iptables model.
pub fn with_iptables_convergence(mut cfg: SimConfig) -> SimConfig {
    cfg.pod.datapath_convergence = IPTABLES_CONVERGENCE_SECS;
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub tick: Tick,
    pub offered: KindCounts,
    pub dropped_prefilter: KindCounts,
    pub dropped_policy: u64,
    pub admitted: u64,
    pub served_2xx: u64,
    pub served_4xx_5xx: u64,
    pub timed_out: u64,
    pub reachable_pods: u32,
    pub active_pods: u32,
    pub queue_depth: u64,
    pub capacity_rps: f64,
    /// Scaler-facing signals after this tick's records were counted.
    pub observed_rps: f64,
    pub legitimacy_score: f64,
    pub legitimacy_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub tick_len: f64,
    pub control_interval: f64,
    /// First tick of the first ramp-up phase.
    pub surge_start_tick: Tick,
    /// Peak legitimate rate the profile sustains.
    pub sustained_legit_rps: f64,
    pub snapshots: Vec<TickSnapshot>,
    pub decisions: Vec<ScalerDecision>,
    pub pods: Vec<Pod>,
    /// Admitted requests still queued when the run ended.
    pub in_flight_at_end: u64,
    /// Times a source was newly blocklisted.
    pub blocklist_events: u64,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn warmup_history(cfg: &SimConfig) -> Result<Vec<f64>> {
    let Some(profile) = &cfg.warmup else {
        return Ok(Vec::new());
    };
    let mut gen = ArrivalGenerator::new(profile.clone().with_seed(cfg.seed), cfg.tick_len)?;
    Ok((0..gen.ticks_in_profile())
        .map(|_| gen.next_total() as f64 / cfg.tick_len)
        .collect())
}

/// Executes one run. Identical configs produce identical traces.
pub fn run(cfg: &SimConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let tick_len = cfg.tick_len;
    let mut generator = ArrivalGenerator::new(cfg.profile.clone().with_seed(cfg.seed), tick_len)?;
    let mut prefilter = PrefilterState::new();
    let mut policy = L7PolicyState::new();
    let mut cluster = ClusterState::new(cfg.initial_replicas());
    let mut telemetry = Telemetry::new(&cfg.telemetry, tick_len)?;
    let mut stabilizer = Stabilizer::new(&cfg.scaler, tick_len);
    let forecaster = cfg.scaler.forecaster(tick_len);
    let horizon = cfg.scaler.horizon_ticks(tick_len);
    let mut history = warmup_history(cfg)?;
    let control_every = cfg.control_every();

    let ticks = cfg.ticks();
    let mut snapshots = Vec::with_capacity(ticks as usize);
    let mut decisions = Vec::new();

    for tick in 0..ticks {
        let batch = generator.next_batch();
        let mut offered = KindCounts::default();
        for a in &batch.arrivals {
            offered.add(a.kind, 1);
        }

        let PrefilterOutput { passed, dropped } = if cfg.prefilter_enabled {
            prefilter.prefilter_pass(batch, &cfg.prefilter, tick_len)?
        } else {
            PrefilterOutput {
                passed: batch,
                dropped: Vec::new(),
            }
        };
        let mut dropped_prefilter = KindCounts::default();
        for r in &dropped {
            dropped_prefilter.add(r.kind, 1);
        }
        // Prefilter drops stop here: they are counted in the trace and
        // nowhere else.
        drop(dropped);

        let policy_out = policy.policy_pass(passed, &cfg.l7, tick_len)?;
        let admitted = policy_out.admitted.len() as u64;
        let step = cluster.step(policy_out.admitted, &cfg.pod, tick, tick_len);

        telemetry.advance_to(tick)?;
        telemetry.record_admitted(tick, admitted)?;
        telemetry.record(&policy_out.denied)?;
        telemetry.record(&step.records)?;
        if cfg.prefilter_enabled {
            prefilter.mitigation_update(&step.records, &cfg.prefilter, tick_len);
        }
        history.push(admitted as f64 / tick_len);

        let rps = telemetry.observed_rps();
        let legitimacy = telemetry.legitimacy_score(cfg.scaler.legitimacy_threshold);
        let (served_2xx, served_4xx_5xx) = step.records.iter().fold((0, 0), |(ok, err), r| match r.outcome {
            crate::flow::Outcome::Http2xx => (ok + 1, err),
            crate::flow::Outcome::Http4xx5xx => (ok, err + 1),
            _ => (ok, err),
        });
        snapshots.push(TickSnapshot {
            tick,
            offered,
            dropped_prefilter,
            dropped_policy: policy_out.denied.len() as u64,
            admitted,
            served_2xx,
            served_4xx_5xx,
            timed_out: step.timed_out,
            reachable_pods: cluster.reachable(),
            active_pods: cluster.active(),
            queue_depth: cluster.queue_depth() as u64,
            capacity_rps: cluster.capacity_rps(&cfg.pod),
            observed_rps: rps,
            legitimacy_score: legitimacy.score,
            legitimacy_samples: legitimacy.sample_count,
        });

        if tick % control_every == 0 {
            let forecast = forecaster.forecast(&history, horizon);
            let inputs = FuseInputs {
                reactive: reactive_desired(rps, &cfg.scaler),
                predictive: predictive_desired(&forecast.series, &cfg.scaler, tick_len),
                legitimacy,
                legit_rps: legitimacy.score * rps,
                current: cluster.active(),
                gate_enabled: cfg.gate_enabled,
            };
            let mut decision = fuse(&inputs, &cfg.scaler, &mut stabilizer, tick);
            decision.forecast_warning = forecast.warning;
            cluster.apply_decision(decision.desired, tick);
            decisions.push(decision);
        }
    }

    Ok(RunTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        tick_len,
        control_interval: cfg.control_interval,
        surge_start_tick: (cfg.profile.surge_start() / tick_len).round() as Tick,
        sustained_legit_rps: cfg.profile.peak_legit_rate(),
        snapshots,
        decisions,
        pods: cluster.lifecycle(),
        in_flight_at_end: cluster.in_flight(),
        blocklist_events: prefilter.blocklist_events(),
    })
}

/// Runs independent configs on separate threads; results keep input order.
pub fn run_all(configs: &[SimConfig]) -> Vec<Result<RunTrace>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run(c))).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::InvalidArgument("simulation thread panicked".into())))
            })
            .collect()
    })
}
