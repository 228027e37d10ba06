//! Seeded, deterministic traffic generation.
//!
//! A [`TrafficProfile`] is a list of phases with linearly interpolated rates.
//! [`ArrivalGenerator`] turns it into one [`ArrivalBatch`] per tick. The
//! deterministic-rate model emits `round(C(t1)) - round(C(t0))` arrivals per
//! tick, where `C` is the cumulative integral of the rate, so the total over a
//! run equals `round(∫ rate dt)` exactly. Kinds are split with per-kind
//! rounding carries and interleaved evenly; source identities are drawn from a
//! per-tick ChaCha stream keyed by `(seed, tick)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Arrival, SourceId, Tick, TrafficKind};

/// First source id of each class. Classes never share identities.
pub const LEGIT_SOURCE_BASE: u32 = 0;
pub const MALFORMED_SOURCE_BASE: u32 = 1_000_000;
pub const VOLUMETRIC_SOURCE_BASE: u32 = 2_000_000;

pub const FLASH_CROWD_PEAK_RPS: f64 = 500.0;
pub const FLASH_CROWD_RAMP_SECS: f64 = 30.0;
pub const FLASH_CROWD_SUSTAIN_SECS: f64 = 300.0;
pub const DEFAULT_SEED: u64 = 42;

const MIX_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalModel {
    #[default]
    DeterministicRate,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficMix {
    pub legit_fraction: f64,
    pub malformed_fraction: f64,
    pub volumetric_fraction: f64,
    /// Distinct identities generating legitimate traffic.
    pub legit_sources: u32,
    /// Distinct identities per attack class (malformed, volumetric).
    pub attack_sources: u32,
}

impl Default for TrafficMix {
    fn default() -> Self {
        TrafficMix {
            legit_fraction: 1.0,
            malformed_fraction: 0.0,
            volumetric_fraction: 0.0,
            legit_sources: 100,
            attack_sources: 20,
        }
    }
}

impl TrafficMix {
    pub fn legit_only() -> Self {
        Self::default()
    }

    pub fn new(legit: f64, malformed: f64, volumetric: f64) -> Result<Self> {
        let mix = TrafficMix {
            legit_fraction: legit,
            malformed_fraction: malformed,
            volumetric_fraction: volumetric,
            ..Self::default()
        };
        mix.validate("mix")?;
        Ok(mix)
    }

    pub fn fraction(&self, kind: TrafficKind) -> f64 {
        match kind {
            TrafficKind::Legit => self.legit_fraction,
            TrafficKind::Malformed => self.malformed_fraction,
            TrafficKind::Volumetric => self.volumetric_fraction,
        }
    }

    fn fractions(&self) -> [f64; 3] {
        [self.legit_fraction, self.malformed_fraction, self.volumetric_fraction]
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        for (name, f) in [
            ("legit_fraction", self.legit_fraction),
            ("malformed_fraction", self.malformed_fraction),
            ("volumetric_fraction", self.volumetric_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("{field}.{name}"), "must lie in [0, 1]"));
            }
        }
        let sum: f64 = self.fractions().iter().sum();
        if (sum - 1.0).abs() > MIX_SUM_TOLERANCE {
            return Err(Error::config(field, format!("fractions sum to {sum}, expected 1")));
        }
        if self.legit_sources == 0 {
            return Err(Error::config(format!("{field}.legit_sources"), "must be >= 1"));
        }
        if self.attack_sources == 0 {
            return Err(Error::config(format!("{field}.attack_sources"), "must be >= 1"));
        }
        Ok(())
    }

    fn pool(&self, kind: TrafficKind) -> (u32, u32) {
        match kind {
            TrafficKind::Legit => (LEGIT_SOURCE_BASE, self.legit_sources),
            TrafficKind::Malformed => (MALFORMED_SOURCE_BASE, self.attack_sources),
            TrafficKind::Volumetric => (VOLUMETRIC_SOURCE_BASE, self.attack_sources),
        }
    }
}

/// Class of a source id, as assigned by the generator.
pub fn source_class(source: SourceId) -> TrafficKind {
    match source.0 {
        id if id >= VOLUMETRIC_SOURCE_BASE => TrafficKind::Volumetric,
        id if id >= MALFORMED_SOURCE_BASE => TrafficKind::Malformed,
        _ => TrafficKind::Legit,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    /// Seconds.
    pub duration: f64,
    /// Requests per second at the start of the phase.
    pub start_rate: f64,
    /// Requests per second at the end of the phase; linear in between.
    pub end_rate: f64,
    #[serde(default)]
    pub mix: TrafficMix,
}

impl Phase {
    pub fn ramp(duration: f64, start_rate: f64, end_rate: f64, mix: TrafficMix) -> Self {
        Phase {
            duration,
            start_rate,
            end_rate,
            mix,
        }
    }

    pub fn constant(duration: f64, rate: f64, mix: TrafficMix) -> Self {
        Self::ramp(duration, rate, rate, mix)
    }

    fn rate_at(&self, offset: f64) -> f64 {
        self.start_rate + (self.end_rate - self.start_rate) * (offset / self.duration)
    }

    /// Integral of the rate over `[a, b]`, offsets relative to the phase start.
    fn integral(&self, a: f64, b: f64) -> f64 {
        (b - a) * (self.rate_at(a) + self.rate_at(b)) / 2.0
    }

    pub fn is_ramp_up(&self) -> bool {
        self.end_rate > self.start_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficProfile {
    pub phases: Vec<Phase>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub arrival_model: ArrivalModel,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl TrafficProfile {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        let profile = TrafficProfile {
            phases,
            seed: DEFAULT_SEED,
            arrival_model: ArrivalModel::default(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_arrival_model(mut self, model: ArrivalModel) -> Self {
        self.arrival_model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("profile.phases", "must not be empty"));
        }
        for (i, p) in self.phases.iter().enumerate() {
            let field = format!("profile.phases[{i}]");
            if !(p.duration > 0.0 && p.duration.is_finite()) {
                return Err(Error::config(format!("{field}.duration"), "must be > 0"));
            }
            if !(p.start_rate >= 0.0 && p.start_rate.is_finite()) {
                return Err(Error::config(format!("{field}.start_rate"), "must be >= 0"));
            }
            if !(p.end_rate >= 0.0 && p.end_rate.is_finite()) {
                return Err(Error::config(format!("{field}.end_rate"), "must be >= 0"));
            }
            p.mix.validate(&format!("{field}.mix"))?;
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn peak_rate(&self) -> f64 {
        self.phases
            .iter()
            .map(|p| p.start_rate.max(p.end_rate))
            .fold(0.0, f64::max)
    }

    /// Highest legitimate request rate reached by any phase.
    pub fn peak_legit_rate(&self) -> f64 {
        self.phases
            .iter()
            .map(|p| p.start_rate.max(p.end_rate) * p.mix.legit_fraction)
            .fold(0.0, f64::max)
    }

    /// Start time (seconds) of the first ramp-up phase, or 0 when there is none.
    pub fn surge_start(&self) -> f64 {
        let mut start = 0.0;
        for p in &self.phases {
            if p.is_ramp_up() {
                return start;
            }
            start += p.duration;
        }
        0.0
    }

    /// Phase containing time `t` and its start time.
    pub fn phase_at(&self, t: f64) -> Option<(&Phase, f64)> {
        let mut start = 0.0;
        for p in &self.phases {
            if t < start + p.duration {
                return (t >= start).then_some((p, start));
            }
            start += p.duration;
        }
        None
    }

    /// Offered rate at time `t`; zero outside the profile.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self.phase_at(t) {
            Some((p, start)) => p.rate_at(t - start),
            None => 0.0,
        }
    }

    /// Per-kind integral of the rate over `[t0, t1]`.
    fn kind_integrals(&self, t0: f64, t1: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut start = 0.0;
        for p in &self.phases {
            let end = start + p.duration;
            let a = t0.max(start);
            let b = t1.min(end);
            if b > a {
                let mass = p.integral(a - start, b - start);
                for (o, f) in out.iter_mut().zip(p.mix.fractions()) {
                    *o += mass * f;
                }
            }
            start = end;
        }
        out
    }

    /// Cumulative offered requests over `[0, t]`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        let mut start = 0.0;
        for p in &self.phases {
            if t <= start {
                break;
            }
            let b = (t - start).min(p.duration);
            total += p.integral(0.0, b);
            start += p.duration;
        }
        total
    }
}

/// Surge to 500 RPS over 30 s, then 300 s sustained; all legitimate.
pub fn flash_crowd_profile() -> TrafficProfile {
    TrafficProfile {
        phases: vec![
            Phase::ramp(
                FLASH_CROWD_RAMP_SECS,
                0.0,
                FLASH_CROWD_PEAK_RPS,
                TrafficMix::legit_only(),
            ),
            Phase::constant(FLASH_CROWD_SUSTAIN_SECS, FLASH_CROWD_PEAK_RPS, TrafficMix::legit_only()),
        ],
        seed: DEFAULT_SEED,
        arrival_model: ArrivalModel::DeterministicRate,
    }
}

/// Attack pool of the mixed-traffic scenario. Small enough that per-source
/// error counts trip the mitigation rule early in the run.
pub const MIXED_ATTACK_SOURCES: u32 = 10;

/// 80% legitimate / 20% malformed at 500 RPS for 300 s.
pub fn mixed_attack_profile() -> TrafficProfile {
    mixed_attack_profile_with(FLASH_CROWD_PEAK_RPS, FLASH_CROWD_SUSTAIN_SECS)
}

pub fn mixed_attack_profile_with(rate: f64, duration: f64) -> TrafficProfile {
    let mix = TrafficMix {
        legit_fraction: 0.8,
        malformed_fraction: 0.2,
        volumetric_fraction: 0.0,
        attack_sources: MIXED_ATTACK_SOURCES,
        ..TrafficMix::default()
    };
    TrafficProfile {
        phases: vec![Phase::constant(duration, rate, mix)],
        seed: DEFAULT_SEED,
        arrival_model: ArrivalModel::DeterministicRate,
    }
}

/// Repeats `cycle` back to back `cycles` times.
pub fn training_history_profile(cycles: usize, cycle: &TrafficProfile) -> Result<TrafficProfile> {
    if cycles == 0 {
        return Err(Error::InvalidArgument("cycles must be >= 1".into()));
    }
    let phases = (0..cycles).flat_map(|_| cycle.phases.iter().cloned()).collect();
    Ok(TrafficProfile {
        phases,
        seed: cycle.seed,
        arrival_model: cycle.arrival_model,
    })
}

/// Five-minute recurring surge: the flash-crowd ramp followed by 270 s at peak.
pub fn recurring_surge_cycle() -> TrafficProfile {
    TrafficProfile {
        phases: vec![
            Phase::ramp(
                FLASH_CROWD_RAMP_SECS,
                0.0,
                FLASH_CROWD_PEAK_RPS,
                TrafficMix::legit_only(),
            ),
            Phase::constant(
                300.0 - FLASH_CROWD_RAMP_SECS,
                FLASH_CROWD_PEAK_RPS,
                TrafficMix::legit_only(),
            ),
        ],
        seed: DEFAULT_SEED,
        arrival_model: ArrivalModel::DeterministicRate,
    }
}

/// Sixty minutes of the recurring surge pattern.
pub fn default_training_history() -> TrafficProfile {
    training_history_profile(12, &recurring_surge_cycle()).expect("12 cycles is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalBatch {
    pub tick: Tick,
    pub arrivals: Vec<Arrival>,
}

impl ArrivalBatch {
    pub fn empty(tick: Tick) -> Self {
        ArrivalBatch {
            tick,
            arrivals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }
}

/// Sequential batch generator carrying rounding state between ticks.
#[derive(Debug, Clone)]
pub struct ArrivalGenerator {
    profile: TrafficProfile,
    tick_len: f64,
    next_tick: Tick,
    kind_carry: [f64; 3],
}

impl ArrivalGenerator {
    pub fn new(profile: TrafficProfile, tick_len: f64) -> Result<Self> {
        profile.validate()?;
        if !(tick_len > 0.0 && tick_len.is_finite()) {
            return Err(Error::config("tick_len", "must be > 0"));
        }
        Ok(ArrivalGenerator {
            profile,
            tick_len,
            next_tick: 0,
            kind_carry: [0.0; 3],
        })
    }

    pub fn profile(&self) -> &TrafficProfile {
        &self.profile
    }

    pub fn next_tick(&self) -> Tick {
        self.next_tick
    }

    /// Number of ticks with non-empty time overlap with the profile.
    pub fn ticks_in_profile(&self) -> Tick {
        (self.profile.duration() / self.tick_len - 1e-9).ceil().max(0.0) as Tick
    }

    /// Emits the batch for the next tick.
    pub fn next_batch(&mut self) -> ArrivalBatch {
        let tick = self.next_tick;
        self.next_tick += 1;
        let Some(window) = self.window(tick) else {
            return ArrivalBatch::empty(tick);
        };
        let mut rng = tick_rng(self.profile.seed, tick);
        let mix = self.mix_at(window.0).clone();
        let counts = match self.profile.arrival_model {
            ArrivalModel::DeterministicRate => {
                let n = self.deterministic_total(window);
                self.split_kinds(n, window)
            }
            ArrivalModel::Poisson => {
                let expected = self.profile.cumulative(window.1) - self.profile.cumulative(window.0);
                let n = sample_poisson(&mut rng, expected);
                return ArrivalBatch {
                    tick,
                    arrivals: self.draw_kinds(&mut rng, n, window, &mix),
                };
            }
        };
        ArrivalBatch {
            tick,
            arrivals: interleave(counts)
                .into_iter()
                .map(|kind| Arrival {
                    source: draw_source(&mut rng, &mix, kind),
                    kind,
                })
                .collect(),
        }
    }

    /// Arrival count of the next tick without drawing kinds or sources.
    /// Always equals the length of the batch `next_batch` would emit.
    pub fn next_total(&mut self) -> u64 {
        let tick = self.next_tick;
        self.next_tick += 1;
        let Some(window) = self.window(tick) else {
            return 0;
        };
        match self.profile.arrival_model {
            ArrivalModel::DeterministicRate => {
                let n = self.deterministic_total(window);
                self.split_kinds(n, window);
                n
            }
            ArrivalModel::Poisson => {
                let expected = self.profile.cumulative(window.1) - self.profile.cumulative(window.0);
                sample_poisson(&mut tick_rng(self.profile.seed, tick), expected)
            }
        }
    }

    /// Advances past `ticks` ticks, updating rounding state without materialising arrivals.
    fn skip_ticks(&mut self, ticks: Tick) {
        for _ in 0..ticks {
            let tick = self.next_tick;
            self.next_tick += 1;
            if self.profile.arrival_model == ArrivalModel::DeterministicRate {
                if let Some(window) = self.window(tick) {
                    let n = self.deterministic_total(window);
                    self.split_kinds(n, window);
                }
            }
        }
    }

    fn window(&self, tick: Tick) -> Option<(f64, f64)> {
        let duration = self.profile.duration();
        let t0 = tick as f64 * self.tick_len;
        if t0 >= duration {
            return None;
        }
        Some((t0, ((tick + 1) as f64 * self.tick_len).min(duration)))
    }

    fn mix_at(&self, t: f64) -> &TrafficMix {
        let (phase, _) = self.profile.phase_at(t).expect("window lies inside the profile");
        &phase.mix
    }

    fn deterministic_total(&self, (t0, t1): (f64, f64)) -> u64 {
        let hi = self.profile.cumulative(t1).round();
        let lo = self.profile.cumulative(t0).round();
        (hi - lo).max(0.0) as u64
    }

    fn kind_weights(&self, (t0, t1): (f64, f64)) -> [f64; 3] {
        let mass = self.profile.kind_integrals(t0, t1);
        let total: f64 = mass.iter().sum();
        if total > 0.0 {
            mass.map(|m| m / total)
        } else {
            self.mix_at(t0).fractions()
        }
    }

    /// Splits `n` arrivals across kinds with per-kind rounding carries.
    fn split_kinds(&mut self, n: u64, window: (f64, f64)) -> [u64; 3] {
        let weights = self.kind_weights(window);
        let mut emit = [0u64; 3];
        for i in 0..3 {
            if weights[i] <= 0.0 {
                self.kind_carry[i] = 0.0;
                continue;
            }
            self.kind_carry[i] += n as f64 * weights[i];
            emit[i] = (self.kind_carry[i] + 1e-9).floor().max(0.0) as u64;
        }
        let residual = |carry: &[f64; 3], emit: &[u64; 3], i: usize| carry[i] - emit[i] as f64;
        let mut total: u64 = emit.iter().sum();
        while total > n {
            let i = (0..3)
                .filter(|&i| emit[i] > 0)
                .min_by(|&a, &b| residual(&self.kind_carry, &emit, a).total_cmp(&residual(&self.kind_carry, &emit, b)))
                .expect("total > 0 implies some emitted kind");
            emit[i] -= 1;
            total -= 1;
        }
        while total < n {
            let i = (0..3)
                .filter(|&i| weights[i] > 0.0)
                .max_by(|&a, &b| {
                    residual(&self.kind_carry, &emit, a)
                        .total_cmp(&residual(&self.kind_carry, &emit, b))
                        .then(b.cmp(&a))
                })
                .expect("weights sum to 1");
            emit[i] += 1;
            total += 1;
        }
        for (carry, &n) in self.kind_carry.iter_mut().zip(&emit) {
            *carry -= n as f64;
        }
        emit
    }

    fn draw_kinds(&self, rng: &mut ChaCha8Rng, n: u64, window: (f64, f64), mix: &TrafficMix) -> Vec<Arrival> {
        let weights = self.kind_weights(window);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let kind = pick_kind(u, &weights);
                Arrival {
                    source: draw_source(rng, mix, kind),
                    kind,
                }
            })
            .collect()
    }
}

impl Iterator for ArrivalGenerator {
    type Item = ArrivalBatch;

    fn next(&mut self) -> Option<ArrivalBatch> {
        (self.next_tick < self.ticks_in_profile()).then(|| self.next_batch())
    }
}

/// Batch for `tick` of `profile`, independent of any prior call.
///
/// Replays the rounding carries from tick 0, so this is O(tick); the engine
/// uses [`ArrivalGenerator`] directly.
pub fn generate(profile: &TrafficProfile, tick: Tick, tick_len: f64) -> Result<ArrivalBatch> {
    let mut gen = ArrivalGenerator::new(profile.clone(), tick_len)?;
    gen.skip_ticks(tick);
    Ok(gen.next_batch())
}

fn tick_rng(seed: u64, tick: Tick) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tick);
    rng
}

fn sample_poisson(rng: &mut ChaCha8Rng, expected: f64) -> u64 {
    if expected <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(expected).expect("positive finite mean");
    dist.sample(rng) as u64
}

fn pick_kind(u: f64, weights: &[f64; 3]) -> TrafficKind {
    let mut acc = 0.0;
    let mut last = TrafficKind::Legit;
    for kind in TrafficKind::ALL {
        let w = weights[kind.index()];
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = kind;
        if u < acc {
            return kind;
        }
    }
    last
}

fn draw_source(rng: &mut ChaCha8Rng, mix: &TrafficMix, kind: TrafficKind) -> SourceId {
    let (base, pool) = mix.pool(kind);
    SourceId(base + rng.random_range(0..pool))
}

/// Smooth weighted round-robin: spreads each kind evenly through the batch.
fn interleave(counts: [u64; 3]) -> Vec<TrafficKind> {
    let n: u64 = counts.iter().sum();
    let mut current = [0i64; 3];
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        for i in 0..3 {
            current[i] += counts[i] as i64;
        }
        let best = (0..3)
            .max_by(|&a, &b| current[a].cmp(&current[b]).then(b.cmp(&a)))
            .unwrap();
        current[best] -= n as i64;
        out.push(TrafficKind::ALL[best]);
    }
    out
}
