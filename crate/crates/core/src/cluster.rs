//! Pod lifecycle, datapath convergence, and a single FIFO request queue
//! served jointly by every reachable pod.
//!
//! A pod goes `starting → ready` after `startup_delay`, then
//! `ready → reachable` after `datapath_convergence`. Only reachable pods add
//! service capacity. With zero convergence a pod that becomes ready at tick
//! `t` serves traffic at tick `t`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Arrival, FlowRecord, Outcome, Tick, TrafficKind};
use crate::l7policy::classify_response;
use crate::traffic::ArrivalBatch;

/// Convergence delay used to model iptables-style datapath programming.
pub const IPTABLES_CONVERGENCE_SECS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSpec {
    /// Seconds from creation until the pod is ready.
    pub startup_delay: f64,
    /// Requests per second one pod serves.
    pub capacity: f64,
    /// Seconds from ready until the load balancer routes to the pod.
    pub datapath_convergence: f64,
    /// Seconds a request may wait in the queue before timing out.
    pub request_timeout: f64,
}

impl Default for PodSpec {
    fn default() -> Self {
        PodSpec {
            startup_delay: 10.0,
            capacity: 50.0,
            datapath_convergence: 0.0,
            request_timeout: 5.0,
        }
    }
}

impl PodSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.startup_delay >= 0.0 && self.startup_delay.is_finite()) {
            return Err(Error::config("pod.startup_delay", "must be >= 0"));
        }
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::config("pod.capacity", "must be > 0"));
        }
        if !(self.datapath_convergence >= 0.0 && self.datapath_convergence.is_finite()) {
            return Err(Error::config("pod.datapath_convergence", "must be >= 0"));
        }
        if !(self.request_timeout > 0.0 && self.request_timeout.is_finite()) {
            return Err(Error::config("pod.request_timeout", "must be > 0"));
        }
        Ok(())
    }
}

fn ticks(secs: f64, tick_len: f64) -> Tick {
    ((secs / tick_len) - 1e-9).ceil().max(0.0) as Tick
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodPhase {
    Starting,
    Ready,
    Reachable,
    Terminating,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pod {
    pub id: u32,
    pub phase: PodPhase,
    pub phase_entered: Tick,
    pub created: Tick,
    pub ready_at: Option<Tick>,
    pub reachable_at: Option<Tick>,
    pub first_served: Option<Tick>,
    pub terminated_at: Option<Tick>,
}

impl Pod {
    fn new(id: u32, now: Tick) -> Self {
        Pod {
            id,
            phase: PodPhase::Starting,
            phase_entered: now,
            created: now,
            ready_at: None,
            reachable_at: None,
            first_served: None,
            terminated_at: None,
        }
    }

    fn enter(&mut self, phase: PodPhase, at: Tick) {
        debug_assert!(phase > self.phase, "pod phases only move forward");
        self.phase = phase;
        self.phase_entered = at;
        match phase {
            PodPhase::Ready => self.ready_at = Some(at),
            PodPhase::Reachable => self.reachable_at = Some(at),
            PodPhase::Terminating => self.terminated_at = Some(at),
            PodPhase::Starting => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Queued {
    enqueued: Tick,
    arrival: Arrival,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleAction {
    pub started: u32,
    pub terminated: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    /// Terminal records produced this tick: served (2xx, 4xx/5xx) and timed out.
    pub records: Vec<FlowRecord>,
    pub served: u64,
    pub timed_out: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ClusterState {
    pods: Vec<Pod>,
    retired: Vec<Pod>,
    next_id: u32,
    queue: VecDeque<Queued>,
    /// Connection floods that reached the service; they hold no capacity and
    /// only ever time out.
    half_open: VecDeque<Queued>,
    capacity_carry: f64,
}

impl ClusterState {
    /// A cluster with `replicas` pods already reachable at tick 0.
    pub fn new(replicas: u32) -> Self {
        let mut state = ClusterState::default();
        for _ in 0..replicas {
            let mut pod = Pod::new(state.next_id, 0);
            pod.enter(PodPhase::Ready, 0);
            pod.enter(PodPhase::Reachable, 0);
            state.pods.push(pod);
            state.next_id += 1;
        }
        state
    }

    pub fn pods(&self) -> &[Pod] {
        &self.pods
    }

    /// Every pod ever created, live ones first.
    pub fn lifecycle(&self) -> Vec<Pod> {
        let mut all: Vec<Pod> = self.pods.iter().chain(&self.retired).cloned().collect();
        all.sort_by_key(|p| p.id);
        all
    }

    /// Pods not being terminated.
    pub fn active(&self) -> u32 {
        self.pods.iter().filter(|p| p.phase != PodPhase::Terminating).count() as u32
    }

    pub fn reachable(&self) -> u32 {
        self.pods.iter().filter(|p| p.phase == PodPhase::Reachable).count() as u32
    }

    pub fn capacity_rps(&self, spec: &PodSpec) -> f64 {
        self.reachable() as f64 * spec.capacity
    }

    pub fn queue_depth(&self) -> usize {
        self.queue.len() + self.half_open.len()
    }

    /// Requests admitted but not yet terminated.
    pub fn in_flight(&self) -> u64 {
        self.queue_depth() as u64
    }

    /// Moves the active pod count towards `desired`.
    ///
    /// Scale-down terminates the newest pods first.
    pub fn apply_decision(&mut self, desired: u32, now: Tick) -> ScaleAction {
        let active = self.active();
        let mut action = ScaleAction::default();
        if desired > active {
            for _ in 0..desired - active {
                self.pods.push(Pod::new(self.next_id, now));
                self.next_id += 1;
                action.started += 1;
            }
        } else if desired < active {
            let mut victims: Vec<usize> = (0..self.pods.len())
                .filter(|&i| self.pods[i].phase != PodPhase::Terminating)
                .collect();
            victims.sort_by_key(|&i| std::cmp::Reverse((self.pods[i].created, self.pods[i].id)));
            for &i in victims.iter().take((active - desired) as usize) {
                self.pods[i].enter(PodPhase::Terminating, now);
                action.terminated += 1;
            }
        }
        action
    }

    fn advance_phases(&mut self, spec: &PodSpec, now: Tick, tick_len: f64) {
        let (retired, live): (Vec<Pod>, Vec<Pod>) = std::mem::take(&mut self.pods)
            .into_iter()
            .partition(|p| p.phase == PodPhase::Terminating && p.phase_entered < now);
        self.retired.extend(retired);
        self.pods = live;

        let startup = ticks(spec.startup_delay, tick_len);
        let convergence = ticks(spec.datapath_convergence, tick_len);
        for pod in &mut self.pods {
            if pod.phase == PodPhase::Starting && now >= pod.phase_entered + startup {
                let at = pod.phase_entered + startup;
                pod.enter(PodPhase::Ready, at);
            }
            if pod.phase == PodPhase::Ready && now >= pod.phase_entered + convergence {
                let at = pod.phase_entered + convergence;
                pod.enter(PodPhase::Reachable, at);
            }
        }
    }

    /// Advances one tick: phase transitions, timeouts, then FIFO service.
    pub fn step(&mut self, admitted: ArrivalBatch, spec: &PodSpec, now: Tick, tick_len: f64) -> StepOutput {
        self.advance_phases(spec, now, tick_len);
        let timeout = ticks(spec.request_timeout, tick_len).max(1);
        let mut out = StepOutput::default();

        for q in [&mut self.queue, &mut self.half_open] {
            while q.front().is_some_and(|r| r.enqueued + timeout <= now) {
                let r = q.pop_front().expect("checked");
                out.records.push(FlowRecord::new(now, r.arrival, Outcome::TimedOut));
                out.timed_out += 1;
            }
        }

        for arrival in admitted.arrivals {
            let item = Queued { enqueued: now, arrival };
            if arrival.kind == TrafficKind::Volumetric {
                self.half_open.push_back(item);
            } else {
                self.queue.push_back(item);
            }
        }

        let budget = self.capacity_rps(spec) * tick_len + self.capacity_carry;
        let slots = budget.floor();
        self.capacity_carry = budget - slots;
        let n = (slots as usize).min(self.queue.len());
        for r in self.queue.drain(..n) {
            let outcome = classify_response(r.arrival.kind).expect("volumetric traffic is never queued for service");
            out.records.push(FlowRecord::new(now, r.arrival, outcome));
        }
        out.served = n as u64;
        if n > 0 {
            for pod in self.pods.iter_mut().filter(|p| p.phase == PodPhase::Reachable) {
                pod.first_served.get_or_insert(now);
            }
        }
        out
    }
}
