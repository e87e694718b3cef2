//! Observation assembly, the time-stamped knowledge base, normalization,
//! and intent-violation detection.
//!
//! The observation vector layout is frozen per topology/config: link
//! utilizations in link-id order, monitored-pair latencies in pair-id
//! order, then internal switch temperatures in switch-id order. Its
//! dimension eta = n_links + n_pairs + n_switches.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::TrafficMatrix;

/// The agent observation: traffic matrix plus internal temperatures at a
/// timestamp.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkState {
    pub tm: TrafficMatrix,
    /// Internal temperature per switch, switch-id order, degrees C.
    pub temps_c: Vec<f64>,
    /// Simulated time, seconds.
    pub t: f64,
}

impl NetworkState {
    pub fn eta(&self) -> usize {
        self.tm.link_utilization.len() + self.tm.path_latency.len() + self.temps_c.len()
    }

    /// Flattens to the frozen layout.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.eta());
        v.extend_from_slice(&self.tm.link_utilization);
        v.extend_from_slice(&self.tm.path_latency);
        v.extend_from_slice(&self.temps_c);
        v
    }
}

/// Operator intents: the QoS/SLA thresholds whose violation triggers the
/// self-healing loop.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QoSIntents {
    pub u_thr: f64,
    pub l_thr_s: f64,
    pub tau_thr_min_c: f64,
    pub tau_thr_max_c: f64,
}

impl Default for QoSIntents {
    fn default() -> Self {
        // 3 ms latency SLA; temperature band from the ASHRAE inlet floor
        // and the hottest internal band ceiling.
        Self {
            u_thr: 0.8,
            l_thr_s: 3e-3,
            tau_thr_min_c: 18.0,
            tau_thr_max_c: 55.0,
        }
    }
}

impl QoSIntents {
    pub fn validate(&self) -> Result<()> {
        if self.u_thr > 0.0
            && self.u_thr <= 1.0
            && self.l_thr_s > 0.0
            && self.tau_thr_min_c < self.tau_thr_max_c
        {
            Ok(())
        } else {
            Err(Error::Invalid("intents out of range".into()))
        }
    }
}

/// On-disk intents format: `{u_thr, l_thr_ms, temp_min_c, temp_max_c}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntentsFile {
    pub u_thr: f64,
    pub l_thr_ms: f64,
    pub temp_min_c: f64,
    pub temp_max_c: f64,
}

impl From<IntentsFile> for QoSIntents {
    fn from(f: IntentsFile) -> Self {
        Self {
            u_thr: f.u_thr,
            l_thr_s: f.l_thr_ms * 1e-3,
            tau_thr_min_c: f.temp_min_c,
            tau_thr_max_c: f.temp_max_c,
        }
    }
}

impl From<QoSIntents> for IntentsFile {
    fn from(i: QoSIntents) -> Self {
        Self {
            u_thr: i.u_thr,
            l_thr_ms: i.l_thr_s * 1e3,
            temp_min_c: i.tau_thr_min_c,
            temp_max_c: i.tau_thr_max_c,
        }
    }
}

/// Bounded FIFO of time-stamped network states.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    records: VecDeque<NetworkState>,
    capacity: usize,
}

pub const DEFAULT_KB_CAPACITY: usize = 100_000;

impl KnowledgeBase {
    pub fn new(capacity: usize) -> Self {
        Self {
            records: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record; rejects timestamps older than the latest.
    pub fn record(&mut self, state: NetworkState) -> Result<()> {
        if let Some(last) = self.records.back() {
            if state.t < last.t {
                return Err(Error::OutOfOrder {
                    t: state.t,
                    latest: last.t,
                });
            }
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(state);
        Ok(())
    }

    pub fn latest(&self) -> Option<&NetworkState> {
        self.records.back()
    }

    /// Records with t in [t0, t1], oldest first.
    pub fn window(&self, t0: f64, t1: f64) -> Vec<&NetworkState> {
        self.records
            .iter()
            .filter(|s| s.t >= t0 && s.t <= t1)
            .collect()
    }
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::new(DEFAULT_KB_CAPACITY)
    }
}

/// Result of checking a state against the intents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Link indices with u > u_thr.
    pub violated_links: Vec<usize>,
    /// Monitored-pair indices with l > l_thr.
    pub violated_pairs: Vec<usize>,
    /// Switch indices with tau >= tau_thr_max.
    pub hot_switches: Vec<usize>,
    /// Switch indices with tau <= tau_thr_min.
    pub cold_switches: Vec<usize>,
    /// True iff the traffic matrix violates the utilization or latency
    /// intent. Thermal findings alone do not trigger; they shape the
    /// action space.
    pub trigger: bool,
}

impl ViolationReport {
    pub fn any_thermal(&self) -> bool {
        !self.hot_switches.is_empty() || !self.cold_switches.is_empty()
    }
}

pub fn check_violations(state: &NetworkState, intents: &QoSIntents) -> ViolationReport {
    let violated_links: Vec<usize> = state
        .tm
        .link_utilization
        .iter()
        .enumerate()
        .filter(|(_, &u)| u > intents.u_thr)
        .map(|(i, _)| i)
        .collect();
    let violated_pairs: Vec<usize> = state
        .tm
        .path_latency
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > intents.l_thr_s)
        .map(|(i, _)| i)
        .collect();
    let hot_switches: Vec<usize> = state
        .temps_c
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= intents.tau_thr_max_c)
        .map(|(i, _)| i)
        .collect();
    let cold_switches: Vec<usize> = state
        .temps_c
        .iter()
        .enumerate()
        .filter(|(_, &t)| t <= intents.tau_thr_min_c)
        .map(|(i, _)| i)
        .collect();
    let trigger = !violated_links.is_empty() || !violated_pairs.is_empty();
    ViolationReport {
        violated_links,
        violated_pairs,
        hot_switches,
        cold_switches,
        trigger,
    }
}

/// Per-field normalization bounds for the Q-network input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormBounds {
    /// Utilization divisor (utilization above this clamps to 1).
    pub u_bound: f64,
    /// Latency divisor, seconds.
    pub l_bound_s: f64,
    pub temp_min_c: f64,
    pub temp_max_c: f64,
}

impl Default for NormBounds {
    fn default() -> Self {
        Self {
            u_bound: 1.5,
            l_bound_s: 10e-3,
            temp_min_c: 0.0,
            temp_max_c: 80.0,
        }
    }
}

/// Affine map of each field class into [0,1], clamped.
pub fn normalize_state(state: &NetworkState, bounds: &NormBounds) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.eta());
    for &u in &state.tm.link_utilization {
        v.push((u / bounds.u_bound).clamp(0.0, 1.0));
    }
    for &l in &state.tm.path_latency {
        v.push((l / bounds.l_bound_s).clamp(0.0, 1.0));
    }
    let span = bounds.temp_max_c - bounds.temp_min_c;
    for &t in &state.temps_c {
        v.push(((t - bounds.temp_min_c) / span).clamp(0.0, 1.0));
    }
    v
}
