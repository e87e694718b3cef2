//! Simulation configuration and the `AUTOHEAL_CONFIG` override file.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::knowledge::{NormBounds, QoSIntents};

/// Engine-level knobs shared by every policy and scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulated tick length in seconds. Also the observe cadence.
    pub tick_s: f64,
    /// Redundant paths kept per monitored pair.
    pub k_paths: usize,
    pub intents: QoSIntents,
    pub norm: NormBounds,
    /// Multiplier applied to a throttled service class's offered rate.
    pub throttle_factor: f64,
    /// Loss fraction added per degree C above the max temperature intent.
    pub thermal_loss_coeff_per_c: f64,
    pub mtu_bytes: f64,
    /// Baseline polling/detection delay in seconds.
    pub detection_delay_s: f64,
    /// Consecutive violation-free ticks that count as recovery.
    pub recovery_streak_ticks: u32,
    /// Control decisions allowed per episode.
    pub decision_cap: u32,
    /// Knowledge-base ring capacity.
    pub kb_capacity: usize,
    /// Cap on enumerated equal-cost paths for ECMP.
    pub max_ecmp_paths: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_s: 1e-3,
            k_paths: 4,
            intents: QoSIntents::default(),
            norm: NormBounds::default(),
            throttle_factor: 0.5,
            thermal_loss_coeff_per_c: 0.002,
            mtu_bytes: 1500.0,
            detection_delay_s: 2.0,
            recovery_streak_ticks: 10,
            decision_cap: 200,
            kb_capacity: 100_000,
            max_ecmp_paths: 8,
        }
    }
}

/// Partial override loaded from the JSON file named by `AUTOHEAL_CONFIG`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverride {
    pub tick_s: Option<f64>,
    pub k_paths: Option<usize>,
    pub u_thr: Option<f64>,
    pub l_thr_ms: Option<f64>,
    pub temp_min_c: Option<f64>,
    pub temp_max_c: Option<f64>,
    pub throttle_factor: Option<f64>,
    pub thermal_loss_coeff_per_c: Option<f64>,
    pub detection_delay_s: Option<f64>,
    pub recovery_streak_ticks: Option<u32>,
    pub decision_cap: Option<u32>,
}

impl ConfigOverride {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn apply(&self, cfg: &mut SimConfig) {
        if let Some(v) = self.tick_s {
            cfg.tick_s = v;
        }
        if let Some(v) = self.k_paths {
            cfg.k_paths = v;
        }
        if let Some(v) = self.u_thr {
            cfg.intents.u_thr = v;
        }
        if let Some(v) = self.l_thr_ms {
            cfg.intents.l_thr_s = v * 1e-3;
        }
        if let Some(v) = self.temp_min_c {
            cfg.intents.tau_thr_min_c = v;
        }
        if let Some(v) = self.temp_max_c {
            cfg.intents.tau_thr_max_c = v;
        }
        if let Some(v) = self.throttle_factor {
            cfg.throttle_factor = v;
        }
        if let Some(v) = self.thermal_loss_coeff_per_c {
            cfg.thermal_loss_coeff_per_c = v;
        }
        if let Some(v) = self.detection_delay_s {
            cfg.detection_delay_s = v;
        }
        if let Some(v) = self.recovery_streak_ticks {
            cfg.recovery_streak_ticks = v;
        }
        if let Some(v) = self.decision_cap {
            cfg.decision_cap = v;
        }
    }
}
