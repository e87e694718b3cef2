//! The ACT stage: flow-rule installation modeled as a pure delay.
//!
//! Every decision becomes an [`ActuationEvent`] whose effect lands at the
//! first tick boundary at or after `t_effective`; the installation delay is
//! drawn uniformly from the observed 1.0-7.8 ms envelope.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dqn::ActionSpace;
use crate::error::Result;
use crate::knowledge::ViolationReport;
use crate::sim::Simulator;

/// Flow-rule installation delay bounds, seconds.
pub const MIN_INSTALL_DELAY_S: f64 = 1.0e-3;
pub const MAX_INSTALL_DELAY_S: f64 = 7.8e-3;

pub fn draw_install_delay(rng: &mut impl Rng) -> f64 {
    rng.gen_range(MIN_INSTALL_DELAY_S..=MAX_INSTALL_DELAY_S)
}

/// Applies a decided action to the simulator: draws the installation
/// delay, schedules the effect for the first tick at or past the
/// effective time, and logs the event. A stale action (its trigger
/// already cleared when it lands) is applied anyway and marked.
pub fn apply_action(
    sim: &mut Simulator,
    action_index: usize,
    space: &ActionSpace,
    report: &ViolationReport,
) -> Result<ActuationEvent> {
    sim.schedule_agent_action(action_index, space, report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActuationEvent {
    /// Decision time, seconds.
    pub t_decide: f64,
    /// Human-readable action label.
    pub action: String,
    /// Flat action index.
    pub action_index: usize,
    /// Decision time plus the drawn installation delay.
    pub t_effective: f64,
    /// Tick index at which the effect applies (first tick boundary at or
    /// after `t_effective`).
    pub apply_tick: u64,
    /// Time the effect actually applied; filled at application.
    pub t_applied: Option<f64>,
    /// True when the triggering condition had already cleared by the time
    /// the action landed. Stale actions are applied anyway; the agent must
    /// learn their cost.
    pub stale: bool,
}
