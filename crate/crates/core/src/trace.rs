//! JSONL trace records: one tick record per line, with thermal columns and
//! violation events inlined; actuation events go to a sibling log.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::knowledge::ViolationReport;
use crate::sim::{Simulator, TickOutput};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermalSample {
    pub switch: u32,
    pub tau_amb_c: f64,
    pub tau_int_c: f64,
    pub c_hvac: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    /// Per-link utilization, link-id order.
    pub u: Vec<f64>,
    /// Per monitored pair latency, milliseconds.
    pub l_ms: Vec<f64>,
    /// Aggregate loss fraction.
    pub loss: f64,
    pub throughput_mbps: f64,
    pub thermal: Vec<ThermalSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<ViolationReport>,
}

impl TickRecord {
    pub fn from_tick(out: &TickOutput, sim: &Simulator) -> Self {
        let th = sim.thermal_state();
        let thermal = sim
            .graph()
            .switches
            .iter()
            .enumerate()
            .map(|(k, sw)| ThermalSample {
                switch: sw.id.0,
                tau_amb_c: th.tau_ambient_c[k],
                tau_int_c: th.tau_internal_c[k],
                c_hvac: th.c_hvac[k],
            })
            .collect();
        Self {
            t: out.t,
            u: out.state.tm.link_utilization.clone(),
            l_ms: out.state.tm.path_latency.iter().map(|l| l * 1e3).collect(),
            loss: out.loss,
            throughput_mbps: out.delivered_bps / 1e6,
            thermal,
            violation: if out.report.trigger || out.report.any_thermal() {
                Some(out.report.clone())
            } else {
                None
            },
        }
    }
}

/// Streams serde-serializable records as JSON lines.
pub struct JsonlWriter<W: Write> {
    inner: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.inner, record)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
