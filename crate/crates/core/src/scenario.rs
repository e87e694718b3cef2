//! TC1-TC9 scenario presets: the thermal parameter matrix rows plus the
//! traffic calibration that realizes each case's utilization regime.
//!
//! Thermal rows are frozen verbatim; the traffic side (link capacity,
//! burst multiplier, disruption shape) is calibrated so the stressed cases
//! actually cross the intents on a desk-scale run. Every run injects one
//! disruption at 20% of its duration: the flash window opens and, for the
//! degraded-cooling cases, HVAC drops.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::sim::{Disruption, SimInit, Simulator};
use crate::thermal::{InternalModel, ThermalParams, DEFAULT_GAIN_SCALE};
use crate::topology::NetworkGraph;
use crate::traffic::{build_flow_roster, FlashEventConfig, ServiceClass};

pub const SCENARIO_IDS: [&str; 9] = [
    "TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7", "TC8", "TC9",
];

/// The stress cases used for the headline recovery comparison.
pub const STRESS_IDS: [&str; 5] = ["TC5", "TC6", "TC7", "TC8", "TC9"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub thermal: ThermalParams<f64>,
    /// Documented internal-temperature band for the case, degrees C.
    pub internal_band_c: (f64, f64),
    /// Ambient regime label: "[18,27]", "<<18", ">>27".
    pub ambient_regime: String,
    /// Utilization regime label, e.g. "<<80%".
    pub util_regime: String,
    /// Latency regime label, e.g. "<<3ms".
    pub latency_regime: String,
    /// Environment temperature realizing the ambient regime.
    pub tau_env_c: f64,
    pub p_rack: f64,
    pub c_hvac_init: f64,
    /// Link capacity for the run; stress cases model a
    /// resource-constrained fabric with 100 Mb/s links.
    pub capacity_bps: f64,
    pub rate_scale: f64,
    /// Background flash process (rare benign bursts).
    pub flash: FlashEventConfig,
    /// Disruption placement as a fraction of the run duration.
    pub disruption_at_frac: f64,
    /// Length of the injected disruption burst, seconds.
    pub disruption_flash_s: f64,
    /// HVAC level after the disruption, when cooling degrades.
    pub disruption_c_hvac_to: Option<f64>,
    pub eval_duration_s: f64,
    pub train_duration_s: f64,
    pub seeds: Vec<u64>,
}

fn thermal_row(
    lambda_ambient: f64,
    lambda_sw: f64,
    kappa_rack: f64,
    kappa_cool: f64,
    psi_idle: f64,
    phi_sw: f64,
) -> ThermalParams<f64> {
    ThermalParams {
        lambda_ambient_s: lambda_ambient,
        lambda_sw_s: lambda_sw,
        kappa_rack,
        kappa_cool,
        psi_idle_c: psi_idle,
        phi_sw_c: phi_sw,
        gain_scale: DEFAULT_GAIN_SCALE,
    }
}

const TAU_IN_BAND: f64 = 22.0;
const TAU_COLD: f64 = 4.0;
const TAU_HOT: f64 = 38.0;

fn flash(arrival_rate_hz: f64, burst_multiplier: f64) -> FlashEventConfig {
    FlashEventConfig {
        arrival_rate_hz,
        burst_multiplier,
        duration_s: 2.0,
        covers: vec![
            ServiceClass::BestEffort,
            ServiceClass::CriticalDelayTolerant,
        ],
    }
}

#[allow(clippy::too_many_arguments)]
fn preset(
    id: &str,
    thermal: ThermalParams<f64>,
    internal_band_c: (f64, f64),
    ambient_regime: &str,
    util_regime: &str,
    latency_regime: &str,
    tau_env_c: f64,
    p_rack: f64,
    capacity_bps: f64,
    burst_multiplier: f64,
    disruption_flash_s: f64,
    disruption_c_hvac_to: Option<f64>,
) -> ScenarioConfig {
    ScenarioConfig {
        id: id.to_string(),
        thermal,
        internal_band_c,
        ambient_regime: ambient_regime.to_string(),
        util_regime: util_regime.to_string(),
        latency_regime: latency_regime.to_string(),
        tau_env_c,
        p_rack,
        c_hvac_init: 1.0,
        capacity_bps,
        rate_scale: 1.0,
        flash: flash(1.0 / 300.0, burst_multiplier),
        disruption_at_frac: 0.2,
        disruption_flash_s,
        disruption_c_hvac_to,
        eval_duration_s: 600.0,
        train_duration_s: 30.0,
        seeds: vec![23, 37, 49, 71, 42],
    }
}

/// Returns the frozen preset for a TC id.
pub fn load_scenario(id: &str) -> Result<ScenarioConfig> {
    let s = match id {
        "TC1" => preset(
            "TC1",
            thermal_row(300.0, 200.0, 0.80, 1.20, 5.0, 12.0),
            (20.0, 40.0),
            "[18,27]",
            "<<80%",
            "<<3ms",
            TAU_IN_BAND,
            0.5,
            1e9,
            3.0,
            60.0,
            None,
        ),
        "TC2" => preset(
            "TC2",
            thermal_row(310.0, 210.0, 0.82, 1.15, 5.1, 12.5),
            (20.0, 45.0),
            "[18,27]",
            "~80%",
            "~3ms",
            TAU_IN_BAND,
            0.5,
            1e8,
            16.0,
            90.0,
            None,
        ),
        "TC3" => preset(
            "TC3",
            thermal_row(330.0, 230.0, 0.80, 1.10, 5.3, 12.0),
            (25.0, 35.0),
            "<<18",
            "<<80%",
            "<<3ms",
            TAU_COLD,
            0.5,
            1e9,
            3.0,
            60.0,
            None,
        ),
        "TC4" => preset(
            "TC4",
            thermal_row(340.0, 240.0, 0.85, 1.05, 5.4, 12.5),
            (20.0, 50.0),
            ">>27",
            "<<80%",
            "<<3ms",
            TAU_HOT,
            0.5,
            1e9,
            3.0,
            60.0,
            None,
        ),
        "TC5" => preset(
            "TC5",
            thermal_row(360.0, 260.0, 0.90, 0.95, 5.8, 13.0),
            (25.0, 40.0),
            "<<18",
            ">=80%",
            "~3ms",
            TAU_COLD,
            0.5,
            1e8,
            18.0,
            120.0,
            Some(0.6),
        ),
        "TC6" => preset(
            "TC6",
            thermal_row(380.0, 280.0, 0.95, 0.90, 6.0, 13.5),
            (30.0, 55.0),
            ">>27",
            ">=80%",
            "~3ms",
            TAU_HOT,
            0.95,
            1e8,
            20.0,
            120.0,
            Some(0.0),
        ),
        "TC7" => preset(
            "TC7",
            thermal_row(420.0, 300.0, 1.00, 0.80, 6.5, 14.0),
            (20.0, 45.0),
            "[18,27]",
            ">>80%",
            ">=3ms",
            TAU_IN_BAND,
            0.6,
            1e8,
            26.0,
            120.0,
            Some(0.5),
        ),
        "TC8" => preset(
            "TC8",
            thermal_row(450.0, 330.0, 1.10, 0.70, 7.0, 14.5),
            (30.0, 55.0),
            "<<18",
            ">>80%",
            ">>3ms",
            TAU_COLD,
            0.9,
            1e8,
            30.0,
            120.0,
            Some(0.2),
        ),
        "TC9" => preset(
            "TC9",
            thermal_row(500.0, 380.0, 1.20, 0.60, 8.0, 15.0),
            (30.0, 55.0),
            ">>27",
            ">>90%",
            ">>5ms",
            TAU_HOT,
            1.0,
            1e8,
            40.0,
            150.0,
            Some(0.0),
        ),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(s)
}

pub fn all_scenarios() -> Vec<ScenarioConfig> {
    SCENARIO_IDS
        .iter()
        .map(|id| load_scenario(id).expect("built-in preset"))
        .collect()
}

/// Parses "TC1..TC9", "TC5-TC9", or a comma list like "TC1,TC4".
pub fn parse_scenario_list(spec: &str) -> Result<Vec<String>> {
    let spec = spec.trim();
    let range = |a: &str, b: &str| -> Result<Vec<String>> {
        let parse = |s: &str| -> Result<usize> {
            s.trim()
                .strip_prefix("TC")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| (1..=9).contains(&n))
                .ok_or_else(|| Error::UnknownScenario(s.trim().to_string()))
        };
        let (lo, hi) = (parse(a)?, parse(b)?);
        if lo > hi {
            return Err(Error::Invalid(format!("empty scenario range {spec}")));
        }
        Ok((lo..=hi).map(|n| format!("TC{n}")).collect())
    };
    if let Some((a, b)) = spec.split_once("..") {
        return range(a, b);
    }
    if spec.matches('-').count() == 1 && spec.contains("TC") {
        if let Some((a, b)) = spec.split_once('-') {
            if b.starts_with("TC") {
                return range(a, b);
            }
        }
    }
    let ids: Vec<String> = spec
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if ids.is_empty() {
        return Err(Error::Invalid("empty scenario list".into()));
    }
    for id in &ids {
        load_scenario(id)?;
    }
    Ok(ids)
}

impl ScenarioConfig {
    /// Builds one seeded, disruption-injected run over the given topology.
    /// Scenario link capacity overrides the topology default.
    pub fn build_sim(
        &self,
        topo: &NetworkGraph,
        sim_cfg: &SimConfig,
        seed: u64,
        duration_s: f64,
    ) -> Result<Simulator> {
        let mut graph = topo.clone();
        for l in &mut graph.links {
            l.capacity_bps = self.capacity_bps;
        }
        let roster = build_flow_roster(&graph, self.rate_scale);
        let init = SimInit {
            graph,
            roster,
            thermal_params: self.thermal,
            internal_model: InternalModel::FirstOrderCorrected,
            tau_env_c: self.tau_env_c,
            p_rack: self.p_rack,
            c_hvac_init: self.c_hvac_init,
            flash: self.flash.clone(),
            disruption: Some(Disruption {
                at_s: self.disruption_at_frac * duration_s,
                flash_duration_s: self.disruption_flash_s,
                c_hvac_to: self.disruption_c_hvac_to,
                tau_env_to: None,
                p_rack_to: None,
            }),
            duration_s,
            seed,
        };
        Simulator::new(init, sim_cfg.clone())
    }
}
