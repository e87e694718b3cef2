//! Lumped-capacity switch thermal model.
//!
//! Each switch carries two coupled first-order states: the ambient (inlet)
//! temperature driven by the environment, rack load, and HVAC cooling, and
//! the internal temperature driven by the inlet air plus idle and
//! load-dependent heating. Integration is explicit Euler; the scenario time
//! constants are hundreds of seconds, far above the simulation tick.
//!
//! Two internal-temperature forms exist. `Literal` subtracts normalized
//! utilization from a temperature sum and has no relaxation toward the
//! internal state itself, so it grows without bound under constant load;
//! it is kept behind a flag for fidelity audits. The default
//! `FirstOrderCorrected` model uses the standard first-order relaxation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThermalParams<F> {
    /// Ambient thermal time constant, seconds.
    pub lambda_ambient_s: F,
    /// Internal (switch) thermal time constant, seconds.
    pub lambda_sw_s: F,
    /// Rack-load heating gain.
    pub kappa_rack: F,
    /// HVAC cooling gain.
    pub kappa_cool: F,
    /// Idle temperature rise above inlet, degrees C.
    pub psi_idle_c: F,
    /// Load-dependent heating gain, degrees C per unit utilization.
    pub phi_sw_c: F,
    /// Dimensionless scale applied to the kappa gains. The source gains are
    /// unitless; at unit scale with lambda in the hundreds of seconds they
    /// would drive hundred-degree offsets, so the default is 0.01.
    pub gain_scale: F,
}

impl<F: Real> ThermalParams<F> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_ambient_s > F::zero()
            && self.lambda_sw_s > F::zero()
            && self.psi_idle_c >= F::zero()
            && self.phi_sw_c >= F::zero()
            && self.gain_scale > F::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("thermal parameters out of range".into()))
        }
    }
}

pub const DEFAULT_GAIN_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InternalModel {
    /// d(tau_int)/dt = (tau_amb + psi - U)/lambda_sw + phi*U; no
    /// relaxation term, unbounded under constant load.
    Literal,
    /// d(tau_int)/dt = (tau_amb + psi + phi*U - tau_int)/lambda_sw.
    FirstOrderCorrected,
}

/// Per-switch thermal state plus the exogenous drive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermalState<F> {
    pub tau_ambient_c: Vec<F>,
    pub tau_internal_c: Vec<F>,
    /// External environment temperature, degrees C.
    pub tau_env_c: F,
    /// Normalized rack IT load in [0,1]; exogenous per scenario.
    pub p_rack: F,
    /// Per-switch HVAC cooling level in [0,1]; 0 is degraded, 1 is full.
    pub c_hvac: Vec<F>,
}

impl<F: Real> ThermalState<F> {
    /// State with every switch at the analytic steady point for the given
    /// drive and per-switch utilization.
    pub fn at_steady(
        params: &ThermalParams<F>,
        tau_env_c: F,
        p_rack: F,
        c_hvac: F,
        utilization: &[F],
    ) -> Self {
        let n = utilization.len();
        let mut tau_ambient_c = Vec::with_capacity(n);
        let mut tau_internal_c = Vec::with_capacity(n);
        for &u in utilization {
            let (a, i) = steady_state(params, tau_env_c, p_rack, c_hvac, u);
            tau_ambient_c.push(a);
            tau_internal_c.push(i);
        }
        Self {
            tau_ambient_c,
            tau_internal_c,
            tau_env_c,
            p_rack,
            c_hvac: vec![c_hvac; n],
        }
    }

    pub fn n_switches(&self) -> usize {
        self.tau_ambient_c.len()
    }

    pub fn finite(&self) -> bool {
        self.tau_ambient_c.iter().all(|t| t.is_finite())
            && self.tau_internal_c.iter().all(|t| t.is_finite())
    }
}

fn check_dt<F: Real>(dt: F, lambda: F) -> Result<()> {
    let max = lambda / F::from_f64(10.0);
    if dt <= F::zero() || dt > max {
        return Err(Error::StepSize {
            dt: dt.to_f64(),
            max: max.to_f64(),
        });
    }
    Ok(())
}

/// One explicit-Euler step of the ambient (inlet) temperatures.
pub fn step_ambient<F: Real>(
    state: &mut ThermalState<F>,
    params: &ThermalParams<F>,
    dt: F,
) -> Result<()> {
    check_dt(dt, params.lambda_ambient_s)?;
    let gain = params.gain_scale;
    for k in 0..state.n_switches() {
        let tau = state.tau_ambient_c[k];
        let drive = (state.tau_env_c - tau) / params.lambda_ambient_s
            + gain * (params.kappa_rack * state.p_rack - params.kappa_cool * state.c_hvac[k]);
        state.tau_ambient_c[k] = tau + dt * drive;
    }
    Ok(())
}

/// One explicit-Euler step of the internal temperatures.
///
/// Utilization samples outside [0,1] are clamped; the return value counts
/// how many were clamped so callers can surface a warning event.
pub fn step_internal<F: Real>(
    state: &mut ThermalState<F>,
    params: &ThermalParams<F>,
    utilization: &[F],
    dt: F,
    model: InternalModel,
) -> Result<usize> {
    check_dt(dt, params.lambda_sw_s)?;
    if utilization.len() != state.n_switches() {
        return Err(Error::DimensionMismatch {
            expected: state.n_switches(),
            got: utilization.len(),
        });
    }
    let mut clamped = 0usize;
    for ((tau, &tau_amb), &u_raw) in state
        .tau_internal_c
        .iter_mut()
        .zip(&state.tau_ambient_c)
        .zip(utilization)
    {
        let mut u = u_raw;
        if u < F::zero() || u > F::one() {
            u = u.max(F::zero()).min(F::one());
            clamped += 1;
        }
        let drive = match model {
            InternalModel::Literal => {
                (tau_amb + params.psi_idle_c - u) / params.lambda_sw_s + params.phi_sw_c * u
            }
            InternalModel::FirstOrderCorrected => {
                (tau_amb + params.psi_idle_c + params.phi_sw_c * u - *tau) / params.lambda_sw_s
            }
        };
        *tau = *tau + dt * drive;
    }
    Ok(clamped)
}

/// Analytic fixed point of the corrected model for constant drive.
pub fn steady_state<F: Real>(
    params: &ThermalParams<F>,
    tau_env_c: F,
    p_rack: F,
    c_hvac: F,
    utilization: F,
) -> (F, F) {
    let amb = tau_env_c
        + params.lambda_ambient_s
            * params.gain_scale
            * (params.kappa_rack * p_rack - params.kappa_cool * c_hvac);
    let int = amb + params.psi_idle_c + params.phi_sw_c * utilization;
    (amb, int)
}

/// Sets the HVAC level for the given switch indices; takes effect on the
/// next integration step. An empty set is a no-op.
pub fn apply_cooling<F: Real>(
    state: &mut ThermalState<F>,
    switch_indices: &[usize],
    level: F,
) -> Result<()> {
    if level < F::zero() || level > F::one() {
        return Err(Error::Invalid(format!(
            "cooling level {} outside [0,1]",
            level
        )));
    }
    for &k in switch_indices {
        if k >= state.n_switches() {
            return Err(Error::UnknownSwitch(k as u32));
        }
    }
    for &k in switch_indices {
        state.c_hvac[k] = level;
    }
    Ok(())
}
