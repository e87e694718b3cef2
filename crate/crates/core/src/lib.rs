//! Deterministic simulator of a software-defined spine-leaf industrial
//! network with per-switch thermal dynamics, plus a threshold-triggered
//! Deep Q-Network self-healing agent and a Dijkstra+ECMP baseline.
//!
//! The crate is organized around the simulation pipeline:
//!
//! - [`topology`]: switch/link/host graph construction and the redundant
//!   path inventory the agent's action space draws from.
//! - [`traffic`]: fluid-flow offered-load generation, link utilizations,
//!   queueing latency and loss models.
//! - [`thermal`]: lumped-capacity ambient/internal temperature integration
//!   with an analytic steady-state oracle.
//! - [`knowledge`]: observation assembly, the time-stamped knowledge base,
//!   normalization, and QoS/thermal violation detection.
//! - [`nn`] / [`dqn`]: a from-scratch MLP with Adam, replay buffer,
//!   epsilon-greedy policy, and the training loop.
//! - [`actuation`]: flow-rule, throttle, and cooling actuators with
//!   realistic installation delay.
//! - [`baseline`]: shortest-path + ECMP comparator with slow reactive
//!   recovery.
//! - [`sim`] / [`scenario`] / [`harness`] / [`metrics`]: the tick engine,
//!   TC1-TC9 presets, episode orchestration, and resilience metrics.
//!
//! Numeric kernels (the MLP and the thermal integrator) are generic over
//! the scalar type via `num-traits`; the simulator itself runs on the
//! crate-level [`Scalar`] alias.

pub mod actuation;
pub mod baseline;
pub mod config;
pub mod dqn;
pub mod error;
pub mod harness;
pub mod knowledge;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod thermal;
pub mod topology;
pub mod trace;
pub mod traffic;
pub mod util;

/// Scalar type used by the simulator proper.
pub type Scalar = f64;

/// Q-network at the simulator's scalar precision.
pub type QNetwork = nn::Mlp<Scalar>;

/// Adam optimizer state at the simulator's scalar precision.
pub type AdamState = nn::Adam<Scalar>;

/// Thermal parameter set at the simulator's scalar precision.
pub type ThermalParams = thermal::ThermalParams<Scalar>;

pub use error::Error;
