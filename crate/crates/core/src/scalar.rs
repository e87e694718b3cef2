//! Scalar abstraction for the numeric kernels.
//!
//! The MLP and the thermal integrator are written against [`Real`] so they
//! run at `f32` or `f64`; the simulator pins `f64` through the crate-root
//! aliases.

use num_traits::Float;

/// Floating-point scalar usable by the numeric kernels.
pub trait Real: Float + std::fmt::Debug + std::fmt::Display + Default + 'static {
    /// Lossy conversion from `f64`, used for constants and config values.
    fn from_f64(v: f64) -> Self;
    /// Lossy conversion to `f64`, used for reporting and serialization.
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}
