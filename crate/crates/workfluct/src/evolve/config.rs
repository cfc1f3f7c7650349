use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `U ← exp(−i H(t + dt/2) dt) U`
    #[default]
    Midpoint,
    /// Two-point Gauss exponent with the commutator correction.
    CommutatorCorrected,
}

/// Largest accepted `dt` times the half-width of the spectrum of `H(t)`.
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

/// Abort threshold for the deviation of the propagated Gram matrix.
pub const MAX_UNITARITY_DRIFT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    pub dt: f64,
    pub method: Method,
    pub unitarity_check_every: usize,
}

impl Default for PropagationConfig {
    /// `dt = 2π/(100·40)`: 40 steps per period of a 100ω splitting.
    fn default() -> Self {
        Self { dt: 2.0 * PI / 4000.0, method: Method::Midpoint, unitarity_check_every: 256 }
    }
}

impl PropagationConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.unitarity_check_every == 0 {
            return Err(Error::InvalidParameter("unitarity_check_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Running record of the numerical guards over one or more propagations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub max_unitarity_drift: f64,
    /// Largest `dt` times spectral half-width encountered.
    pub max_phase_per_step: f64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.steps += other.steps;
        self.max_unitarity_drift = self.max_unitarity_drift.max(other.max_unitarity_drift);
        self.max_phase_per_step = self.max_phase_per_step.max(other.max_phase_per_step);
    }
}
