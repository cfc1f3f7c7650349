use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the single-qubit soft-mode drive `ε_t` relates to the target `λ_t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftModeConvention {
    /// `ε_t = g²/λ_t`, so the `|−>` block carries exactly `−λ_t Q`.
    #[default]
    Lambda,
    /// `ε_t = g²/(2λ_t)`, so the `|−>` block carries `−2λ_t Q`.
    HalfSplitting,
}

impl SoftModeConvention {
    pub fn denominator_factor(self) -> f64 {
        match self {
            SoftModeConvention::Lambda => 1.0,
            SoftModeConvention::HalfSplitting => 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathMode {
    pub freq: f64,
    pub coupling: f64,
}

/// Physical and numerical parameters, in units where `ħ = 1` and energies
/// are measured in `ħω` with `ω = omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub omega: f64,
    /// Single-qubit Rabi coupling.
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub lambda0: f64,
    pub v: f64,
    pub tau: f64,
    pub beta: f64,
    pub eps_cutoff: f64,
    pub n_fock: usize,
    /// Ancilla splitting of the idealized coupling.
    pub eps_ideal: f64,
    pub softmode_convention: SoftModeConvention,
    pub bath: Vec<BathMode>,
    pub n_bath: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        let lambda0 = 0.0625;
        Self {
            omega: 1.0,
            g: 2.5,
            g1: 2.5,
            g2: 0.5,
            lambda0,
            v: 1.5 * lambda0 / (2.0 * PI),
            tau: 2.0 * PI,
            beta: 1.0,
            eps_cutoff: 100.0,
            n_fock: 32,
            eps_ideal: 1.0,
            softmode_convention: SoftModeConvention::Lambda,
            bath: Vec::new(),
            n_bath: 10,
        }
    }
}

impl ModelParams {
    pub fn lambda_tau(&self) -> f64 {
        self.lambda0 + self.v * self.tau
    }

    /// Effective oscillator frequency `√(ω² − 4ωλ)`.
    pub fn effective_frequency(&self, lambda: f64) -> Result<f64> {
        let w2 = self.omega * self.omega - 4.0 * self.omega * lambda;
        if !(w2 > 0.0) {
            return Err(Error::UnstableDrive { lambda, limit: self.omega / 4.0 });
        }
        Ok(w2.sqrt())
    }

    pub fn stability_limit(&self) -> f64 {
        self.omega / 4.0
    }

    /// Structural checks that do not depend on a particular protocol.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega", self.omega),
            ("tau", self.tau),
            ("beta", self.beta),
            ("eps_cutoff", self.eps_cutoff),
            ("eps_ideal", self.eps_ideal),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {x} must be positive and finite")));
            }
        }
        for (name, x) in [("g", self.g), ("g1", self.g1), ("g2", self.g2), ("lambda0", self.lambda0), ("v", self.v)] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {x} must be finite")));
            }
        }
        if self.n_fock < 4 {
            return Err(Error::InvalidParameter(format!("n_fock = {} must be at least 4", self.n_fock)));
        }
        if self.bath.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "at most 2 bath modes are supported, got {}",
                self.bath.len()
            )));
        }
        if !self.bath.is_empty() && self.n_bath < 4 {
            return Err(Error::InvalidParameter(format!("n_bath = {} must be at least 4", self.n_bath)));
        }
        for b in &self.bath {
            if !(b.freq > 0.0 && b.freq.is_finite() && b.coupling.is_finite()) {
                return Err(Error::InvalidParameter(format!("bath mode {b:?} needs positive frequency")));
            }
        }
        let lambda_max = self.lambda0.max(self.lambda_tau());
        if lambda_max >= self.stability_limit() {
            return Err(Error::UnstableDrive { lambda: lambda_max, limit: self.stability_limit() });
        }
        Ok(())
    }
}
