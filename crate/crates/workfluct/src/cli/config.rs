use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Method, PropagationConfig};
use crate::model::{BathMode, ModelParams, SoftModeConvention};
use crate::workstats::{CrooksOptions, CrooksSampling, Window, CROOKS_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Rabi versus soft-mode dynamics of one qubit and the oscillator.
    Fig1,
    /// Two-qubit Rabi versus diagonal dynamics.
    Fig2,
    /// `χ±` and the splittings `ε₁, ε₂` that realize them.
    Fig3Drives,
    /// Two-qubit interferometer, forward and reverse ramps, with Crooks check.
    Fig4,
    /// Two-qubit interferometer on the reverse ramp only.
    Fig4Reverse,
    /// Ideal single-ancilla interferometer, forward and reverse.
    Crooks,
    /// As `crooks` for exclusive work.
    Exclusive,
    /// Ideal interferometer on the system plus explicit bath modes.
    OpenSystem,
    /// Two-measurement statistics only.
    OracleOnly,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Fig1,
        Preset::Fig2,
        Preset::Fig3Drives,
        Preset::Fig4,
        Preset::Fig4Reverse,
        Preset::Crooks,
        Preset::Exclusive,
        Preset::OpenSystem,
        Preset::OracleOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3Drives => "fig3-drives",
            Preset::Fig4 => "fig4",
            Preset::Fig4Reverse => "fig4-reverse",
            Preset::Crooks => "crooks",
            Preset::Exclusive => "exclusive",
            Preset::OpenSystem => "open-system",
            Preset::OracleOnly => "oracle-only",
        }
    }

    pub fn parse(name: &str) -> Result<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
        })
    }

    /// Presets that run the two-qubit device.
    pub fn is_cqed(self) -> bool {
        matches!(self, Preset::Fig2 | Preset::Fig3Drives | Preset::Fig4 | Preset::Fig4Reverse)
    }
}

/// Default relative Crooks floor of the `exclusive` preset.
pub const EXCLUSIVE_CROOKS_FLOOR: f64 = 1e-5;

/// The config file: one flat namespace of optional values, layered over the
/// preset defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub u_max: Option<f64>,
    pub du: Option<f64>,
    pub window: Option<Window>,
    pub full_rabi: Option<bool>,
    pub dt: Option<f64>,
    pub method: Option<Method>,
    pub w_max: Option<f64>,
    pub dw: Option<f64>,
    pub samples: Option<usize>,
    pub crooks_floor: Option<f64>,
    pub crooks_sampling: Option<CrooksSampling>,
    pub drive_delay: Option<f64>,
    pub omega: Option<f64>,
    pub g: Option<f64>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub lambda0: Option<f64>,
    pub v: Option<f64>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub eps_cutoff: Option<f64>,
    pub n_fock: Option<usize>,
    pub eps_ideal: Option<f64>,
    pub softmode_convention: Option<SoftModeConvention>,
    pub bath: Option<Vec<BathMode>>,
    pub n_bath: Option<usize>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<ConfigFile> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ConfigFile::from_json(&text)
    }

    /// Fields set in `other` replace those of `self`.
    pub fn overlay(mut self, other: ConfigFile) -> ConfigFile {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            preset,
            out,
            seed,
            shots,
            u_max,
            du,
            window,
            full_rabi,
            dt,
            method,
            w_max,
            dw,
            samples,
            crooks_floor,
            crooks_sampling,
            drive_delay,
            omega,
            g,
            g1,
            g2,
            lambda0,
            v,
            tau,
            beta,
            eps_cutoff,
            n_fock,
            eps_ideal,
            softmode_convention,
            bath,
            n_bath
        );
        self
    }

    /// Resolves against the defaults of the named preset.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let name = self.preset.as_deref().ok_or_else(|| Error::Config("no preset given".into()))?;
        let mut c = ExperimentConfig::preset(Preset::parse(name)?);
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(x) = self.$f.clone() { c.$f = x; } )* };
        }
        macro_rules! set_param {
            ($($f:ident),*) => { $( if let Some(x) = self.$f.clone() { c.params.$f = x; } )* };
        }
        set!(out, seed, u_max, du, window, full_rabi, w_max, dw, samples);
        set_param!(
            omega,
            g,
            g1,
            g2,
            lambda0,
            v,
            tau,
            beta,
            eps_cutoff,
            n_fock,
            eps_ideal,
            softmode_convention,
            bath,
            n_bath
        );
        if self.shots.is_some() {
            c.shots = self.shots;
        }
        if let Some(f) = self.crooks_floor {
            c.crooks.floor = f;
        }
        if let Some(s) = self.crooks_sampling {
            c.crooks.sampling = s;
        }
        if let Some(dt) = self.dt {
            c.propagation.dt = dt;
        }
        if let Some(m) = self.method {
            c.propagation.method = m;
        }
        c.drive_delay = self.drive_delay.unwrap_or(0.5 * c.params.tau);
        Ok(c)
    }
}

/// A fully resolved experiment; serialized verbatim into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub params: ModelParams,
    pub out: PathBuf,
    pub seed: u64,
    pub shots: Option<u64>,
    pub u_max: f64,
    pub du: f64,
    pub window: Window,
    /// Two-qubit runs: full Rabi coupling instead of the diagonal Hamiltonian.
    pub full_rabi: bool,
    pub propagation: PropagationConfig,
    /// Reconstructed densities cover `[−w_max, w_max]` with spacing `dw`.
    pub w_max: f64,
    pub dw: f64,
    /// Sample intervals of the time traces of `fig1`, `fig2` and `fig3-drives`.
    pub samples: usize,
    /// Crooks fits of reconstructed densities; oracle fits use every peak above `ORACLE_CROOKS_FLOOR`.
    pub crooks: CrooksOptions,
    /// Delay `u` of the drive pair shown by `fig2` and `fig3-drives`.
    pub drive_delay: f64,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> ExperimentConfig {
        let mut params = ModelParams::default();
        if preset == Preset::OpenSystem {
            // The bilinear coupling softens the system mode; a fast bath mode
            // keeps that shift and its own excitation small.
            params.n_fock = 44;
            params.bath = vec![BathMode { freq: 4.0, coupling: 0.3 }];
            params.n_bath = 8;
        }
        if preset.is_cqed() {
            // The reverse ramp with full Rabi coupling heats the oscillator
            // past the guard levels at 36 states.
            params.n_fock = 40;
        }
        let drive_delay = 0.5 * params.tau;
        // Explicit qubit splittings reach `eps_cutoff`, which bounds the step
        // through the phase-per-step guard.
        let dt = if preset.is_cqed() || preset == Preset::Fig1 { 2.0 * PI / 4000.0 } else { 2.0 * PI / 1000.0 };
        // Exclusive work only moves between levels of equal parity, so
        // neighbouring Crooks pairs sit 2ω apart and drop off fast.
        let crooks_floor = if preset == Preset::Exclusive { EXCLUSIVE_CROOKS_FLOOR } else { CROOKS_FLOOR };
        ExperimentConfig {
            preset,
            params,
            out: PathBuf::from(format!("out/{}", preset.name())),
            seed: 0,
            shots: None,
            u_max: 60.0,
            du: 0.1,
            window: Window::Hann,
            full_rabi: true,
            propagation: PropagationConfig { dt, method: Method::CommutatorCorrected, ..PropagationConfig::default() },
            w_max: 10.0,
            dw: 0.01,
            samples: 400,
            crooks: CrooksOptions { sampling: CrooksSampling::Maxima, floor: crooks_floor },
            drive_delay,
        }
    }
}
