use serde::Serialize;

use super::config::{ExperimentConfig, Preset};
use crate::interferometry::{GUARD_LEVELS, MAX_GUARD_POPULATION};
use crate::model::{
    drive_inclusive, forward_protocol, h_system, qubit_splittings, reverse_protocol, softmode_splitting, ModelParams,
};
use crate::qop::{eig_hermitian, gibbs_weights};

/// Findings of [`validate`]. Errors block a run; warnings do not.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConfigDiagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// Named ratios `ε/ω`, `ε/g` of the soft-mode regime; large is good.
    pub regime_ratios: Vec<(String, f64)>,
    /// `ω/4 − max λ_t`
    pub stability_margin: f64,
    /// Gibbs population of the top [`GUARD_LEVELS`] eigenstates of `H_S(λ)` at both ends of the ramp.
    pub truncation_forecast: f64,
}

impl ConfigDiagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Thermal ensembles whose guard population is this far below the run
/// threshold still leave room for the drive to heat the oscillator.
const FORECAST_MARGIN: f64 = 0.1;
/// Samples per schedule segment when scanning for extremes.
const SCAN: usize = 64;

pub fn validate(c: &ExperimentConfig) -> ConfigDiagnostics {
    let mut d = ConfigDiagnostics::default();
    check_fields(c, &mut d);
    let p = &c.params;
    let lambda_max = p.lambda0.max(p.lambda_tau());
    d.stability_margin = p.stability_limit() - lambda_max;
    if d.stability_margin <= 0.0 {
        d.errors.push(format!(
            "stability violated: max lambda_t = {lambda_max} is not below omega/4 = {}",
            p.stability_limit()
        ));
    }
    if !d.errors.is_empty() {
        return d;
    }
    if let Err(e) = p.validate() {
        d.errors.push(e.to_string());
        return d;
    }
    d.truncation_forecast = truncation_forecast(p);
    if d.truncation_forecast > FORECAST_MARGIN * MAX_GUARD_POPULATION {
        d.warnings.push(format!(
            "thermal population {:.2e} of the top {GUARD_LEVELS} levels leaves little room below the guard threshold {MAX_GUARD_POPULATION:e}; raise n_fock",
            d.truncation_forecast
        ));
    }
    regime(c, &mut d);
    d
}

fn check_fields(c: &ExperimentConfig, d: &mut ConfigDiagnostics) {
    let p = &c.params;
    let mut need_positive = |name: &str, x: f64| {
        if !(x > 0.0 && x.is_finite()) {
            d.errors.push(format!("{name} = {x} must be positive and finite"));
        }
    };
    need_positive("omega", p.omega);
    need_positive("tau", p.tau);
    need_positive("beta", p.beta);
    need_positive("eps_cutoff", p.eps_cutoff);
    need_positive("eps_ideal", p.eps_ideal);
    need_positive("dt", c.propagation.dt);
    need_positive("du", c.du);
    need_positive("dw", c.dw);
    need_positive("w_max", c.w_max);
    need_positive("crooks_floor", c.crooks.floor);
    if !(c.u_max >= 0.0 && c.u_max.is_finite()) {
        d.errors.push(format!("u_max = {} must be nonnegative", c.u_max));
    } else if c.du > 0.0
        && c.u_max < 2.0 * c.du
        && !matches!(c.preset, Preset::Fig1 | Preset::Fig2 | Preset::Fig3Drives | Preset::OracleOnly)
    {
        d.errors.push(format!("u_max = {} leaves fewer than 3 samples at du = {}", c.u_max, c.du));
    }
    for (name, x) in [("g", p.g), ("g1", p.g1), ("g2", p.g2), ("lambda0", p.lambda0), ("v", p.v)] {
        if !x.is_finite() {
            d.errors.push(format!("{name} = {x} must be finite"));
        }
    }
    if p.n_fock < 4 {
        d.errors.push(format!("n_fock = {} must be at least 4", p.n_fock));
    }
    if c.shots == Some(0) {
        d.errors.push("shots must be at least 1".into());
    }
    if c.samples == 0 {
        d.errors.push("samples must be at least 1".into());
    }
    if c.propagation.unitarity_check_every == 0 {
        d.errors.push("unitarity_check_every must be at least 1".into());
    }
    if !(c.drive_delay >= 0.0 && c.drive_delay.is_finite()) {
        d.errors.push(format!("drive_delay = {} must be nonnegative", c.drive_delay));
    }
    match c.preset {
        Preset::OpenSystem if p.bath.is_empty() => d.errors.push("open-system needs at least one bath mode".into()),
        Preset::OpenSystem => {}
        _ if !p.bath.is_empty() => d.warnings.push(format!("bath modes are ignored by {}", c.preset.name())),
        _ => {}
    }
    if c.preset.is_cqed() || c.preset == Preset::Fig1 {
        for (name, g) in [("g1", p.g1), ("g2", p.g2)] {
            if c.preset.is_cqed() && g == 0.0 {
                d.warnings
                    .push(format!("{name} = 0: degenerate coupling, the splittings realizing chi± are undefined"));
            }
        }
        if c.preset == Preset::Fig1 && p.g == 0.0 {
            d.warnings.push("g = 0: degenerate coupling, the soft-mode splitting is undefined".into());
        }
    }
    if c.shots.is_some()
        && !matches!(
            c.preset,
            Preset::Fig4 | Preset::Fig4Reverse | Preset::Crooks | Preset::Exclusive | Preset::OpenSystem
        )
    {
        d.warnings.push(format!("shots are ignored by {}", c.preset.name()));
    }
}

fn truncation_forecast(p: &ModelParams) -> f64 {
    let mut worst = 0.0f64;
    for lambda in [p.lambda0, p.lambda_tau()] {
        let Ok(h) = h_system(p, lambda) else { continue };
        let Ok(s) = eig_hermitian(&h) else { continue };
        let w = gibbs_weights(s.eigenvalues(), p.beta);
        let top: f64 = w[w.len().saturating_sub(GUARD_LEVELS)..].iter().sum();
        worst = worst.max(top);
    }
    worst
}

fn regime(c: &ExperimentConfig, d: &mut ConfigDiagnostics) {
    let p = &c.params;
    match c.preset {
        Preset::Fig1 => {
            if p.g == 0.0 || p.lambda0.min(p.lambda_tau()) <= 0.0 {
                return;
            }
            if let Ok(eps) = forward_protocol(p).and_then(|l| softmode_splitting(&l, p)) {
                let min = eps.min_on(SCAN);
                d.regime_ratios.push(("min eps / omega".into(), min / p.omega));
                d.regime_ratios.push(("min eps / g".into(), min / p.g.abs()));
            }
        }
        _ if c.preset.is_cqed() => {
            if p.g1 == 0.0 || p.g2 == 0.0 {
                return;
            }
            let ramps = [forward_protocol(p), reverse_protocol(p)];
            let mut min1 = f64::INFINITY;
            let mut min2 = f64::INFINITY;
            for lambda in ramps.iter().flatten() {
                for u in [0.0, c.drive_delay, c.u_max] {
                    let split = drive_inclusive(lambda, p.tau, u).and_then(|dp| qubit_splittings(&dp, p));
                    match split {
                        Ok(s) => {
                            min1 = min1.min(s.eps1.min_on(SCAN).abs().min(s.eps1.max_on(SCAN).abs()));
                            min2 = min2.min(s.eps2.min_on(SCAN).abs().min(s.eps2.max_on(SCAN).abs()));
                        }
                        Err(e) => d.warnings.push(format!("splittings at u = {u}: {e}")),
                    }
                }
            }
            if min1.is_finite() {
                d.regime_ratios.push(("min |eps1| / omega".into(), min1 / p.omega));
                d.regime_ratios.push(("min |eps1| / g1".into(), min1 / p.g1.abs()));
                d.regime_ratios.push(("min |eps2| / omega (after clamp)".into(), min2 / p.omega));
                d.regime_ratios.push(("min |eps2| / g2 (after clamp)".into(), min2 / p.g2.abs()));
            }
        }
        _ => {}
    }
    for (name, r) in &d.regime_ratios {
        if *r < 1.0 {
            d.warnings.push(format!("soft-mode regime violated: {name} = {r:.3}"));
        }
    }
}
