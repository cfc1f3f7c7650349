use serde::Serialize;

use super::params::ModelParams;
use super::schedule::{merge_breaks, Form, Schedule, Segment, SplitKind, Splitting};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkKind {
    Inclusive,
    Exclusive,
}

/// The two conditional drives of the protocol, both on `[0, τ+u]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DrivePair {
    pub chi_plus: Schedule,
    pub chi_minus: Schedule,
    pub tau: f64,
    pub u: f64,
    pub kind: WorkKind,
}

impl DrivePair {
    pub fn total_time(&self) -> f64 {
        self.tau + self.u
    }
}

/// Linear ramp `λ_t = λ₀ + v t` on `[0, τ]`.
pub fn linear_protocol(lambda0: f64, v: f64, tau: f64) -> Result<Schedule> {
    Schedule::linear_ramp(lambda0, v, tau)
}

/// The forward ramp of `params`.
pub fn forward_protocol(params: &ModelParams) -> Result<Schedule> {
    linear_protocol(params.lambda0, params.v, params.tau)
}

/// The time-reversed ramp `λ̃_t = λ_τ − v t`.
pub fn reverse_protocol(params: &ModelParams) -> Result<Schedule> {
    linear_protocol(params.lambda_tau(), -params.v, params.tau)
}

fn check_u(u: f64) -> Result<()> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::InvalidParameter(format!("u = {u} must be nonnegative")));
    }
    Ok(())
}

fn check_tau(lambda: &Schedule, tau: f64) -> Result<()> {
    let d = lambda.duration();
    if (d - tau).abs() > 1e-12 * tau.max(1.0) {
        return Err(Error::InvalidParameter(format!("protocol lasts {d}, expected tau = {tau}")));
    }
    Ok(())
}

/// `χ⁺ = λ` then hold `λ_τ`; `χ⁻` holds `λ₀` then follows `λ` delayed by `u`.
pub fn drive_inclusive(lambda: &Schedule, tau: f64, u: f64) -> Result<DrivePair> {
    check_u(u)?;
    check_tau(lambda, tau)?;
    Ok(DrivePair {
        chi_plus: lambda.extended(u, Form::constant(lambda.value_at_end()))?,
        chi_minus: lambda.delayed(u, Form::constant(lambda.value_at_start()))?,
        tau,
        u,
        kind: WorkKind::Inclusive,
    })
}

/// As [`drive_inclusive`] with both hold segments set to zero.
pub fn drive_exclusive(lambda: &Schedule, tau: f64, u: f64) -> Result<DrivePair> {
    check_u(u)?;
    check_tau(lambda, tau)?;
    Ok(DrivePair {
        chi_plus: lambda.extended(u, Form::constant(0.0))?,
        chi_minus: lambda.delayed(u, Form::constant(0.0))?,
        tau,
        u,
        kind: WorkKind::Exclusive,
    })
}

/// Qubit-splitting schedules realizing a drive pair in the two-qubit device.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Splittings {
    pub eps1: Schedule,
    pub eps2: Schedule,
    /// `g₁²/ε₁`
    pub coupling1: Schedule,
    /// `g₂²/ε₂`
    pub coupling2: Schedule,
    /// Drives actually realized after the `ε₂` clamp.
    pub chi_plus_eff: Schedule,
    pub chi_minus_eff: Schedule,
}

/// Inverts `χ± = g₁²/ε₁ ± g₂²/ε₂`, clamping `|ε₂|` at `params.eps_cutoff`.
pub fn qubit_splittings(drive: &DrivePair, params: &ModelParams) -> Result<Splittings> {
    if params.g1 == 0.0 || params.g2 == 0.0 {
        return Err(Error::InvalidParameter("qubit splittings need nonzero g1 and g2".into()));
    }
    let total = drive.total_time();
    let mut cuts: Vec<f64> = vec![0.0, total];
    cuts.extend(drive.chi_plus.boundaries(0.0, total));
    cuts.extend(drive.chi_minus.boundaries(0.0, total));
    let cuts = merge_breaks(cuts);

    let mut pieces = Vec::new();
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let plus = drive.chi_plus.local_form(a, b);
        let minus = drive.chi_minus.local_form(a, b);
        for (name, f) in [("chi_plus", &plus), ("chi_minus", &minus)] {
            if f.affine().is_none() {
                return Err(Error::InvalidParameter(format!("{name} must be piecewise linear")));
            }
        }
        let len = b - a;
        for s in [0.0, len] {
            let sum = plus.eval(s) + minus.eval(s);
            if !(sum > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "chi_plus + chi_minus = {sum} at t = {} must stay positive",
                    a + s
                )));
            }
        }
        // Trapezoid is exact for the piecewise-linear difference.
        area += 0.5 * len * ((plus.eval(0.0) - minus.eval(0.0)) + (plus.eval(len) - minus.eval(len)));
        pieces.push((a, b, plus, minus));
    }
    let orientation = if area < 0.0 { -1.0 } else { 1.0 };

    let build = |kind: SplitKind| -> Result<Schedule> {
        Schedule::new(
            pieces
                .iter()
                .map(|(a, b, plus, minus)| Segment {
                    start: *a,
                    end: *b,
                    form: Form::Splitting(Box::new(Splitting {
                        kind,
                        plus: plus.clone(),
                        minus: minus.clone(),
                        g1: params.g1,
                        g2: params.g2,
                        cutoff: params.eps_cutoff,
                        orientation,
                    })),
                })
                .collect(),
        )
    };
    Ok(Splittings {
        eps1: build(SplitKind::Eps1)?,
        eps2: build(SplitKind::Eps2)?,
        coupling1: build(SplitKind::Coupling1)?,
        coupling2: build(SplitKind::Coupling2)?,
        chi_plus_eff: build(SplitKind::ChiPlus)?,
        chi_minus_eff: build(SplitKind::ChiMinus)?,
    })
}

/// `χ± = g₁²/ε₁ ± g₂²/ε₂`
pub fn chi_from_splittings(eps1: f64, eps2: f64, g1: f64, g2: f64) -> (f64, f64) {
    let a = g1 * g1 / eps1;
    let b = g2 * g2 / eps2;
    (a + b, a - b)
}

/// Single-qubit soft-mode drive `ε_t = g²/(κ λ_t)` with `κ` set by the convention.
pub fn softmode_splitting(lambda: &Schedule, params: &ModelParams) -> Result<Schedule> {
    if params.g == 0.0 {
        return Err(Error::InvalidParameter("softmode splitting needs nonzero g".into()));
    }
    if lambda.min_on(8) <= 0.0 {
        return Err(Error::InvalidParameter("softmode splitting needs lambda > 0".into()));
    }
    let numerator = params.g * params.g / params.softmode_convention.denominator_factor();
    Ok(lambda.map_forms(|f| Form::Reciprocal { numerator, base: Box::new(f.clone()) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn paper() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn zero_delay_branches_coincide() {
        let p = paper();
        let lam = forward_protocol(&p).unwrap();
        let d = drive_inclusive(&lam, p.tau, 0.0).unwrap();
        for k in 0..=50 {
            let t = p.tau * k as f64 / 50.0;
            assert_eq!(d.chi_plus.eval(t).unwrap(), lam.eval(t).unwrap());
            assert_eq!(d.chi_minus.eval(t).unwrap(), lam.eval(t).unwrap());
        }
    }

    #[test]
    fn inclusive_endpoints_and_quarter_point() {
        let p = paper();
        let lam = forward_protocol(&p).unwrap();
        let u = p.tau / 2.0;
        let d = drive_inclusive(&lam, p.tau, u).unwrap();
        let t_end = d.total_time();
        assert_eq!(d.chi_plus.eval(0.0).unwrap(), d.chi_minus.eval(0.0).unwrap());
        assert!((d.chi_plus.eval(t_end).unwrap() - d.chi_minus.eval(t_end).unwrap()).abs() < 1e-15);
        assert!((d.chi_plus.eval(t_end).unwrap() - p.lambda_tau()).abs() < 1e-15);
        assert_eq!(d.chi_minus.eval(p.tau / 4.0).unwrap(), p.lambda0);
        let expected = p.lambda0 + p.v * p.tau / 4.0;
        assert!((d.chi_plus.eval(p.tau / 4.0).unwrap() - expected).abs() < 1e-15);
        assert!(drive_inclusive(&lam, p.tau, -1.0).is_err());
    }

    #[test]
    fn exclusive_holds_at_zero() {
        let p = paper();
        let lam = forward_protocol(&p).unwrap();
        let u = 2.0;
        let d = drive_exclusive(&lam, p.tau, u).unwrap();
        assert_eq!(d.chi_plus.eval(p.tau + u / 2.0).unwrap(), 0.0);
        assert_eq!(d.chi_minus.eval(u / 2.0).unwrap(), 0.0);
        assert_eq!(d.chi_plus.eval(d.total_time()).unwrap(), 0.0);
        let d0 = drive_exclusive(&lam, p.tau, 0.0).unwrap();
        assert_eq!(d0.chi_plus, lam);
        assert_eq!(d0.chi_minus, lam);
    }

    #[test]
    fn splittings_at_start_and_clamp() {
        let p = paper();
        let lam = forward_protocol(&p).unwrap();
        let d = drive_inclusive(&lam, p.tau, PI).unwrap();
        let s = qubit_splittings(&d, &p).unwrap();
        assert!((s.eps1.eval(0.0).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(s.eps2.eval(0.0).unwrap(), 100.0);
        assert_eq!(s.eps2.eval(d.total_time()).unwrap(), 100.0);
        assert!(s.eps2.max_on(64) <= 100.0);
    }

    #[test]
    fn splittings_invert_unclamped_drives() {
        let p = paper();
        let lam = forward_protocol(&p).unwrap();
        let d = drive_inclusive(&lam, p.tau, 4.0).unwrap();
        let s = qubit_splittings(&d, &p).unwrap();
        for k in 1..40 {
            let t = d.total_time() * k as f64 / 40.0;
            let e2 = s.eps2.eval(t).unwrap();
            if e2.abs() >= p.eps_cutoff {
                continue;
            }
            let (cp, cm) = chi_from_splittings(s.eps1.eval(t).unwrap(), e2, p.g1, p.g2);
            assert!((cp - d.chi_plus.eval(t).unwrap()).abs() < 1e-12);
            assert!((cm - d.chi_minus.eval(t).unwrap()).abs() < 1e-12);
            assert!((s.chi_plus_eff.eval(t).unwrap() - cp).abs() < 1e-12);
        }
    }

    #[test]
    fn reverse_splitting_is_negative_and_clamped() {
        let p = paper();
        let lam = reverse_protocol(&p).unwrap();
        let d = drive_inclusive(&lam, p.tau, 3.0).unwrap();
        let s = qubit_splittings(&d, &p).unwrap();
        assert_eq!(s.eps2.eval(0.0).unwrap(), -100.0);
        assert!(s.eps2.eval(5.0).unwrap() < 0.0);
        assert!(s.eps2.min_on(64) >= -100.0);
    }

    #[test]
    fn softmode_convention_factor() {
        let mut p = paper();
        let lam = forward_protocol(&p).unwrap();
        let e = softmode_splitting(&lam, &p).unwrap();
        assert!((e.eval(0.0).unwrap() - 100.0).abs() < 1e-12);
        p.softmode_convention = super::super::params::SoftModeConvention::HalfSplitting;
        let e = softmode_splitting(&lam, &p).unwrap();
        assert!((e.eval(0.0).unwrap() - 50.0).abs() < 1e-12);
    }
}
