use serde::{Deserialize, Serialize};

use super::distribution::{Shape, WorkDistribution};
use crate::error::{Error, Result};
use crate::qop::{log_partition, Operator};

/// Points where either density is below this fraction of its maximum are not fitted.
pub const CROOKS_FLOOR: f64 = 1e-3;
pub const MIN_FIT_POINTS: usize = 5;
/// Tolerance for pairing a forward peak at `w` with a backward peak at `−w`.
const PEAK_PAIR_TOL: f64 = 1e-8;

/// Where the log ratio of two densities is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrooksSampling {
    /// Every grid point above the floor.
    #[default]
    Grid,
    /// Local maxima of the forward density above the floor. A window turns
    /// each isolated peak into a plateau of the log ratio; the maxima are
    /// where that plateau takes the exact value.
    Maxima,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrooksOptions {
    /// Points where either density is below `floor` times its maximum are dropped.
    pub floor: f64,
    pub sampling: CrooksSampling,
}

impl Default for CrooksOptions {
    fn default() -> Self {
        Self { floor: CROOKS_FLOOR, sampling: CrooksSampling::Grid }
    }
}

/// Point of the Crooks fit: `w`, `ln(p_fwd(w)/p_bwd(−w))` and its weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrooksPoint {
    pub w: f64,
    pub log_ratio: f64,
    pub weight: f64,
}

/// Inverse variance of `ln(a/b)` when both values carry the same absolute error.
fn log_ratio_weight(a: f64, b: f64) -> f64 {
    1.0 / (1.0 / (a * a) + 1.0 / (b * b))
}

/// Weighted linear fit of `ln(p_fwd(w)/p_bwd(−w))` against `w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FTReport {
    pub slope: f64,
    pub intercept: f64,
    pub slope_expected: f64,
    pub intercept_expected: f64,
    pub r_squared: f64,
    /// `⟨e^{−βw}⟩ e^{βΔF}` of the forward distribution.
    pub jarzynski_lhs: f64,
    pub points_used: usize,
    pub beta: f64,
    pub delta_f: f64,
}

impl FTReport {
    pub fn slope_rel_error(&self) -> f64 {
        ((self.slope - self.slope_expected) / self.slope_expected).abs()
    }

    /// Relative error of the intercept, or the absolute error when the expected value is zero.
    pub fn intercept_error(&self) -> f64 {
        let d = (self.intercept - self.intercept_expected).abs();
        if self.intercept_expected == 0.0 {
            d
        } else {
            d / self.intercept_expected.abs()
        }
    }
}

/// Crooks test of a forward/backward pair with the default options.
pub fn crooks_check(p_fwd: &WorkDistribution, p_bwd: &WorkDistribution, beta: f64) -> Result<FTReport> {
    crooks_check_with(p_fwd, p_bwd, beta, CrooksOptions::default())
}

/// Crooks test of a forward/backward pair. Densities are compared on the
/// forward grid, peaks are paired by position. Each point is weighted by the
/// inverse variance of its log ratio under equal absolute errors in both densities.
pub fn crooks_check_with(
    p_fwd: &WorkDistribution,
    p_bwd: &WorkDistribution,
    beta: f64,
    options: CrooksOptions,
) -> Result<FTReport> {
    let points = crooks_points(p_fwd, p_bwd, options)?;
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { found: points.len() });
    }
    let (slope, intercept, r_squared) = linear_fit(&points);
    Ok(FTReport {
        slope,
        intercept,
        slope_expected: beta,
        intercept_expected: -beta * p_fwd.delta_f,
        r_squared,
        jarzynski_lhs: jarzynski_check(p_fwd, beta, p_fwd.delta_f),
        points_used: points.len(),
        beta,
        delta_f: p_fwd.delta_f,
    })
}

/// Points of the Crooks fit above the floor.
pub fn crooks_points(
    p_fwd: &WorkDistribution,
    p_bwd: &WorkDistribution,
    options: CrooksOptions,
) -> Result<Vec<CrooksPoint>> {
    let floor = options.floor;
    match (&p_fwd.shape, &p_bwd.shape) {
        (Shape::Density { w_grid, values }, Shape::Density { values: vb, .. }) => {
            let max_f = values.iter().cloned().fold(0.0, f64::max);
            let max_b = vb.iter().cloned().fold(0.0, f64::max);
            let is_max =
                |i: usize| i > 0 && i + 1 < values.len() && values[i] > values[i - 1] && values[i] >= values[i + 1];
            Ok((0..w_grid.len())
                .filter(|&i| options.sampling == CrooksSampling::Grid || is_max(i))
                .filter_map(|i| {
                    let (w, pf) = (w_grid[i], values[i]);
                    let pb = p_bwd.value_at(-w)?;
                    (pf > floor * max_f && pb > floor * max_b).then(|| CrooksPoint {
                        w,
                        log_ratio: (pf / pb).ln(),
                        weight: log_ratio_weight(pf, pb),
                    })
                })
                .collect())
        }
        (Shape::Peaks { peaks: pf }, Shape::Peaks { peaks: pb }) => {
            let max_f = pf.iter().map(|p| p.1).fold(0.0, f64::max);
            let max_b = pb.iter().map(|p| p.1).fold(0.0, f64::max);
            Ok(pf
                .iter()
                .filter(|(_, p)| *p > floor * max_f)
                .filter_map(|&(w, p)| {
                    let &(_, q) = pb.iter().find(|(wb, _)| (wb + w).abs() < PEAK_PAIR_TOL)?;
                    (q > floor * max_b).then(|| CrooksPoint {
                        w,
                        log_ratio: (p / q).ln(),
                        weight: log_ratio_weight(p, q),
                    })
                })
                .collect())
        }
        _ => Err(Error::InvalidParameter("Crooks check needs two densities or two peak lists".into())),
    }
}

/// Weighted least squares `y = intercept + slope·x`, with the weighted `r²`.
pub fn linear_fit(points: &[CrooksPoint]) -> (f64, f64, f64) {
    let sw: f64 = points.iter().map(|p| p.weight).sum();
    let mx = points.iter().map(|p| p.weight * p.w).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.weight * p.log_ratio).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.weight * (p.w - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.weight * (p.w - mx) * (p.log_ratio - my)).sum();
    let syy: f64 = points.iter().map(|p| p.weight * (p.log_ratio - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, intercept, r_squared)
}

/// `⟨e^{−βw}⟩ e^{βΔF}`; equal to 1 when the Jarzynski equality holds.
pub fn jarzynski_check(p: &WorkDistribution, beta: f64, delta_f: f64) -> f64 {
    p.integrate(|w| (-beta * (w - delta_f)).exp()) / p.total_weight()
}

/// `ln sinh x` without overflow.
fn ln_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

/// `ΔF = β⁻¹ ln[sinh(βω_f/2)/sinh(βω₀/2)]` between two harmonic oscillators.
pub fn free_energy_oscillator(omega0: f64, omega_f: f64, beta: f64) -> Result<f64> {
    for (name, w) in [("omega0", omega0), ("omega_f", omega_f)] {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {w} is not a stable frequency")));
        }
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    Ok((ln_sinh(0.5 * beta * omega_f) - ln_sinh(0.5 * beta * omega0)) / beta)
}

/// `ΔF = −β⁻¹ ln(Z₁/Z₀)` from the spectra of two Hamiltonians.
pub fn free_energy_spectral(h0: &Operator, h1: &Operator, beta: f64) -> Result<f64> {
    let e0 = crate::qop::eig_hermitian(h0)?;
    let e1 = crate::qop::eig_hermitian(h1)?;
    Ok(-(log_partition(e1.eigenvalues(), beta) - log_partition(e0.eigenvalues(), beta)) / beta)
}
