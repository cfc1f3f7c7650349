use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::distribution::{Shape, WorkDistribution};
use crate::error::{Error, Result};
use crate::interferometry::GSample;

/// Half-width of the interval over which peak weights are integrated, in units of `Δw`.
pub const PEAK_HALF_WIDTH: f64 = 3.0;
/// Peaks outside `|w| ≤ REPORTING_BAND` are kept in densities but not matched.
pub const REPORTING_BAND: f64 = 6.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// `W(u) = (1 + cos(πu/U))/2`
    #[default]
    Hann,
    /// `W(u) = 1`, with the Gibbs ringing that comes with it.
    Rect,
}

impl Window {
    pub fn weight(self, u: f64, u_max: f64) -> f64 {
        match self {
            Window::Hann => 0.5 * (1.0 + (PI * u / u_max).cos()),
            Window::Rect => 1.0,
        }
    }
}

/// Uniform grid of work values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WGrid {
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
}

impl WGrid {
    /// `[−w_max, w_max]` with spacing close to `dw`; symmetric so that `w` and `−w` are both grid points.
    pub fn symmetric(w_max: f64, dw: f64) -> Result<Self> {
        if !(w_max > 0.0 && dw > 0.0) {
            return Err(Error::Grid(format!("need w_max > 0 and dw > 0, got {w_max}, {dw}")));
        }
        let half = (w_max / dw).ceil() as usize;
        Ok(Self { w_min: -w_max, w_max, points: 2 * half + 1 })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.w_min];
        }
        let step = (self.w_max - self.w_min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.w_min + k as f64 * step).collect()
    }
}

/// Density reconstructed from characteristic-function samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reconstruction {
    pub distribution: WorkDistribution,
    pub window: Window,
    pub du: f64,
    pub u_max: f64,
    /// `Δw = π/u_max`
    pub resolution: f64,
    /// Largest imaginary part of the two-sided transform.
    pub imag_residue: f64,
    pub integral: f64,
    pub negative_mass: f64,
}

/// Checks that `u` is `0, du, 2du, …` and returns `du`.
pub fn grid_step(u: &[f64]) -> Result<f64> {
    if u.len() < 2 {
        return Err(Error::Grid(format!("need at least two samples, got {}", u.len())));
    }
    if u[0].abs() > 1e-12 {
        return Err(Error::Grid(format!("first sample at u = {}, expected u = 0", u[0])));
    }
    let du = u[1] - u[0];
    if !(du > 0.0) {
        return Err(Error::Grid("u values must increase".into()));
    }
    for (k, &x) in u.iter().enumerate() {
        if (x - k as f64 * du).abs() > 1e-9 * du.max(x.abs()) {
            return Err(Error::Grid(format!("sample {k} at u = {x} is off the uniform grid with du = {du}")));
        }
    }
    Ok(du)
}

/// Inverse Fourier transform of windowed samples of `G` on `[0, u_max]`,
/// extended to negative `u` by `G(−u) = G(u)*`.
pub fn pdf_from_values(
    u: &[f64],
    g: &[C64],
    grid: &WGrid,
    window: Window,
    beta: f64,
    delta_f: f64,
) -> Result<Reconstruction> {
    if u.len() != g.len() {
        return Err(Error::Dimension(format!("{} u values for {} samples", u.len(), g.len())));
    }
    let du = grid_step(u)?;
    let u_max = u[u.len() - 1];
    let last = u.len() - 1;
    // Trapezoid weights times the window.
    let coef: Vec<f64> =
        u.iter().enumerate().map(|(k, &x)| if k == last { 0.5 } else { 1.0 } * window.weight(x, u_max)).collect();
    let ws = grid.values();
    let norm = du / (2.0 * PI);
    let values: Vec<f64> = ws
        .iter()
        .map(|&w| {
            let mut acc = g[0].re * coef[0];
            for k in 1..u.len() {
                acc += 2.0 * coef[k] * (g[k] * C64::from_polar(1.0, -u[k] * w)).re;
            }
            norm * acc
        })
        .collect();
    let imag_residue = norm * (g[0].im * coef[0]).abs();
    let distribution = WorkDistribution::density(ws, values, beta, delta_f);
    Ok(Reconstruction {
        integral: distribution.total_weight(),
        negative_mass: distribution.negative_mass(),
        distribution,
        window,
        du,
        u_max,
        resolution: PI / u_max,
        imag_residue,
    })
}

pub fn pdf_from_char(
    samples: &[GSample],
    grid: &WGrid,
    window: Window,
    beta: f64,
    delta_f: f64,
) -> Result<Reconstruction> {
    let u: Vec<f64> = samples.iter().map(|s| s.u).collect();
    let g: Vec<C64> = samples.iter().map(|s| s.g_value).collect();
    pdf_from_values(&u, &g, grid, window, beta, delta_f)
}

/// Local maxima of a density with `|w| ≤ band` and height above
/// `rel_height` times the global maximum, refined by a parabola through
/// the three nearest grid points.
pub fn local_maxima(dist: &WorkDistribution, band: f64, rel_height: f64) -> Vec<(f64, f64)> {
    let Shape::Density { w_grid, values } = &dist.shape else { return Vec::new() };
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if !(b > a && b >= c) || b < rel_height * top || w_grid[i].abs() > band {
            continue;
        }
        let h = w_grid[i + 1] - w_grid[i];
        let denom = a - 2.0 * b + c;
        let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        out.push((w_grid[i] + shift * h, b - 0.25 * (a - c) * shift));
    }
    out
}

/// Comparison of one reference peak with a reconstructed density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakMatch {
    pub w_reference: f64,
    /// Reference mass within `±PEAK_HALF_WIDTH·Δw` of the peak.
    pub weight_reference: f64,
    /// Nearest local maximum of the density.
    pub w_found: f64,
    pub weight_found: f64,
    pub position_error: f64,
    pub weight_error: f64,
}

/// Matches every reference peak of weight at least `min_weight` inside the
/// reporting band against the density. Weights are compared as the mass of
/// each distribution within `±PEAK_HALF_WIDTH·Δw` of the reference position.
pub fn match_peaks(density: &Reconstruction, reference: &[(f64, f64)], min_weight: f64) -> Vec<PeakMatch> {
    let maxima = local_maxima(&density.distribution, REPORTING_BAND + density.resolution, 1e-4);
    let half = PEAK_HALF_WIDTH * density.resolution;
    let reference_dist = WorkDistribution::peaks(reference.to_vec(), density.distribution.beta, 0.0);
    reference
        .iter()
        .filter(|(w, p)| *p >= min_weight && w.abs() <= REPORTING_BAND)
        .map(|&(w, _)| {
            let w_found =
                maxima.iter().map(|m| m.0).min_by(|a, b| (a - w).abs().total_cmp(&(b - w).abs())).unwrap_or(f64::NAN);
            let weight_reference = reference_dist.mass_in(w - half, w + half);
            let weight_found = density.distribution.mass_in(w - half, w + half);
            PeakMatch {
                w_reference: w,
                weight_reference,
                w_found,
                weight_found,
                position_error: (w_found - w).abs(),
                weight_error: (weight_found - weight_reference).abs(),
            }
        })
        .collect()
}
