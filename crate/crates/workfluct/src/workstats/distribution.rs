use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::interferometry::sweep::fmt17;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `(w, probability)` pairs sorted by `w`.
    Peaks { peaks: Vec<(f64, f64)> },
    /// Density on a uniform grid.
    Density { w_grid: Vec<f64>, values: Vec<f64> },
}

/// A work distribution together with the temperature and free-energy
/// difference of the process that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkDistribution {
    pub shape: Shape,
    pub beta: f64,
    pub delta_f: f64,
}

impl WorkDistribution {
    pub fn peaks(peaks: Vec<(f64, f64)>, beta: f64, delta_f: f64) -> Self {
        Self { shape: Shape::Peaks { peaks }, beta, delta_f }
    }

    pub fn density(w_grid: Vec<f64>, values: Vec<f64>, beta: f64, delta_f: f64) -> Self {
        Self { shape: Shape::Density { w_grid, values }, beta, delta_f }
    }

    pub fn is_density(&self) -> bool {
        matches!(self.shape, Shape::Density { .. })
    }

    /// `∫ f(w) p(w) dw`, by trapezoid for densities.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        match &self.shape {
            Shape::Peaks { peaks } => peaks.iter().map(|&(w, p)| p * f(w)).sum(),
            Shape::Density { w_grid, values } => w_grid
                .windows(2)
                .zip(values.windows(2))
                .map(|(w, p)| 0.5 * (w[1] - w[0]) * (p[0] * f(w[0]) + p[1] * f(w[1])))
                .sum(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|w| w) / self.total_weight()
    }

    /// `∫ max(−p, 0) dw`; zero for peaks.
    pub fn negative_mass(&self) -> f64 {
        match &self.shape {
            Shape::Peaks { .. } => 0.0,
            Shape::Density { w_grid, values } => {
                let neg: Vec<f64> = values.iter().map(|&p| (-p).max(0.0)).collect();
                w_grid.windows(2).zip(neg.windows(2)).map(|(w, p)| 0.5 * (w[1] - w[0]) * (p[0] + p[1])).sum()
            }
        }
    }

    /// Linear interpolation of a density; `None` outside the grid or for peaks.
    pub fn value_at(&self, w: f64) -> Option<f64> {
        let Shape::Density { w_grid, values } = &self.shape else { return None };
        let (first, last) = (*w_grid.first()?, *w_grid.last()?);
        if w < first || w > last || w_grid.len() < 2 {
            return None;
        }
        let step = (last - first) / (w_grid.len() - 1) as f64;
        let x = (w - first) / step;
        let i = (x.floor() as usize).min(w_grid.len() - 2);
        let f = x - i as f64;
        Some(values[i] * (1.0 - f) + values[i + 1] * f)
    }

    /// Probability mass in `[a, b]`: summed peaks, or the integral of the
    /// interpolated density.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            Shape::Peaks { peaks } => peaks.iter().filter(|(w, _)| *w >= a && *w <= b).map(|(_, p)| p).sum(),
            Shape::Density { w_grid, .. } => {
                let (Some(&first), Some(&last)) = (w_grid.first(), w_grid.last()) else { return 0.0 };
                let (a, b) = (a.max(first), b.min(last));
                if b <= a {
                    return 0.0;
                }
                let mut xs = vec![a];
                xs.extend(w_grid.iter().copied().filter(|&w| w > a && w < b));
                xs.push(b);
                xs.windows(2)
                    .map(|x| {
                        let pa = self.value_at(x[0]).unwrap_or(0.0);
                        let pb = self.value_at(x[1]).unwrap_or(0.0);
                        0.5 * (x[1] - x[0]) * (pa + pb)
                    })
                    .sum()
            }
        }
    }

    /// `w,prob` rows for peaks, `w,p` rows for densities.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        match &self.shape {
            Shape::Peaks { peaks } => {
                writeln!(out, "w,prob")?;
                for &(w, p) in peaks {
                    writeln!(out, "{},{}", fmt17(w), fmt17(p))?;
                }
            }
            Shape::Density { w_grid, values } => {
                writeln!(out, "w,p")?;
                for (&w, &p) in w_grid.iter().zip(values) {
                    writeln!(out, "{},{}", fmt17(w), fmt17(p))?;
                }
            }
        }
        Ok(())
    }
}
