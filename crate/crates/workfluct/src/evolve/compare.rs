use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::config::{Diagnostics, PropagationConfig};
use super::propagate::propagate_columns;
use crate::error::{Error, Result};
use crate::model::TdHamiltonian;
use crate::qop::linalg::{eigh, mm};
use crate::qop::{gibbs_weights, DensityMatrix, Operator};

/// Weights below this are dropped when a mixed state is unravelled into columns.
pub const ENSEMBLE_FLOOR: f64 = 1e-13;

/// Mixed state as weighted orthonormal columns, `ρ = Σ p_k |ψ_k><ψ_k|`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub weights: Vec<f64>,
    pub columns: Array2<C64>,
    /// Total weight removed by [`ENSEMBLE_FLOOR`].
    pub dropped: f64,
}

impl Ensemble {
    pub fn from_density(rho: &DensityMatrix) -> Result<Ensemble> {
        let (e, v) = eigh(rho.entries().view())?;
        let keep: Vec<usize> = (0..e.len()).filter(|&k| e[k] > ENSEMBLE_FLOOR).collect();
        let dropped = e.iter().filter(|&&x| x <= ENSEMBLE_FLOOR).map(|x| x.max(0.0)).sum();
        let columns = Array2::from_shape_fn((v.nrows(), keep.len()), |(i, j)| v[[i, keep[j]]]);
        Ok(Ensemble { weights: keep.iter().map(|&k| e[k]).collect(), columns, dropped })
    }

    /// Gibbs state of `h` as its eigenvectors, keeping weights above `floor`.
    pub fn thermal(h: &Operator, beta: f64, floor: f64) -> Result<Ensemble> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        h.require_hermitian(1e-9)?;
        let (e, v) = eigh(h.view())?;
        let p = gibbs_weights(&e, beta);
        let keep: Vec<usize> = (0..p.len()).filter(|&k| p[k] > floor).collect();
        let dropped = (0..p.len()).filter(|&k| p[k] <= floor).map(|k| p[k]).sum();
        let columns = Array2::from_shape_fn((v.nrows(), keep.len()), |(i, j)| v[[i, keep[j]]]);
        Ok(Ensemble { weights: keep.iter().map(|&k| p[k]).collect(), columns, dropped })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ p_k <ψ_k|O|ψ_k>`
    pub fn expectation(&self, obs: &Operator) -> f64 {
        let ox = mm(obs.view(), self.columns.view());
        let mut acc = 0.0;
        for (k, &p) in self.weights.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..self.columns.nrows() {
                s += self.columns[[i, k]].conj() * ox[[i, k]];
            }
            acc += p * s.re;
        }
        acc
    }
}

/// Observable time series under two generators.
#[derive(Clone, Debug, Serialize)]
pub struct DeviationTrace {
    pub times: Vec<f64>,
    /// `values_a[i][k]`: observable `k` at `times[i]` under the first generator.
    pub values_a: Vec<Vec<f64>>,
    pub values_b: Vec<Vec<f64>>,
    pub max_gap: f64,
    /// Largest gap per observable.
    pub max_gap_per_observable: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl DeviationTrace {
    /// Largest gap among samples with `t ≤ t_max`.
    pub fn max_gap_until(&self, t_max: f64, observables: &[usize]) -> f64 {
        let mut worst = 0.0f64;
        for (i, &t) in self.times.iter().enumerate() {
            if t > t_max * (1.0 + 1e-12) {
                continue;
            }
            for &k in observables {
                worst = worst.max((self.values_a[i][k] - self.values_b[i][k]).abs());
            }
        }
        worst
    }
}

/// Evolves `rho0` under both generators on `[0, T]`, sampling the observables
/// at `samples + 1` equally spaced times.
pub fn compare_generators(
    h_a: &TdHamiltonian,
    h_b: &TdHamiltonian,
    rho0: &DensityMatrix,
    total: f64,
    observables: &[Operator],
    samples: usize,
    cfg: &PropagationConfig,
) -> Result<DeviationTrace> {
    if h_a.layout() != h_b.layout() || h_a.layout() != rho0.layout() {
        return Err(Error::Dimension("generators and state must share one layout".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample interval".into()));
    }
    let ens = Ensemble::from_density(rho0)?;
    let mut diagnostics = Diagnostics::default();
    let run = |h: &TdHamiltonian, diag: &mut Diagnostics| -> Result<Vec<Vec<f64>>> {
        let mut cur = Ensemble { columns: ens.columns.clone(), ..ens.clone() };
        let mut out = Vec::with_capacity(samples + 1);
        out.push(observables.iter().map(|o| cur.expectation(o)).collect());
        for i in 0..samples {
            let t0 = total * i as f64 / samples as f64;
            let t1 = total * (i + 1) as f64 / samples as f64;
            cur.columns = propagate_columns(h, t0, t1, cur.columns, cfg, None, diag)?;
            out.push(observables.iter().map(|o| cur.expectation(o)).collect());
        }
        Ok(out)
    };
    let values_a = run(h_a, &mut diagnostics)?;
    let values_b = run(h_b, &mut diagnostics)?;
    let mut per = vec![0.0f64; observables.len()];
    for (a, b) in values_a.iter().zip(&values_b) {
        for k in 0..per.len() {
            per[k] = per[k].max((a[k] - b[k]).abs());
        }
    }
    Ok(DeviationTrace {
        times: (0..=samples).map(|i| total * i as f64 / samples as f64).collect(),
        max_gap: per.iter().cloned().fold(0.0, f64::max),
        max_gap_per_observable: per,
        values_a,
        values_b,
        diagnostics,
    })
}
