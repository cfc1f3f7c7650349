use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::distribution::WorkDistribution;
use crate::error::{Error, Result};
use crate::qop::linalg::{eigh, mm, mm_ah, spectral_apply};
use crate::qop::{gibbs_weights, log_partition, trace_product, Operator};

/// Top eigenstates of the initial Hamiltonian excluded from the initial state.
pub const GUARD_TOP: usize = 2;

/// Transitions with smaller weight are rounding noise of the overlaps and are dropped.
pub const TRANSITION_FLOOR: f64 = 1e-20;
/// Peaks closer than this are merged.
pub const MERGE_TOL: f64 = 1e-9;
/// Largest accepted initial population of the excluded guard eigenstates.
pub const MAX_LEAKAGE: f64 = 1e-6;
const UNITARITY_TOL: f64 = 1e-8;

/// Eigendecompositions of the initial and final Hamiltonians together with
/// the evolution between the two measurements.
///
/// The initial Gibbs weights of the top [`GUARD_TOP`] eigenstates of `h0`
/// are dropped and the rest renormalized; the dropped mass is the leakage.
#[derive(Clone, Debug)]
pub struct WorkOracle {
    e0: Vec<f64>,
    e_tau: Vec<f64>,
    v0: Array2<C64>,
    v_tau: Array2<C64>,
    u: Array2<C64>,
    /// `U|n>` for every initial eigenstate `n`.
    evolved: Array2<C64>,
    weights: Vec<f64>,
    beta: f64,
    leakage: f64,
}

impl WorkOracle {
    pub fn new(h0: &Operator, h_tau: &Operator, u: &Operator, beta: f64) -> Result<Self> {
        if h0.dim() != h_tau.dim() || h0.dim() != u.dim() {
            return Err(Error::Dimension(format!(
                "h0, h_tau and U have dimensions {}, {}, {}",
                h0.dim(),
                h_tau.dim(),
                u.dim()
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        h0.require_hermitian(1e-9)?;
        h_tau.require_hermitian(1e-9)?;
        let defect = u.unitarity_defect();
        if defect > UNITARITY_TOL {
            return Err(Error::InvalidParameter(format!("U is not unitary (defect {defect:.3e})")));
        }
        let (e0, v0) = eigh(h0.view())?;
        let (e_tau, v_tau) = eigh(h_tau.view())?;
        let mut weights = gibbs_weights(&e0, beta);
        let n = weights.len();
        let guard = GUARD_TOP.min(n.saturating_sub(1));
        let leakage: f64 = weights[n - guard..].iter().sum();
        if leakage > MAX_LEAKAGE {
            return Err(Error::Leakage { leakage });
        }
        for w in &mut weights[n - guard..] {
            *w = 0.0;
        }
        let kept: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= kept);
        let evolved = mm(u.view(), v0.view());
        Ok(Self { e0, e_tau, v0, v_tau, u: u.entries().clone(), evolved, weights, beta, leakage })
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Initial eigenvalues and their (renormalized) Gibbs weights.
    pub fn initial(&self) -> (&[f64], &[f64]) {
        (&self.e0, &self.weights)
    }

    /// `p_{m|n} = |<m|U|n>|²`, indexed `[m, n]`.
    pub fn transitions(&self) -> Array2<f64> {
        mm_ah(self.v_tau.view(), self.evolved.view()).mapv(|z| z.norm_sqr())
    }

    /// Peaks `w = E_m^τ − E_n^0` with weights `p_n p_{m|n}`, merged within [`MERGE_TOL`].
    pub fn peaks(&self) -> Vec<(f64, f64)> {
        let t = self.transitions();
        let mut raw = Vec::with_capacity(t.len());
        for (n, &p) in self.weights.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (m, &em) in self.e_tau.iter().enumerate() {
                let q = p * t[[m, n]];
                if q > TRANSITION_FLOOR {
                    raw.push((em - self.e0[n], q));
                }
            }
        }
        merge_peaks(raw)
    }

    /// `Tr[U† e^{iuH_τ} U ρ e^{−iuH_0}]` from dense spectral exponentials.
    pub fn characteristic(&self, u: f64) -> C64 {
        let fwd: Vec<C64> = self.e_tau.iter().map(|&e| C64::from_polar(1.0, u * e)).collect();
        let back: Vec<C64> = self.e0.iter().zip(&self.weights).map(|(&e, &p)| C64::from_polar(p, -u * e)).collect();
        let e_tau = spectral_apply(self.v_tau.view(), &fwd);
        let rho_back = spectral_apply(self.v0.view(), &back);
        let left = mm_ah(self.u.view(), mm(e_tau.view(), self.u.view()).view());
        trace_product(left.view(), rho_back.view())
    }

    /// `Tr[U†H_τU ρ] − Tr[H_0 ρ]`
    pub fn mean_work(&self) -> f64 {
        let amps = mm_ah(self.v_tau.view(), self.evolved.view());
        let mut acc = 0.0;
        for (n, &p) in self.weights.iter().enumerate() {
            let final_energy: f64 = self.e_tau.iter().enumerate().map(|(m, &em)| em * amps[[m, n]].norm_sqr()).sum();
            acc += p * (final_energy - self.e0[n]);
        }
        acc
    }

    /// `ΔF = −β⁻¹ ln(Z_τ/Z_0)` from the two spectra.
    pub fn delta_f(&self) -> f64 {
        -(log_partition(&self.e_tau, self.beta) - log_partition(&self.e0, self.beta)) / self.beta
    }

    pub fn distribution(&self) -> WorkDistribution {
        WorkDistribution::peaks(self.peaks(), self.beta, self.delta_f())
    }
}

/// Sorts peaks and merges neighbours closer than [`MERGE_TOL`] into their weighted mean.
pub fn merge_peaks(mut raw: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, f64)> = Vec::new(); // (weighted position sum, weight, last position)
    for (w, p) in raw {
        match out.last_mut() {
            Some(last) if w - last.2 < MERGE_TOL => {
                last.0 += w * p;
                last.1 += p;
                last.2 = w;
            }
            _ => out.push((w * p, p, w)),
        }
    }
    out.into_iter().map(|(s, p, _)| (s / p, p)).collect()
}

/// Two-measurement work distribution of `U` between `h0` and `h_tau`.
pub fn tmp_oracle(h0: &Operator, h_tau: &Operator, u: &Operator, beta: f64) -> Result<WorkDistribution> {
    let oracle = WorkOracle::new(h0, h_tau, u, beta)?;
    Ok(oracle.distribution())
}

/// `G[u] = ⟨U† e^{iuH_τ} U e^{−iuH_0}⟩` in the initial Gibbs state of `h0`.
pub fn char_direct(h0: &Operator, h_tau: &Operator, u_op: &Operator, beta: f64, u: f64) -> Result<C64> {
    Ok(WorkOracle::new(h0, h_tau, u_op, beta)?.characteristic(u))
}

/// Exclusive work: both measurements of the bare Hamiltonian `h_bare`.
pub fn exclusive_oracle(h_bare: &Operator, u: &Operator, beta: f64) -> Result<WorkOracle> {
    WorkOracle::new(h_bare, h_bare, u, beta)
}
