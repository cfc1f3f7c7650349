use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::layout::SpaceLayout;
use super::linalg;
use super::operator::Operator;
use super::spectrum::{eig_hermitian, Spectrum};
use crate::error::{Error, Result};

pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const STATE_TRACE_TOL: f64 = 1e-8;
pub const STATE_EIGEN_FLOOR: f64 = -1e-9;

/// Hermitian, unit-trace, positive-semidefinite operator.
///
/// The invariants are checked at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let deviation = op.hermiticity_defect();
        if deviation > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("Hermiticity defect {deviation:.3e}")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let (evals, _) = linalg::eigh(op.view())?;
        if let Some(&e) = evals.first() {
            if e < STATE_EIGEN_FLOOR {
                return Err(Error::InvalidState(format!("negative eigenvalue {e:.3e}")));
            }
        }
        Ok(Self { op })
    }

    /// Projector onto a normalized pure state.
    pub fn pure(layout: &SpaceLayout, psi: &[C64]) -> Result<Self> {
        let n = layout.total_dim();
        if psi.len() != n {
            return Err(Error::Dimension(format!("state vector has {} entries, expected {n}", psi.len())));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let entries = Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj() / (norm * norm));
        Self::new(Operator::new(layout.clone(), entries)?)
    }

    /// Projector onto basis state `index`.
    pub fn basis(layout: &SpaceLayout, index: usize) -> Result<Self> {
        let mut psi = vec![C64::new(0.0, 0.0); layout.total_dim()];
        *psi.get_mut(index).ok_or_else(|| Error::Dimension(format!("basis index {index} out of range")))? =
            C64::new(1.0, 0.0);
        Self::pure(layout, &psi)
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.op.layout()
    }

    pub fn entries(&self) -> &Array2<C64> {
        self.op.entries()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.op.trace_product(&self.op).re
    }

    /// `Tr(ρ O)`
    pub fn expectation(&self, obs: &Operator) -> C64 {
        self.op.trace_product(obs)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.op.entries().diag().iter().map(|z| z.re).collect()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        DensityMatrix::new(self.op.kron(&other.op))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::eigh(self.op.view())?.0)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        partial_trace(self, keep)
    }
}

/// Traces out every slot not listed in `keep`; the kept slots stay in layout order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = rho.layout();
    let nslots = layout.len();
    if keep.is_empty() {
        return Err(Error::Dimension("partial trace must keep at least one slot".into()));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if let Some(&s) = keep_sorted.iter().find(|&&s| s >= nslots) {
        return Err(Error::SlotOutOfRange { slot: s, len: nslots });
    }
    if keep_sorted.len() == nslots {
        return Err(Error::Dimension("partial trace must remove at least one slot".into()));
    }
    let traced: Vec<usize> = (0..nslots).filter(|s| !keep_sorted.contains(s)).collect();
    let kept_layout = layout.select(&keep_sorted)?;
    let traced_layout = layout.select(&traced)?;
    let nk = kept_layout.total_dim();
    let nt = traced_layout.total_dim();

    let full_index = |k: usize, t: usize| {
        let kd = kept_layout.unravel(k);
        let td = traced_layout.unravel(t);
        let mut digits = vec![0; nslots];
        for (slot, d) in keep_sorted.iter().zip(kd) {
            digits[*slot] = d;
        }
        for (slot, d) in traced.iter().zip(td) {
            digits[*slot] = d;
        }
        layout.ravel(&digits)
    };
    let index: Vec<Vec<usize>> = (0..nk).map(|k| (0..nt).map(|t| full_index(k, t)).collect()).collect();

    let e = rho.entries();
    let mut out = Array2::zeros((nk, nk));
    for i in 0..nk {
        for j in 0..nk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..nt {
                acc += e[[index[i][t], index[j][t]]];
            }
            out[[i, j]] = acc;
        }
    }
    DensityMatrix::new(Operator::new(kept_layout, out)?)
}

/// Gibbs weights `e^{-βE}/Z` of a spectrum, computed with a shifted exponent.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `ln Tr e^{-βH}` from a spectrum.
pub fn log_partition(energies: &[f64], beta: f64) -> f64 {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = energies.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    z.ln() - beta * e0
}

pub fn thermal_from_spectrum(spec: &Spectrum, beta: f64) -> Result<DensityMatrix> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let p = gibbs_weights(spec.eigenvalues(), beta);
    let d: Vec<C64> = p.iter().map(|&x| C64::new(x, 0.0)).collect();
    let op = Operator::new(spec.layout().clone(), linalg::spectral_apply(spec.eigenvectors().view(), &d))?;
    // Remove rounding asymmetry so the state passes the strict Hermiticity check.
    let sym = (&op + &op.dagger()).scale(0.5);
    DensityMatrix::new(sym)
}

/// `e^{-βh} / Tr e^{-βh}`
pub fn thermal_state(h: &Operator, beta: f64) -> Result<DensityMatrix> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    thermal_from_spectrum(&eig_hermitian(h)?, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::fock::{number, sigma_z};

    fn maximally_mixed_qubit() -> Operator {
        Operator::identity(&SpaceLayout::single(2).unwrap()).scale(0.5)
    }

    #[test]
    fn construction_checks() {
        let l = SpaceLayout::single(2).unwrap();
        assert!(DensityMatrix::new(Operator::identity(&l)).is_err());
        assert!(DensityMatrix::new(Operator::diagonal(&l, &[1.5, -0.5]).unwrap()).is_err());
        assert!(DensityMatrix::new(maximally_mixed_qubit()).is_ok());
    }

    #[test]
    fn product_marginals() {
        let a = DensityMatrix::new(Operator::from_real(&[&[0.7, 0.1], &[0.1, 0.3]]).unwrap()).unwrap();
        let b =
            DensityMatrix::new(Operator::from_real(&[&[0.5, 0.0, 0.1], &[0.0, 0.25, 0.0], &[0.1, 0.0, 0.25]]).unwrap())
                .unwrap();
        let ab = a.tensor(&b).unwrap();
        assert!(ab.partial_trace(&[0]).unwrap().operator().max_abs_diff(a.operator()) < 1e-12);
        assert!(ab.partial_trace(&[1]).unwrap().operator().max_abs_diff(b.operator()) < 1e-12);
    }

    #[test]
    fn bell_marginal_is_mixed() {
        let l = SpaceLayout::new(vec![2, 2]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)];
        let rho = DensityMatrix::pure(&l, &psi).unwrap();
        let m = rho.partial_trace(&[0]).unwrap();
        assert!(m.operator().max_abs_diff(&maximally_mixed_qubit()) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_keep() {
        let l = SpaceLayout::new(vec![2, 2]).unwrap();
        let rho = DensityMatrix::basis(&l, 0).unwrap();
        assert!(rho.partial_trace(&[]).is_err());
        assert!(rho.partial_trace(&[0, 1]).is_err());
        assert!(rho.partial_trace(&[2]).is_err());
    }

    #[test]
    fn zero_temperature_limit() {
        let n = number(12).unwrap();
        let h = &n + &Operator::identity(n.layout()).scale(0.5);
        let rho = thermal_state(&h, 1e3).unwrap();
        let ground = DensityMatrix::basis(h.layout(), 0).unwrap();
        assert!(rho.operator().max_abs_diff(ground.operator()) < 1e-6);
    }

    #[test]
    fn two_level_gibbs() {
        let h = Operator::from_real(&[&[0.0, 0.0], &[0.0, 1.0]]).unwrap();
        let p = thermal_state(&h, 1.0).unwrap().populations();
        let e = (-1.0f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-14);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-14);
    }

    #[test]
    fn geometric_oscillator_ratios() {
        let n = number(30).unwrap();
        let h = &n + &Operator::identity(n.layout()).scale(0.5);
        let p = thermal_state(&h, 1.0).unwrap().populations();
        assert!((p[1] / p[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn thermal_rejects_bad_beta() {
        assert!(thermal_state(&sigma_z(), 0.0).is_err());
        assert!(thermal_state(&sigma_z(), -1.0).is_err());
    }
}
