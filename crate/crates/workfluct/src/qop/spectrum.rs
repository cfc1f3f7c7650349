use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::layout::SpaceLayout;
use super::linalg;
use super::operator::Operator;
use crate::error::Result;

/// Input Hermiticity tolerance for spectral routines.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Eigenpairs of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    layout: SpaceLayout,
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<C64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &Array2<C64> {
        &self.eigenvectors
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn reconstruct(&self) -> Operator {
        self.apply(|e| C64::new(e, 0.0))
    }

    /// `f(H) = V diag(f(E)) V†`
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> Operator {
        let d: Vec<C64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        let entries = linalg::spectral_apply(self.eigenvectors.view(), &d);
        Operator::new(self.layout.clone(), entries).expect("layout preserved")
    }

    /// `exp(-i H t)`
    pub fn evolution(&self, t: f64) -> Operator {
        self.apply(|e| C64::from_polar(1.0, -e * t))
    }
}

pub fn eig_hermitian(op: &Operator) -> Result<Spectrum> {
    op.require_hermitian(HERMITIAN_TOL)?;
    let (eigenvalues, eigenvectors) = linalg::eigh(op.view())?;
    Ok(Spectrum { layout: op.layout().clone(), eigenvalues, eigenvectors })
}

/// `exp(-i h dt)` through the eigendecomposition of `h`.
pub fn expm_skew(h: &Operator, dt: f64) -> Result<Operator> {
    Ok(eig_hermitian(h)?.evolution(dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::fock::{number, sigma_x};
    use std::f64::consts::PI;

    #[test]
    fn pauli_x_spectrum() {
        let s = eig_hermitian(&sigma_x()).unwrap();
        assert!((s.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_spectrum_sorted_with_permutation_vectors() {
        let h = Operator::from_real(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]).unwrap();
        let s = eig_hermitian(&h).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 2.0, 3.0]);
        let v = s.eigenvectors();
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert!((v[[row, col]].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bare_oscillator_levels() {
        let n = number(20).unwrap();
        let h = &n + &Operator::identity(n.layout()).scale(0.5);
        let s = eig_hermitian(&h).unwrap();
        for (k, e) in s.eigenvalues().iter().enumerate() {
            assert!((e - (k as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = Operator::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(eig_hermitian(&h).is_err());
        assert!(expm_skew(&h, 1.0).is_err());
    }

    #[test]
    fn zero_generator_gives_identity() {
        let z = Operator::zeros(&SpaceLayout::single(4).unwrap());
        let u = expm_skew(&z, 3.7).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(z.layout())) < 1e-15);
    }

    #[test]
    fn half_turn_about_x_is_minus_identity() {
        let u = expm_skew(&sigma_x(), PI).unwrap();
        let minus = Operator::identity(u.layout()).scale(-1.0);
        assert!(u.max_abs_diff(&minus) < 1e-14);
    }
}
