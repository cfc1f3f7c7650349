use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::qop::{DensityMatrix, Operator, SpaceLayout};

/// Index of `|q₁q₂>` in the two-qubit basis `++, +−, −+, −−`.
const MP: usize = 2;
const MM: usize = 3;

/// `Σᶻ = Π₋₊ − Π₋₋`
pub fn sigma2_z() -> Operator {
    let mut m = Array2::zeros((4, 4));
    m[[MP, MP]] = C64::new(1.0, 0.0);
    m[[MM, MM]] = C64::new(-1.0, 0.0);
    Operator::new(SpaceLayout::new(vec![2, 2]).expect("valid"), m).expect("square")
}

/// `Σʸ = i(|−−><−+| − |−+><−−|)`, the `σʸ` of the `{−+, −−}` subspace.
pub fn sigma2_y() -> Operator {
    let mut m = Array2::zeros((4, 4));
    m[[MM, MP]] = C64::new(0.0, 1.0);
    m[[MP, MM]] = C64::new(0.0, -1.0);
    Operator::new(SpaceLayout::new(vec![2, 2]).expect("valid"), m).expect("square")
}

/// Exact `(<Σᶻ>, <Σʸ>)` of a two-qubit state.
pub fn tomography_expectations(rho2a: &DensityMatrix) -> Result<(f64, f64)> {
    if rho2a.layout().factors() != [2, 2] {
        return Err(Error::Dimension(format!(
            "two-qubit tomography needs layout [2, 2], got {:?}",
            rho2a.layout().factors()
        )));
    }
    Ok((rho2a.expectation(&sigma2_z()).re, rho2a.expectation(&sigma2_y()).re))
}

/// Pauli expectations `(<σˣ>, <σʸ>, <σᶻ>)` of a 2×2 density matrix.
pub fn bloch_vector(rho: &Array2<C64>) -> (f64, f64, f64) {
    let c = rho[[1, 0]];
    (2.0 * c.re, 2.0 * c.im, (rho[[0, 0]] - rho[[1, 1]]).re)
}

/// Estimates of two `±1`-valued observables from `shots` repetitions each.
///
/// `stream` separates independent draws under one seed.
pub fn emulate_shots(exp_z: f64, exp_y: f64, shots: u64, seed: u64, stream: u64) -> Result<(f64, f64)> {
    if shots < 1 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut draw = |e: f64| -> Result<f64> {
        if !(e.abs() <= 1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!("expectation {e} outside [-1, 1]")));
        }
        let p = (0.5 * (1.0 + e)).clamp(0.0, 1.0);
        let dist = Binomial::new(shots, p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let k = dist.sample(&mut rng);
        Ok(2.0 * k as f64 / shots as f64 - 1.0)
    };
    let z = draw(exp_z)?;
    let y = draw(exp_y)?;
    Ok((z, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_qubit() -> SpaceLayout {
        SpaceLayout::new(vec![2, 2]).unwrap()
    }

    #[test]
    fn basis_state_expectations() {
        let mm = DensityMatrix::basis(&two_qubit(), MM).unwrap();
        assert_eq!(tomography_expectations(&mm).unwrap(), (-1.0, 0.0));
        let mp = DensityMatrix::basis(&two_qubit(), MP).unwrap();
        assert_eq!(tomography_expectations(&mp).unwrap().0, 1.0);
    }

    #[test]
    fn subspace_y_eigenstate() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(0.0, h)];
        let rho = DensityMatrix::pure(&two_qubit(), &psi).unwrap();
        let (z, y) = tomography_expectations(&rho).unwrap();
        assert!(z.abs() < 1e-15);
        assert!((y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn real_superposition_has_no_y_component() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0)];
        let rho = DensityMatrix::pure(&two_qubit(), &psi).unwrap();
        assert!(tomography_expectations(&rho).unwrap().1.abs() < 1e-15);
    }

    #[test]
    fn wrong_layout_is_rejected() {
        let rho = DensityMatrix::basis(&SpaceLayout::single(4).unwrap(), 0).unwrap();
        assert!(tomography_expectations(&rho).is_err());
    }

    #[test]
    fn certain_outcomes_are_exact() {
        assert_eq!(emulate_shots(1.0, -1.0, 17, 3, 0).unwrap(), (1.0, -1.0));
    }

    #[test]
    fn zero_shots_rejected() {
        assert!(emulate_shots(0.0, 0.0, 0, 1, 0).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = emulate_shots(0.3, -0.2, 1000, 42, 7).unwrap();
        assert_eq!(a, emulate_shots(0.3, -0.2, 1000, 42, 7).unwrap());
        assert_ne!(a, emulate_shots(0.3, -0.2, 1000, 42, 8).unwrap());
    }

    #[test]
    fn unbiased_estimate_at_zero() {
        // 4.5 standard errors at 10⁴ shots is 0.045; tail probability below 1e-5.
        for stream in 0..50 {
            let (z, y) = emulate_shots(0.0, 0.0, 10_000, 11, stream).unwrap();
            assert!(z.abs() < 0.05 && y.abs() < 0.05);
        }
    }
}
