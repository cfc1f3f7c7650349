use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::layout::SpaceLayout;
use super::operator::Operator;
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Truncated annihilation and creation operators, `a[n-1, n] = √n`.
pub fn fock_ops(n_fock: usize) -> Result<(Operator, Operator)> {
    if n_fock < 2 {
        return Err(Error::Dimension(format!("n_fock = {n_fock} must be at least 2")));
    }
    let mut a = Array2::zeros((n_fock, n_fock));
    for n in 1..n_fock {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a = Operator::from_matrix(a)?;
    let ad = a.dagger();
    Ok((a, ad))
}

/// `a†a`
pub fn number(n_fock: usize) -> Result<Operator> {
    let layout = SpaceLayout::single(n_fock)?;
    Operator::diagonal(&layout, &(0..n_fock).map(|n| n as f64).collect::<Vec<_>>())
}

/// `Q = (a + a†)²`, built from the truncated ladder operators.
pub fn quadrature_sq(n_fock: usize) -> Result<Operator> {
    let (a, ad) = fock_ops(n_fock)?;
    let x = &a + &ad;
    Ok(&x * &x)
}

/// `a + a†`
pub fn position(n_fock: usize) -> Result<Operator> {
    let (a, ad) = fock_ops(n_fock)?;
    Ok(&a + &ad)
}

fn qubit(m: [[C64; 2]; 2]) -> Operator {
    let entries = Array2::from_shape_fn((2, 2), |(i, j)| m[i][j]);
    Operator::from_matrix(entries).expect("2x2")
}

// Qubit basis ordering: index 0 is |+> (up), index 1 is |-> (down).

pub fn sigma_x() -> Operator {
    qubit([[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> Operator {
    qubit([[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> Operator {
    qubit([[ONE, ZERO], [ZERO, -ONE]])
}

/// `|+><-|`
pub fn sigma_plus() -> Operator {
    qubit([[ZERO, ONE], [ZERO, ZERO]])
}

/// `|-><+|`
pub fn sigma_minus() -> Operator {
    qubit([[ZERO, ZERO], [ONE, ZERO]])
}

/// `Π₊ = |+><+|`
pub fn proj_plus() -> Operator {
    qubit([[ONE, ZERO], [ZERO, ZERO]])
}

/// `Π₋ = |-><-|`
pub fn proj_minus() -> Operator {
    qubit([[ZERO, ZERO], [ZERO, ONE]])
}

/// `(σx + σz)/√2`
pub fn hadamard() -> Operator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    qubit([[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]])
}

/// `I ⊗ .. ⊗ op ⊗ .. ⊗ I` with `op` placed at `slot`.
pub fn embed(op: &Operator, slot: usize, layout: &SpaceLayout) -> Result<Operator> {
    let factors = layout.factors();
    if slot >= factors.len() {
        return Err(Error::SlotOutOfRange { slot, len: factors.len() });
    }
    if op.dim() != factors[slot] {
        return Err(Error::Dimension(format!(
            "operator dimension {} does not match factor {} at slot {slot}",
            op.dim(),
            factors[slot]
        )));
    }
    let left: usize = factors[..slot].iter().product();
    let right: usize = factors[slot + 1..].iter().product();
    let d = op.dim();
    let n = layout.total_dim();
    let mut entries = Array2::zeros((n, n));
    for l in 0..left {
        for ((i, j), &x) in op.entries().indexed_iter() {
            if x == ZERO {
                continue;
            }
            let row0 = (l * d + i) * right;
            let col0 = (l * d + j) * right;
            for r in 0..right {
                entries[[row0 + r, col0 + r]] = x;
            }
        }
    }
    Operator::new(layout.clone(), entries)
}
