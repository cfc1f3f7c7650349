use serde::Serialize;

use crate::error::{Error, Result};

/// Tensor-product structure of a truncated Hilbert space.
///
/// Factors are ordered with the leftmost slot most significant, so the basis
/// index of `|i0, i1, ..>` is `i0 * (d1 * d2 * ..) + i1 * (d2 * ..) + ..`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SpaceLayout {
    factors: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Dimension("layout needs at least one factor".into()));
        }
        if let Some(&d) = factors.iter().find(|&&d| d < 2) {
            return Err(Error::Dimension(format!("factor dimension {d} is below 2")));
        }
        Ok(Self { factors })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().product()
    }

    /// Layout of `self ⊗ other`.
    pub fn tensor(&self, other: &SpaceLayout) -> SpaceLayout {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        SpaceLayout { factors }
    }

    /// Sub-layout made of the given slots, in the given order.
    pub fn select(&self, slots: &[usize]) -> Result<SpaceLayout> {
        let mut factors = Vec::with_capacity(slots.len());
        for &s in slots {
            factors.push(*self.factors.get(s).ok_or(Error::SlotOutOfRange { slot: s, len: self.len() })?);
        }
        SpaceLayout::new(factors)
    }

    /// Decomposes a flat index into per-slot indices.
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (k, &d) in self.factors.iter().enumerate().rev() {
            out[k] = index % d;
            index /= d;
        }
        out
    }

    pub fn ravel(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.factors).fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_factors() {
        assert!(SpaceLayout::new(vec![]).is_err());
        assert!(SpaceLayout::new(vec![2, 1]).is_err());
    }

    #[test]
    fn ravel_round_trip() {
        let l = SpaceLayout::new(vec![2, 2, 5]).unwrap();
        assert_eq!(l.total_dim(), 20);
        for i in 0..20 {
            assert_eq!(l.ravel(&l.unravel(i)), i);
        }
        assert_eq!(l.ravel(&[1, 0, 3]), 13);
    }
}
