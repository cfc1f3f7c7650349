use std::ops::{Add, Mul, Sub};

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;

use super::layout::SpaceLayout;
use super::linalg;
use crate::error::{Error, Result};

/// Dense complex operator on a composite Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    layout: SpaceLayout,
    entries: Array2<C64>,
}

impl Operator {
    pub fn new(layout: SpaceLayout, entries: Array2<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if entries.dim() != (n, n) {
            return Err(Error::Dimension(format!(
                "entries are {:?}, layout {:?} needs {n}x{n}",
                entries.dim(),
                layout.factors()
            )));
        }
        Ok(Self { layout, entries })
    }

    /// Operator on a single-factor space of the matrix size.
    pub fn from_matrix(entries: Array2<C64>) -> Result<Self> {
        let layout = SpaceLayout::single(entries.nrows())?;
        Self::new(layout, entries)
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix rows must all have the same length as the row count".into()));
        }
        Self::from_matrix(Array2::from_shape_fn((n, n), |(i, j)| C64::new(rows[i][j], 0.0)))
    }

    pub fn zeros(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), entries: Array2::zeros((n, n)) }
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), entries: Array2::eye(n) }
    }

    pub fn diagonal(layout: &SpaceLayout, diag: &[f64]) -> Result<Self> {
        let n = layout.total_dim();
        if diag.len() != n {
            return Err(Error::Dimension(format!("diagonal has {} entries, expected {n}", diag.len())));
        }
        let mut entries = Array2::zeros((n, n));
        for (i, &d) in diag.iter().enumerate() {
            entries[[i, i]] = C64::new(d, 0.0);
        }
        Ok(Self { layout: layout.clone(), entries })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[[i, j]]
    }

    /// Same entries, reinterpreted on another layout of equal total dimension.
    pub fn with_layout(self, layout: SpaceLayout) -> Result<Self> {
        Self::new(layout, self.entries)
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Dimension(format!(
                "layout mismatch: {:?} vs {:?}",
                self.layout.factors(),
                other.layout.factors()
            )));
        }
        Ok(())
    }

    pub fn dagger(&self) -> Operator {
        Operator { layout: self.layout.clone(), entries: self.entries.t().mapv(|z| z.conj()) }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Operator { layout: self.layout.clone(), entries: linalg::mm(self.view(), other.view()) })
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Operator { layout: self.layout.clone(), entries: &self.entries + &other.entries })
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Operator { layout: self.layout.clone(), entries: &self.entries - &other.entries })
    }

    pub fn scale(&self, c: f64) -> Operator {
        Operator { layout: self.layout.clone(), entries: self.entries.mapv(|z| z * c) }
    }

    pub fn scale_complex(&self, c: C64) -> Operator {
        Operator { layout: self.layout.clone(), entries: self.entries.mapv(|z| z * c) }
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, c: f64, other: &Operator) -> Result<()> {
        self.check_same(other)?;
        self.entries.scaled_add(C64::new(c, 0.0), &other.entries);
        Ok(())
    }

    /// `self ⊗ other`, with the layouts concatenated.
    pub fn kron(&self, other: &Operator) -> Operator {
        let (n, m) = (self.dim(), other.dim());
        let mut entries = Array2::zeros((n * m, n * m));
        for ((i, j), &a) in self.entries.indexed_iter() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = entries.slice_mut(ndarray::s![i * m..(i + 1) * m, j * m..(j + 1) * m]);
            block.zip_mut_with(&other.entries, |x, &b| *x = a * b);
        }
        Operator { layout: self.layout.tensor(&other.layout), entries }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.matmul(other)?.try_sub(&other.matmul(self)?)
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.view())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_defect();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.entries.iter().zip(other.entries.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(self.view())
    }

    /// Gershgorin bounds on the spectrum of a Hermitian operator.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, row) in self.entries.rows().into_iter().enumerate() {
            let radius: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, z)| z.norm()).sum();
            let c = row[i].re;
            lo = lo.min(c - radius);
            hi = hi.max(c + radius);
        }
        (lo, hi)
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        trace_product(self.view(), other.view())
    }
}

/// `Tr(a · b)`
pub fn trace_product(a: ArrayView2<C64>, b: ArrayView2<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (i, row) in a.rows().into_iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            acc += x * b[[j, i]];
        }
    }
    acc
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator layouts must match")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.try_sub(rhs).expect("operator layouts must match")
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs).expect("operator layouts must match")
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}
