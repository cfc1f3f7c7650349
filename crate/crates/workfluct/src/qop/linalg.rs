//! Thin bridge between `ndarray` storage and `faer` kernels.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef, Par, Side};
use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

fn as_faer<'a>(a: &'a ArrayView2<'a, C64>) -> MatRef<'a, C64> {
    let slice = a.as_slice().expect("standard layout");
    MatRef::from_row_major_slice(slice, a.nrows(), a.ncols())
}

fn product(a: ArrayView2<C64>, b: ArrayView2<C64>, adj_a: bool, adj_b: bool) -> Array2<C64> {
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let av = a.view();
    let bv = b.view();
    let fa = as_faer(&av);
    let fb = as_faer(&bv);
    let m = if adj_a { fa.ncols() } else { fa.nrows() };
    let n = if adj_b { fb.nrows() } else { fb.ncols() };
    let mut out = Array2::<C64>::zeros((m, n));
    {
        let dst = faer::MatMut::from_row_major_slice_mut(out.as_slice_mut().unwrap(), m, n);
        let one = C64::new(1.0, 0.0);
        match (adj_a, adj_b) {
            (false, false) => matmul(dst, Accum::Replace, fa, fb, one, Par::Seq),
            (true, false) => matmul(dst, Accum::Replace, fa.adjoint(), fb, one, Par::Seq),
            (false, true) => matmul(dst, Accum::Replace, fa, fb.adjoint(), one, Par::Seq),
            (true, true) => matmul(dst, Accum::Replace, fa.adjoint(), fb.adjoint(), one, Par::Seq),
        }
    }
    out
}

/// `a · b`
pub fn mm(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    product(a, b, false, false)
}

/// `a† · b`
pub fn mm_ah(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    product(a, b, true, false)
}

/// `a · b†`
pub fn mm_bh(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    product(a, b, false, true)
}

/// Largest entrywise deviation `max |a - a†|`.
pub fn hermiticity_defect(a: ArrayView2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn eigh(a: ArrayView2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let a = a.as_standard_layout();
    let av = a.view();
    let fa = as_faer(&av);
    let evd = fa
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Dimension(format!("eigendecomposition failed: {e:?}")))?;
    let n = a.nrows();
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(r, c)| u[(r, order[c])]);
    Ok((eigenvalues, eigenvectors))
}

/// `V diag(d) V†`
pub fn spectral_apply(v: ArrayView2<C64>, d: &[C64]) -> Array2<C64> {
    let mut vd = v.to_owned();
    for (mut col, &x) in vd.columns_mut().into_iter().zip(d) {
        col.mapv_inplace(|z| z * x);
    }
    mm_bh(vd.view(), v)
}

/// Maximum entrywise deviation of `u u†` from the identity.
pub fn unitarity_defect(u: ArrayView2<C64>) -> f64 {
    let p = mm_bh(u, u);
    let mut worst = 0.0f64;
    for ((i, j), z) in p.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((z - target).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn products_match_naive() {
        let a = array![[c(1.0, 2.0), c(0.0, -1.0)], [c(3.0, 0.5), c(-2.0, 1.0)]];
        let b = array![[c(0.5, 0.0), c(1.0, 1.0)], [c(-1.0, 2.0), c(0.0, 3.0)]];
        let naive = a.dot(&b);
        assert!((&mm(a.view(), b.view()) - &naive).iter().all(|z| z.norm() < 1e-14));
        let ah = a.t().mapv(|z| z.conj());
        let bh = b.t().mapv(|z| z.conj());
        assert!((&mm_ah(a.view(), b.view()) - &ah.dot(&b)).iter().all(|z| z.norm() < 1e-14));
        assert!((&mm_bh(a.view(), b.view()) - &a.dot(&bh)).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn products_accept_transposed_views() {
        let a = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(3.0, 0.0), c(4.0, 0.0)]];
        let at = a.t();
        let p = mm(at, a.view());
        assert_eq!(p[[0, 0]], c(10.0, 0.0));
        assert_eq!(p[[0, 1]], c(14.0, 0.0));
    }
}
