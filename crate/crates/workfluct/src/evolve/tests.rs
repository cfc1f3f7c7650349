use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use super::*;
use crate::model::{
    drive_inclusive, forward_protocol, h_system, ideal_generator, system_generator, Coef, ModelParams, Schedule,
    TdHamiltonian,
};
use crate::qop::{
    eig_hermitian, expm_skew, number, quadrature_sq, sigma_x, sigma_z, DensityMatrix, Operator, SpaceLayout,
};

fn small() -> ModelParams {
    ModelParams { n_fock: 8, ..ModelParams::default() }
}

fn coarse(method: Method) -> PropagationConfig {
    PropagationConfig { dt: 0.01, method, ..PropagationConfig::default() }
}

#[test]
fn constant_generator_is_exact() {
    let p = small();
    let h = h_system(&p, 0.1).unwrap();
    let td = TdHamiltonian::new(h.layout()).with_term(h.clone(), Coef::Const(1.0)).unwrap();
    let u = propagator(&td, 0.3, 2.3, &coarse(Method::Midpoint)).unwrap();
    assert!(u.max_abs_diff(&expm_skew(&h, 2.0).unwrap()) < 1e-12);
}

#[test]
fn empty_interval_is_identity() {
    let p = small();
    let td = system_generator(&p, &forward_protocol(&p).unwrap()).unwrap();
    let u = propagator(&td, 1.0, 1.0, &coarse(Method::Midpoint)).unwrap();
    assert!(u.max_abs_diff(&Operator::identity(td.layout())) < 1e-15);
}

#[test]
fn backwards_interval_is_rejected() {
    let p = small();
    let td = system_generator(&p, &forward_protocol(&p).unwrap()).unwrap();
    assert!(propagator(&td, 1.0, 0.5, &coarse(Method::Midpoint)).is_err());
}

#[test]
fn oversized_step_is_rejected() {
    let p = small();
    let td = system_generator(&p, &forward_protocol(&p).unwrap()).unwrap();
    let err = propagator(&td, 0.0, 1.0, &PropagationConfig { dt: 0.5, ..coarse(Method::Midpoint) }).unwrap_err();
    assert!(matches!(err, crate::Error::StepTooLarge { .. }));
}

#[test]
fn sparse_stepping_matches_dense_stepping() {
    let p = small();
    let lambda = forward_protocol(&p).unwrap();
    let td = system_generator(&p, &lambda).unwrap();
    for method in [Method::Midpoint, Method::CommutatorCorrected] {
        let cfg = coarse(method);
        let a = propagator(&td, 0.0, p.tau, &cfg).unwrap();
        let b = propagator_fn(|t| td.at(t), 0.0, p.tau, &cfg).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-11, "{method:?}: {}", a.max_abs_diff(&b));
        assert!(a.unitarity_defect() < 1e-12);
    }
}

/// `H(t) = R H₀ R†` with `R = e^{−iKt}` has `U(t) = e^{−iKt} e^{−i(H₀−K)t}`.
fn rotating_frame_error(method: Method, dt: f64) -> f64 {
    let p = small();
    let h0 = h_system(&p, 0.1).unwrap();
    let k = &number(p.n_fock).unwrap().scale(0.7) + &quadrature_sq(p.n_fock).unwrap().scale(0.05);
    let ks = eig_hermitian(&k).unwrap();
    let h = |t: f64| {
        let r = ks.evolution(t);
        r.matmul(&h0).unwrap().matmul(&r.dagger()).unwrap()
    };
    let t = 1.0;
    let exact = ks.evolution(t).matmul(&expm_skew(&(&h0 - &k), t).unwrap()).unwrap();
    let cfg = PropagationConfig { dt, method, ..PropagationConfig::default() };
    propagator_fn(h, 0.0, t, &cfg).unwrap().max_abs_diff(&exact)
}

#[test]
fn halving_dt_is_second_order() {
    for method in [Method::Midpoint, Method::CommutatorCorrected] {
        let e1 = rotating_frame_error(method, 0.02);
        let e2 = rotating_frame_error(method, 0.01);
        // Midpoint approaches the asymptotic ratio 4 from below.
        let floor = if method == Method::Midpoint { 3.99 } else { 4.0 };
        assert!(e1 / e2 >= floor, "{method:?}: {e1:e} -> {e2:e}");
    }
}

#[test]
fn ideal_generator_stays_block_diagonal() {
    let p = small();
    let drive = drive_inclusive(&forward_protocol(&p).unwrap(), p.tau, 0.7).unwrap();
    let full = ideal_generator(&p, &drive, p.eps_ideal).unwrap().assemble().unwrap();
    let u = propagator(&full, 0.0, drive.total_time(), &coarse(Method::Midpoint)).unwrap();
    let n = p.n_fock;
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            off = off.max(u.get(i, n + j).norm()).max(u.get(n + i, j).norm());
        }
    }
    assert!(off <= 1e-10, "{off:e}");
}

#[test]
fn upper_block_factorizes() {
    // Upper block: e^{−iεT/2} e^{−iuH(λ_τ)} U_S(τ)
    let p = small();
    let lambda = forward_protocol(&p).unwrap();
    let u = 0.9;
    let drive = drive_inclusive(&lambda, p.tau, u).unwrap();
    let cfg = coarse(Method::Midpoint);
    let gen = ideal_generator(&p, &drive, p.eps_ideal).unwrap();
    let full = propagator(&gen.assemble().unwrap(), 0.0, drive.total_time(), &cfg).unwrap();
    let us = propagator(&system_generator(&p, &lambda).unwrap(), 0.0, p.tau, &cfg).unwrap();
    let hold = expm_skew(&h_system(&p, p.lambda_tau()).unwrap(), u).unwrap();
    let expected =
        hold.matmul(&us).unwrap().scale_complex(C64::from_polar(1.0, -0.5 * p.eps_ideal * drive.total_time()));
    let n = p.n_fock;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((full.get(i, j) - expected.get(i, j)).norm());
        }
    }
    // The full run cuts the ramp at t = u, so the step grids differ slightly.
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn cache_reproduces_direct_propagation() {
    let p = small();
    let lambda = forward_protocol(&p).unwrap();
    let cfg = coarse(Method::CommutatorCorrected);
    let gens: Vec<TdHamiltonian> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&u| {
            let d = drive_inclusive(&lambda, p.tau, u).unwrap();
            ideal_generator(&p, &d, p.eps_ideal).unwrap().blocks()[1].system.clone()
        })
        .collect();
    let jobs: Vec<_> = gens.iter().zip([0.5, 1.0, 1.5]).map(|(g, u)| (g, 0.0, p.tau + u)).collect();
    let cache = SegmentCache::plan(jobs.iter().copied(), &cfg).unwrap();
    assert!(!cache.is_empty());
    for (g, t0, t1) in jobs {
        let mut d = Diagnostics::default();
        let a = propagator_cached(g, t0, t1, &cfg, Some(&cache), &mut d).unwrap();
        let b = propagator(g, t0, t1, &cfg).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
    let again = SegmentCache::plan(jobs_again(&gens, p.tau), &cfg).unwrap();
    assert_eq!(again.len(), cache.len());
}

#[test]
fn chunked_cache_reproduces_direct_propagation() {
    let p = small();
    let td = system_generator(&p, &forward_protocol(&p).unwrap()).unwrap();
    let cfg = coarse(Method::CommutatorCorrected);
    // Ramp prefixes of different lengths: each piece occurs once, its chunks recur.
    let ends = [1.0, 1.5, 2.0, 2.75];
    let jobs = |j: usize| Ok(vec![(td.clone(), 0.0, ends[j])]);
    let whole = SegmentCache::plan_indexed(ends.len(), None, jobs, &cfg).unwrap();
    let chunked = SegmentCache::plan_indexed(ends.len(), Some(0.25), jobs, &cfg).unwrap();
    assert!(whole.is_empty());
    assert_eq!(chunked.len(), 8);
    for t1 in ends {
        let mut d = Diagnostics::default();
        let a = propagator_cached(&td, 0.0, t1, &cfg, Some(&chunked), &mut d).unwrap();
        let b = propagator(&td, 0.0, t1, &cfg).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-11, "t1 = {t1}: {}", a.max_abs_diff(&b));
        assert_eq!(d.steps, (t1 / cfg.dt).round() as usize, "t1 = {t1}");
    }
}

#[test]
fn pieces_split_into_chunks_from_their_start() {
    let p = small();
    let td = system_generator(&p, &forward_protocol(&p).unwrap()).unwrap();
    let piece = td.pieces(0.0, 1.1).remove(0);
    let parts = piece.chunks(0.25);
    let lens: Vec<f64> = parts.iter().map(|c| c.len).collect();
    assert_eq!(lens.len(), 5);
    assert!(lens[..4].iter().all(|&l| (l - 0.25).abs() < 1e-15));
    assert!((lens[4] - 0.1).abs() < 1e-12);
    for c in &parts {
        for t in [0.0, 0.5 * c.len, c.len] {
            assert!(td.piece_dense(c, t).max_abs_diff(&td.at(c.start + t)) < 1e-12);
        }
    }
}

fn jobs_again(gens: &[TdHamiltonian], tau: f64) -> Vec<(&TdHamiltonian, f64, f64)> {
    gens.iter().zip([0.5, 1.0, 1.5]).map(|(g, u)| (g, 0.0, tau + u)).collect()
}

#[test]
fn evolve_rho_examples() {
    let l = SpaceLayout::single(2).unwrap();
    let up = DensityMatrix::basis(&l, 0).unwrap();
    let u = expm_skew(&sigma_x(), PI / 2.0).unwrap();
    let out = evolve_rho(&up, &u).unwrap();
    assert!((out.entries()[[1, 1]].re - 1.0).abs() < 1e-12);
    let id = Operator::identity(&l);
    assert!(evolve_rho(&up, &id).unwrap().operator().max_abs_diff(up.operator()) < 1e-15);
    let l3 = SpaceLayout::single(3).unwrap();
    assert!(evolve_rho(&DensityMatrix::basis(&l3, 0).unwrap(), &u).is_err());
}

#[test]
fn comparison_of_identical_generators_has_no_gap() {
    let p = small();
    let l = SpaceLayout::new(vec![2, p.n_fock]).unwrap();
    let h = TdHamiltonian::new(&l)
        .with_term(crate::qop::embed(&sigma_z(), 0, &l).unwrap(), Coef::Const(0.5))
        .unwrap()
        .with_term(
            crate::qop::embed(&quadrature_sq(p.n_fock).unwrap(), 1, &l).unwrap(),
            Coef::scheduled(-1.0, &Schedule::linear_ramp(0.0, 0.01, 2.0).unwrap()),
        )
        .unwrap();
    let rho = DensityMatrix::basis(&l, 1).unwrap();
    let obs = vec![crate::qop::embed(&sigma_z(), 0, &l).unwrap()];
    let tr = compare_generators(&h, &h, &rho, 2.0, &obs, 10, &coarse(Method::Midpoint)).unwrap();
    assert_eq!(tr.times.len(), 11);
    assert_eq!(tr.max_gap, 0.0);
    assert!((tr.values_a[10][0] - 1.0).abs() < 1e-12);
}

fn random_hermitian(n: usize, seed: &[f64]) -> Operator {
    let mut m = Array2::<C64>::zeros((n, n));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let re = seed[k % seed.len()];
            let im = if i == j { 0.0 } else { seed[(k + 1) % seed.len()] };
            m[[i, j]] = C64::new(re, im);
            m[[j, i]] = C64::new(re, -im);
            k += 2;
        }
    }
    Operator::from_matrix(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolve_rho_preserves_spectrum(
        hs in proptest::collection::vec(-1.0f64..1.0, 12),
        ws in proptest::collection::vec(0.01f64..1.0, 4),
        t in 0.0f64..5.0,
    ) {
        let h = random_hermitian(4, &hs);
        let u = expm_skew(&h, t).unwrap();
        let total: f64 = ws.iter().sum();
        let diag: Vec<f64> = ws.iter().map(|w| w / total).collect();
        let rho = DensityMatrix::new(Operator::diagonal(h.layout(), &diag).unwrap()).unwrap();
        let out = evolve_rho(&rho, &u).unwrap();
        let mut a = rho.eigenvalues().unwrap();
        let mut b = out.eigenvalues().unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn stepped_propagators_are_unitary(rate in -0.01f64..0.01, t1 in 0.1f64..3.0) {
        let p = small();
        let lambda = Schedule::linear_ramp(0.05, rate, 3.0).unwrap();
        let td = system_generator(&p, &lambda).unwrap();
        let u = propagator(&td, 0.0, t1, &coarse(Method::Midpoint)).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-11);
    }
}
