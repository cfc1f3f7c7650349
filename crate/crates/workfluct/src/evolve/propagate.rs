use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Zip};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::config::{Diagnostics, Method, PropagationConfig, MAX_PHASE_PER_STEP, MAX_UNITARITY_DRIFT};
use crate::error::{Error, Result};
use crate::model::{Piece, TdHamiltonian};
use crate::qop::linalg::{eigh, mm, mm_ah, spectral_apply};
use crate::qop::{eig_hermitian, DensityMatrix, Operator};

const TAYLOR_TOL: f64 = 1e-17;
const TAYLOR_MAX_TERMS: usize = 60;
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Dense propagators and spectra shared by many propagations of
/// Hamiltonians with the same operator terms.
///
/// Entries are keyed by the local description of a piece, so a ramp that
/// recurs at different absolute times is integrated once. With a chunk length,
/// pieces that occur only once are cut into chunks measured from their start,
/// and recurring chunks are cached instead: a ramp cut short at different
/// times then shares its leading chunks.
#[derive(Clone, Debug, Default)]
pub struct SegmentCache {
    propagators: HashMap<Vec<i64>, Arc<Array2<C64>>>,
    spectra: HashMap<Vec<i64>, Arc<(Vec<f64>, Array2<C64>)>>,
    chunk: Option<f64>,
    diagnostics: Diagnostics,
}

/// First occurrence of a cache key: (occurrences, job, propagation within job, piece).
type Occurrence = (usize, usize, usize, Piece);

impl SegmentCache {
    /// Precomputes every piece that occurs at least twice among the given
    /// propagation intervals. The result does not depend on thread scheduling.
    pub fn plan<'a>(
        jobs: impl IntoIterator<Item = (&'a TdHamiltonian, f64, f64)>,
        cfg: &PropagationConfig,
    ) -> Result<SegmentCache> {
        let jobs: Vec<(&TdHamiltonian, f64, f64)> = jobs.into_iter().collect();
        Self::plan_indexed(jobs.len(), None, |j| Ok(vec![(jobs[j].0.clone(), jobs[j].1, jobs[j].2)]), cfg)
    }

    /// As [`SegmentCache::plan`], for job lists too large to hold in memory:
    /// `build(j)` must return the same propagations every time it is called.
    pub fn plan_indexed<F>(n_jobs: usize, chunk: Option<f64>, build: F, cfg: &PropagationConfig) -> Result<SegmentCache>
    where
        F: Fn(usize) -> Result<Vec<(TdHamiltonian, f64, f64)>> + Sync,
    {
        if let Some(c) = chunk {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("chunk length {c} must be positive")));
            }
        }
        let mut order: Vec<Vec<i64>> = Vec::new();
        let mut seen: HashMap<Vec<i64>, Occurrence> = HashMap::new();
        let count = |seen: &mut HashMap<Vec<i64>, Occurrence>,
                     order: &mut Vec<Vec<i64>>,
                     key: Vec<i64>,
                     j,
                     k,
                     piece| match seen.get_mut(&key) {
            Some(slot) => slot.0 += 1,
            None => {
                order.push(key.clone());
                seen.insert(key, (1, j, k, piece));
            }
        };
        for j in 0..n_jobs {
            for (k, (h, t0, t1)) in build(j)?.iter().enumerate() {
                for piece in h.pieces(*t0, *t1) {
                    count(&mut seen, &mut order, cache_key(h, &piece), j, k, piece);
                }
            }
        }
        if let Some(c) = chunk {
            let whole: HashMap<Vec<i64>, usize> = seen.iter().map(|(key, o)| (key.clone(), o.0)).collect();
            for j in 0..n_jobs {
                for (k, (h, t0, t1)) in build(j)?.iter().enumerate() {
                    for piece in h.pieces(*t0, *t1) {
                        if piece.is_constant() || whole[&cache_key(h, &piece)] >= 2 {
                            continue;
                        }
                        for part in piece.chunks(c) {
                            count(&mut seen, &mut order, cache_key(h, &part), j, k, part);
                        }
                    }
                }
            }
        }
        let todo: Vec<&Vec<i64>> = order.iter().filter(|k| seen[*k].0 >= 2).collect();
        let computed: Vec<Result<(Cached, Diagnostics)>> = todo
            .par_iter()
            .map(|key| {
                let (_, j, k, piece) = &seen[*key];
                let jobs = build(*j)?;
                let h = &jobs[*k].0;
                let mut diag = Diagnostics::default();
                let value = if piece.is_constant() {
                    Cached::Spectrum(Arc::new(eigh(h.piece_dense(piece, 0.0).view())?))
                } else {
                    Cached::Propagator(Arc::new(step_piece(h, piece, Array2::eye(h.dim()), cfg, &mut diag)?))
                };
                Ok((value, diag))
            })
            .collect();
        let mut cache = SegmentCache { chunk, ..SegmentCache::default() };
        for (key, item) in todo.into_iter().zip(computed) {
            let (value, diag) = item?;
            cache.diagnostics.merge(&diag);
            match value {
                Cached::Spectrum(s) => {
                    cache.spectra.insert(key.clone(), s);
                }
                Cached::Propagator(u) => {
                    cache.propagators.insert(key.clone(), u);
                }
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.propagators.len() + self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// `U ψ` from a cached propagator, with the guards of the steps it replaces.
    fn apply_cached(
        &self,
        key: &[i64],
        piece: &Piece,
        psi: &Array2<C64>,
        cfg: &PropagationConfig,
        diag: &mut Diagnostics,
    ) -> Option<Array2<C64>> {
        let u = self.propagators.get(key)?;
        diag.steps += (piece.len / cfg.dt).ceil().max(1.0) as usize;
        diag.max_unitarity_drift = diag.max_unitarity_drift.max(self.diagnostics.max_unitarity_drift);
        diag.max_phase_per_step = diag.max_phase_per_step.max(self.diagnostics.max_phase_per_step);
        Some(mm(u.view(), psi.view()))
    }
}

enum Cached {
    Spectrum(Arc<(Vec<f64>, Array2<C64>)>),
    Propagator(Arc<Array2<C64>>),
}

/// Propagates the columns `psi` from `t0` to `t1`.
pub fn propagate_columns(
    h: &TdHamiltonian,
    t0: f64,
    t1: f64,
    psi: Array2<C64>,
    cfg: &PropagationConfig,
    cache: Option<&SegmentCache>,
    diag: &mut Diagnostics,
) -> Result<Array2<C64>> {
    cfg.validate()?;
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    if psi.nrows() != h.dim() {
        return Err(Error::Dimension(format!("columns have {} rows, generator dimension {}", psi.nrows(), h.dim())));
    }
    let gram0 = mm_ah(psi.view(), psi.view());
    let mut psi = psi;
    for piece in h.pieces(t0, t1) {
        let key = cache_key(h, &piece);
        psi = if piece.is_constant() {
            match cache.and_then(|c| c.spectra.get(&key)) {
                Some(s) => apply_spectral(&s.0, s.1.view(), piece.len, psi.view()),
                None => {
                    let (e, v) = eigh(h.piece_dense(&piece, 0.0).view())?;
                    apply_spectral(&e, v.view(), piece.len, psi.view())
                }
            }
        } else {
            match cache {
                Some(c) => match c.apply_cached(&key, &piece, &psi, cfg, diag) {
                    Some(next) => next,
                    None => match c.chunk {
                        Some(len) => {
                            let mut x = psi;
                            for part in piece.chunks(len) {
                                x = match c.apply_cached(&cache_key(h, &part), &part, &x, cfg, diag) {
                                    Some(next) => next,
                                    None => step_piece(h, &part, x, cfg, diag)?,
                                };
                            }
                            x
                        }
                        None => step_piece(h, &piece, psi, cfg, diag)?,
                    },
                },
                None => step_piece(h, &piece, psi, cfg, diag)?,
            }
        };
        let drift = gram_drift(&psi, &gram0);
        diag.max_unitarity_drift = diag.max_unitarity_drift.max(drift);
        if drift > MAX_UNITARITY_DRIFT {
            return Err(Error::UnitarityDrift { drift, t: piece.end() });
        }
    }
    Ok(psi)
}

/// Constant pieces share a spectrum whatever their length.
fn cache_key(h: &TdHamiltonian, piece: &Piece) -> Vec<i64> {
    let mut key = if piece.is_constant() { piece.shape_key() } else { piece.key() };
    key.push(h.operator_fingerprint() as i64);
    key
}

/// `V e^{−iEt} V† x`
fn apply_spectral(e: &[f64], v: ArrayView2<C64>, t: f64, x: ArrayView2<C64>) -> Array2<C64> {
    let mut y = mm_ah(v, x);
    for (mut row, &ek) in y.rows_mut().into_iter().zip(e) {
        let ph = C64::from_polar(1.0, -ek * t);
        row.mapv_inplace(|z| z * ph);
    }
    mm(v, y.view())
}

fn gram_drift(psi: &Array2<C64>, gram0: &Array2<C64>) -> f64 {
    let g = mm_ah(psi.view(), psi.view());
    g.iter().zip(gram0.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
}

/// Time steps of one smooth piece, in local time.
fn step_piece(
    h: &TdHamiltonian,
    piece: &Piece,
    psi: Array2<C64>,
    cfg: &PropagationConfig,
    diag: &mut Diagnostics,
) -> Result<Array2<C64>> {
    let n_steps = (piece.len / cfg.dt).ceil().max(1.0) as usize;
    let step = piece.len / n_steps as f64;
    let gram0 = mm_ah(psi.view(), psi.view());
    let commutators = match cfg.method {
        Method::CommutatorCorrected => h.piece_commutators(piece),
        Method::Midpoint => Vec::new(),
    };
    let mut psi = psi;
    for j in 0..n_steps {
        let s0 = j as f64 * step;
        psi = match cfg.method {
            Method::Midpoint => {
                let sm = s0 + 0.5 * step;
                let (lo, hi) = h.piece_bounds(piece, sm);
                check_step(step, lo, hi, diag)?;
                let apply = |x: ArrayView2<C64>, out: &mut Array2<C64>| {
                    h.piece_apply(piece, sm, C64::new(step, 0.0), x, &mut out.view_mut());
                };
                taylor_exp(apply, step * lo, step * hi, psi)
            }
            Method::CommutatorCorrected => {
                let s1 = s0 + (0.5 - SQRT3 / 6.0) * step;
                let s2 = s0 + (0.5 + SQRT3 / 6.0) * step;
                let (lo1, hi1) = h.piece_bounds(piece, s1);
                let (lo2, hi2) = h.piece_bounds(piece, s2);
                let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
                check_step(step, lo, hi, diag)?;
                // K = (h/2)(H1 + H2) + i(√3/12)h²[H1, H2], where
                // [H1, H2] = Σ_{k<l} (c1_k c2_l − c1_l c2_k)[O_k, O_l].
                let c1 = h.piece_coefs(piece, s1);
                let c2 = h.piece_coefs(piece, s2);
                let a: Vec<C64> = c1.iter().zip(&c2).map(|(p, q)| C64::new(0.5 * step * (p + q), 0.0)).collect();
                let w = SQRT3 / 12.0 * step * step;
                let b: Vec<C64> =
                    commutators.iter().map(|c| C64::new(0.0, w * (c1[c.k] * c2[c.l] - c1[c.l] * c2[c.k]))).collect();
                let apply = |x: ArrayView2<C64>, out: &mut Array2<C64>| {
                    h.apply_combination(&a, &commutators, &b, x, &mut out.view_mut());
                };
                taylor_exp(apply, step * lo, step * hi, psi)
            }
        };
        diag.steps += 1;
        if (j + 1) % cfg.unitarity_check_every == 0 || j + 1 == n_steps {
            let drift = gram_drift(&psi, &gram0);
            diag.max_unitarity_drift = diag.max_unitarity_drift.max(drift);
            if drift > MAX_UNITARITY_DRIFT {
                return Err(Error::UnitarityDrift { drift, t: piece.start + s0 + step });
            }
        }
    }
    Ok(psi)
}

fn check_step(step: f64, lo: f64, hi: f64, diag: &mut Diagnostics) -> Result<()> {
    let half_width = 0.5 * (hi - lo);
    let product = step * half_width;
    diag.max_phase_per_step = diag.max_phase_per_step.max(product);
    if product > MAX_PHASE_PER_STEP {
        return Err(Error::StepTooLarge { dt: step, norm: half_width, product });
    }
    Ok(())
}

/// `exp(−iK) x` by a shifted Taylor series, for Hermitian `K` with spectrum in `[lo, hi]`.
///
/// `apply` must add `K x` to its output buffer.
fn taylor_exp(apply: impl Fn(ArrayView2<C64>, &mut Array2<C64>), lo: f64, hi: f64, x: Array2<C64>) -> Array2<C64> {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let substeps = (r / 1.5).ceil().max(1.0) as usize;
    let frac = 1.0 / substeps as f64;
    let mut acc = x;
    for _ in 0..substeps {
        let mut term = acc.clone();
        let scale = acc.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        for m in 1..=TAYLOR_MAX_TERMS {
            let mut kx = Array2::zeros(term.raw_dim());
            apply(term.view(), &mut kx);
            // term ← (−i frac / m)(K − c) term
            let f = C64::new(0.0, -frac / m as f64);
            Zip::from(&mut kx).and(&term).for_each(|k, &t| *k = f * (*k - c * t));
            term = kx;
            acc += &term;
            let size = term.iter().fold(0.0f64, |mx, z| mx.max(z.norm()));
            if size <= TAYLOR_TOL * scale {
                break;
            }
        }
        let ph = C64::from_polar(1.0, -c * frac);
        acc.mapv_inplace(|z| z * ph);
    }
    acc
}

/// Full propagator `U(t1, t0)` of a time-dependent Hamiltonian.
pub fn propagator(h: &TdHamiltonian, t0: f64, t1: f64, cfg: &PropagationConfig) -> Result<Operator> {
    propagator_cached(h, t0, t1, cfg, None, &mut Diagnostics::default())
}

pub fn propagator_cached(
    h: &TdHamiltonian,
    t0: f64,
    t1: f64,
    cfg: &PropagationConfig,
    cache: Option<&SegmentCache>,
    diag: &mut Diagnostics,
) -> Result<Operator> {
    let id = Array2::eye(h.dim());
    let u = propagate_columns(h, t0, t1, id, cfg, cache, diag)?;
    Operator::new(h.layout().clone(), u)
}

/// Propagator of an arbitrary Hamiltonian-valued closure, stepping with
/// dense exponentials; the closure must be smooth on `[t0, t1]`.
pub fn propagator_fn(h: impl Fn(f64) -> Operator, t0: f64, t1: f64, cfg: &PropagationConfig) -> Result<Operator> {
    cfg.validate()?;
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let probe = h(t0);
    let mut u = Operator::identity(probe.layout());
    if t1 == t0 {
        return Ok(u);
    }
    let n_steps = ((t1 - t0) / cfg.dt).ceil().max(1.0) as usize;
    let step = (t1 - t0) / n_steps as f64;
    for j in 0..n_steps {
        let s0 = t0 + j as f64 * step;
        let k = match cfg.method {
            Method::Midpoint => h(s0 + 0.5 * step).scale(step),
            Method::CommutatorCorrected => {
                let h1 = h(s0 + (0.5 - SQRT3 / 6.0) * step);
                let h2 = h(s0 + (0.5 + SQRT3 / 6.0) * step);
                let comm = h1.commutator(&h2)?;
                &(&h1 + &h2).scale(0.5 * step) + &comm.scale_complex(C64::new(0.0, SQRT3 / 12.0 * step * step))
            }
        };
        let (lo, hi) = k.gershgorin();
        check_step(1.0, lo, hi, &mut Diagnostics::default())?;
        let e = eig_hermitian(&k)?;
        let step_u = e.evolution(1.0);
        u = step_u.matmul(&u)?;
        if (j + 1) % cfg.unitarity_check_every == 0 || j + 1 == n_steps {
            let drift = u.unitarity_defect();
            if drift > MAX_UNITARITY_DRIFT {
                return Err(Error::UnitarityDrift { drift, t: s0 + step });
            }
        }
    }
    Ok(u)
}

/// `U ρ U†`
pub fn evolve_rho(rho: &DensityMatrix, u: &Operator) -> Result<DensityMatrix> {
    if rho.layout() != u.layout() {
        return Err(Error::Dimension(format!(
            "state layout {:?} vs propagator layout {:?}",
            rho.layout().factors(),
            u.layout().factors()
        )));
    }
    let ur = mm(u.view(), rho.entries().view());
    let out = crate::qop::linalg::mm_bh(ur.view(), u.view());
    let op = Operator::new(u.layout().clone(), out)?;
    let sym = (&op + &op.dagger()).scale(0.5);
    DensityMatrix::new(sym)
}

/// Spectral exponential `exp(−iHt)` applied to columns; exact for constant `H`.
pub fn exp_apply(h: &Operator, t: f64, x: ArrayView2<C64>) -> Result<Array2<C64>> {
    h.require_hermitian(1e-9)?;
    let (e, v) = eigh(h.view())?;
    Ok(apply_spectral(&e, v.view(), t, x))
}

/// `V diag(d) V†` helper re-exported for callers holding raw spectra.
pub fn spectral_operator(e: &[f64], v: ArrayView2<C64>, f: impl Fn(f64) -> C64) -> Array2<C64> {
    let d: Vec<C64> = e.iter().map(|&x| f(x)).collect();
    spectral_apply(v, &d)
}
