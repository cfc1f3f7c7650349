use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::tomography::{bloch_vector, emulate_shots, tomography_expectations};
use crate::error::{Error, Result};
use crate::evolve::{
    evolve_rho, propagate_columns, propagator, Diagnostics, Ensemble, PropagationConfig, SegmentCache,
};
use crate::model::{
    h_free, h_open, h_system, ideal_generator, qubit_splittings, two_diag_generator, two_rabi_generator,
    BlockHamiltonian, DrivePair, ModelParams, OpenSystem, WorkKind,
};
use crate::qop::linalg::mm_ah;
use crate::qop::{embed, hadamard, partial_trace, proj_minus, thermal_state, DensityMatrix, Operator, SpaceLayout};

/// Thermal eigenstates with smaller weight are not propagated.
pub const THERMAL_FLOOR: f64 = 1e-12;
/// Number of top levels of each truncated oscillator that are monitored.
pub const GUARD_LEVELS: usize = 2;
pub const MAX_GUARD_POPULATION: f64 = 1e-6;
/// Relative accuracy of the quadrature of `∫ε₂ dt`.
pub const PHASE_REL_TOL: f64 = 1e-10;
/// Accepted excess of `|L|` over 1.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Relative accuracy of the block phases `∫ s_i dt`.
const BLOCK_PHASE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    IdealSingle,
    CqedTwoQubit,
    OpenSystem,
}

/// One execution of the protocol at a fixed `u`.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub u: f64,
    pub variant: Variant,
    pub work_kind: WorkKind,
    pub drive: DrivePair,
    pub shots: Option<u64>,
    pub seed: u64,
}

impl ProtocolRun {
    pub fn new(variant: Variant, drive: DrivePair, shots: Option<u64>, seed: u64) -> Result<Self> {
        if !(drive.u >= 0.0) {
            return Err(Error::InvalidParameter(format!("u = {} must be nonnegative", drive.u)));
        }
        if shots == Some(0) {
            return Err(Error::InvalidParameter("shots must be at least 1".into()));
        }
        Ok(Self { u: drive.u, variant, work_kind: drive.kind, drive, shots, seed })
    }
}

/// One point of the characteristic function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GSample {
    pub u: f64,
    pub g_value: C64,
    /// The interferometric signal before the known phase is divided out.
    pub raw_l: C64,
    pub phase_removed: bool,
    pub shots_used: Option<u64>,
}

/// A [`GSample`] together with the numerical guards of the run that produced it.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub sample: GSample,
    pub diagnostics: Diagnostics,
    /// Largest population found on the guard levels.
    pub guard_population: f64,
    /// Thermal weight not propagated because of [`THERMAL_FLOOR`].
    pub dropped_weight: f64,
    /// `|<σˣ>|` of the ancilla for single-ancilla runs, zero otherwise.
    pub sigma_x_residue: f64,
}

/// Shared inputs of a run.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions<'a> {
    pub propagation: PropagationConfig,
    pub cache: Option<&'a SegmentCache>,
    pub shots: Option<u64>,
    pub seed: u64,
    /// Random stream of this run, normally the index of `u` in the grid.
    pub stream: u64,
}

impl<'a> RunOptions<'a> {
    pub fn new(propagation: PropagationConfig) -> Self {
        Self { propagation, ..Self::default() }
    }
}

/// Hamiltonian whose Gibbs state starts the single-ancilla protocol: `H_S(χ⁺₀)`
/// for inclusive work, `H₀` for exclusive work.
pub fn initial_hamiltonian(params: &ModelParams, drive: &DrivePair) -> Result<Operator> {
    match drive.kind {
        WorkKind::Inclusive => h_system(params, drive.chi_plus.value_at_start()),
        WorkKind::Exclusive => h_free(params),
    }
}

/// `H_{S+B}(χ⁺₀)`, or `H_{S+B}(0)` for exclusive work.
pub fn initial_open_hamiltonian(open: &OpenSystem, drive: &DrivePair) -> Operator {
    match drive.kind {
        WorkKind::Inclusive => open.at(drive.chi_plus.value_at_start()),
        WorkKind::Exclusive => open.at(0.0),
    }
}

/// Row indices where any of the given oscillator slots sits in its top levels.
pub fn guard_rows(layout: &SpaceLayout, oscillator_slots: &[usize]) -> Vec<usize> {
    (0..layout.total_dim())
        .filter(|&i| {
            let digits = layout.unravel(i);
            oscillator_slots.iter().any(|&k| digits[k] + GUARD_LEVELS >= layout.factors()[k])
        })
        .collect()
}

fn guard_population(rows: &[usize], weights: &[f64], cols: &Array2<C64>) -> f64 {
    weights.iter().enumerate().map(|(n, &p)| p * rows.iter().map(|&i| cols[[i, n]].norm_sqr()).sum::<f64>()).sum()
}

fn check_guard(population: f64, context: &str) -> Result<()> {
    if population > MAX_GUARD_POPULATION {
        return Err(Error::GuardLevel { population, context: context.into() });
    }
    Ok(())
}

/// Reduced ancilla state `M_ab = c_a c_b* Σ p_n <U_b ψ_n|U_a ψ_n>` of a
/// block-diagonal evolution, with block phases restored.
struct Interference {
    m: Array2<C64>,
    guard: f64,
    diagnostics: Diagnostics,
}

fn interfere(
    gen: &BlockHamiltonian,
    amps: &[C64],
    init: &Ensemble,
    total: f64,
    oscillator_slots: &[usize],
    opts: &RunOptions,
) -> Result<Interference> {
    let na = amps.len();
    let rows = guard_rows(gen.system_layout(), oscillator_slots);
    let mut diagnostics = Diagnostics::default();
    let mut guard = guard_population(&rows, &init.weights, &init.columns);
    let mut evolved: Vec<Option<(Array2<C64>, f64)>> = vec![None; na];
    for (a, block) in gen.blocks().iter().enumerate() {
        if amps[a] == C64::new(0.0, 0.0) {
            continue;
        }
        let cols = propagate_columns(
            &block.system,
            0.0,
            total,
            init.columns.clone(),
            &opts.propagation,
            opts.cache,
            &mut diagnostics,
        )?;
        guard = guard.max(guard_population(&rows, &init.weights, &cols));
        evolved[a] = Some((cols, block.scalar_integral(total, BLOCK_PHASE_TOL)?));
    }
    let mut m = Array2::zeros((na, na));
    for a in 0..na {
        for b in 0..na {
            let (Some((ca, pa)), Some((cb, pb))) = (&evolved[a], &evolved[b]) else { continue };
            let overlaps = mm_ah(cb.view(), ca.view());
            let sum: C64 = init.weights.iter().enumerate().map(|(n, &p)| overlaps[[n, n]] * p).sum();
            m[[a, b]] = amps[a] * amps[b].conj() * C64::from_polar(1.0, -(pa - pb)) * sum;
        }
    }
    Ok(Interference { m, guard, diagnostics })
}

fn hadamard_amps_minus() -> [C64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(h, 0.0), C64::new(-h, 0.0)]
}

/// `H M H` on a single qubit.
fn conj_hadamard(m: &Array2<C64>) -> Array2<C64> {
    let h = hadamard();
    let hm = h.entries().dot(m);
    hm.dot(h.entries())
}

/// Reads `L` off `ρ_A = (1 − Re L σᶻ + Im L σʸ)/2` and divides out `e^{iφ}`.
fn single_readout(rho_a: &Array2<C64>, phase: f64, u: f64, opts: &RunOptions) -> Result<(GSample, f64)> {
    let (x, mut y, mut z) = bloch_vector(rho_a);
    if let Some(shots) = opts.shots {
        (z, y) = emulate_shots(z.clamp(-1.0, 1.0), y.clamp(-1.0, 1.0), shots, opts.seed, opts.stream)?;
    }
    let raw_l = C64::new(-z, y);
    finish(raw_l, C64::from_polar(1.0, -phase), u, opts.shots).map(|s| (s, x.abs()))
}

fn finish(raw_l: C64, unphase: C64, u: f64, shots: Option<u64>) -> Result<GSample> {
    let magnitude = raw_l.norm();
    let tolerance = match shots {
        // Two independent ±1 estimates can both sit at the edge of their range.
        Some(_) => std::f64::consts::SQRT_2 - 1.0 + NORM_TOLERANCE,
        None => NORM_TOLERANCE,
    };
    if magnitude > 1.0 + tolerance {
        return Err(Error::Unbounded { magnitude });
    }
    Ok(GSample { u, g_value: raw_l * unphase, raw_l, phase_removed: true, shots_used: shots })
}

/// Ideal single-ancilla protocol, starting from the Gibbs state of `H_S(λ₀)`
/// (inclusive) or `H₀` (exclusive).
pub fn run_single_ancilla(params: &ModelParams, drive: &DrivePair, opts: &RunOptions) -> Result<RunOutcome> {
    let init = Ensemble::thermal(&initial_hamiltonian(params, drive)?, params.beta, THERMAL_FLOOR)?;
    run_single_ancilla_from(params, drive, &init, opts)
}

pub fn run_single_ancilla_from(
    params: &ModelParams,
    drive: &DrivePair,
    init: &Ensemble,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let gen = ideal_generator(params, drive, params.eps_ideal)?;
    run_block_single(&gen, init, drive, &[0], opts)
}

fn run_block_single(
    gen: &BlockHamiltonian,
    init: &Ensemble,
    drive: &DrivePair,
    oscillator_slots: &[usize],
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let total = drive.total_time();
    let res = interfere(gen, &hadamard_amps_minus(), init, total, oscillator_slots, opts)?;
    check_guard(res.guard, "single-ancilla run")?;
    let phase = gen.blocks()[0].scalar_integral(total, BLOCK_PHASE_TOL)?
        - gen.blocks()[1].scalar_integral(total, BLOCK_PHASE_TOL)?;
    let (sample, sigma_x_residue) = single_readout(&conj_hadamard(&res.m), phase, drive.u, opts)?;
    Ok(RunOutcome {
        sample,
        diagnostics: res.diagnostics,
        guard_population: res.guard,
        dropped_weight: init.dropped,
        sigma_x_residue,
    })
}

/// Ideal protocol with the ancilla coupled to the system of an open system.
pub fn run_open_system(params: &ModelParams, drive: &DrivePair, opts: &RunOptions) -> Result<RunOutcome> {
    let open = h_open(params, &params.bath)?;
    let init = Ensemble::thermal(&initial_open_hamiltonian(&open, drive), params.beta, THERMAL_FLOOR)?;
    run_open_system_from(params, &open, drive, &init, opts)
}

pub fn run_open_system_from(
    params: &ModelParams,
    open: &OpenSystem,
    drive: &DrivePair,
    init: &Ensemble,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let gen = open.ancilla_generator(drive, params.eps_ideal)?;
    let slots: Vec<usize> = (0..open.layout().len()).collect();
    run_block_single(&gen, init, drive, &slots, opts)
}

/// Two-qubit protocol; the oscillator starts in the Gibbs state of
/// [`initial_hamiltonian`], uncorrelated with the qubits.
pub fn run_two_ancilla(
    params: &ModelParams,
    drive: &DrivePair,
    use_full_rabi: bool,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let init = Ensemble::thermal(&initial_hamiltonian(params, drive)?, params.beta, THERMAL_FLOOR)?;
    run_two_ancilla_from(params, drive, use_full_rabi, &init, opts)
}

pub fn run_two_ancilla_from(
    params: &ModelParams,
    drive: &DrivePair,
    use_full_rabi: bool,
    init: &Ensemble,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let split = qubit_splittings(drive, params)?;
    let total = drive.total_time();
    let eps2_integral =
        split.eps2.integral(PHASE_REL_TOL).map_err(|e| Error::Quadrature(format!("integral of eps2: {e}")))?;
    let (rho2a, guard, diagnostics) = if use_full_rabi {
        full_rabi_state(params, &split, init, total, opts)?
    } else {
        let gen = two_diag_generator(&split, params)?;
        // (1 ⊗ H)|−−> = (|−+> − |−−>)/√2
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0)];
        let res = interfere(&gen, &amps, init, total, &[0], opts)?;
        let g2 = second_qubit_hadamard();
        let rho = g2.dot(&res.m).dot(&g2);
        (rho, res.guard, res.diagnostics)
    };
    check_guard(guard, "two-qubit run")?;
    let rho = DensityMatrix::new(Operator::new(SpaceLayout::new(vec![2, 2])?, symmetrize(rho2a))?)?;
    let (mut z, mut y) = tomography_expectations(&rho)?;
    if let Some(shots) = opts.shots {
        (z, y) = emulate_shots(z.clamp(-1.0, 1.0), y.clamp(-1.0, 1.0), shots, opts.seed, opts.stream)?;
    }
    let raw_l = C64::new(-z, -y);
    let sample = finish(raw_l, C64::from_polar(1.0, eps2_integral), drive.u, opts.shots)?;
    Ok(RunOutcome { sample, diagnostics, guard_population: guard, dropped_weight: init.dropped, sigma_x_residue: 0.0 })
}

fn symmetrize(m: Array2<C64>) -> Array2<C64> {
    let mh = m.t().mapv(|z| z.conj());
    (&m + &mh).mapv(|z| z * 0.5)
}

/// `1 ⊗ H` on two qubits.
fn second_qubit_hadamard() -> Array2<C64> {
    let id = Operator::identity(&SpaceLayout::single(2).expect("valid"));
    id.kron(&hadamard()).into_entries()
}

fn full_rabi_state(
    params: &ModelParams,
    split: &crate::model::Splittings,
    init: &Ensemble,
    total: f64,
    opts: &RunOptions,
) -> Result<(Array2<C64>, f64, Diagnostics)> {
    let gen = two_rabi_generator(split, params)?;
    let n = params.n_fock;
    let k = init.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // Columns (|−+> − |−−>)/√2 ⊗ ψ_n
    let mut cols = Array2::zeros((4 * n, k));
    for j in 0..k {
        for i in 0..n {
            cols[[2 * n + i, j]] = init.columns[[i, j]] * h;
            cols[[3 * n + i, j]] = -init.columns[[i, j]] * h;
        }
    }
    let rows = guard_rows(gen.layout(), &[2]);
    let mut diagnostics = Diagnostics::default();
    let guard0 = guard_population(&rows, &init.weights, &cols);
    let cols = propagate_columns(&gen, 0.0, total, cols, &opts.propagation, opts.cache, &mut diagnostics)?;
    let guard = guard0.max(guard_population(&rows, &init.weights, &cols));
    // Second Hadamard on qubit 2, then trace out the oscillator.
    let g2 = second_qubit_hadamard();
    let mut rho = Array2::<C64>::zeros((4, 4));
    for j in 0..k {
        let mut phi = Array2::<C64>::zeros((4, n));
        for a in 0..4 {
            for b in 0..4 {
                if g2[[a, b]] != C64::new(0.0, 0.0) {
                    let src = cols.slice(s![b * n..(b + 1) * n, j]);
                    let mut dst = phi.row_mut(a);
                    dst.scaled_add(g2[[a, b]], &src);
                }
            }
        }
        let p = init.weights[j];
        for a in 0..4 {
            for b in 0..4 {
                let v: C64 = (0..n).map(|i| phi[[a, i]] * phi[[b, i]].conj()).sum();
                rho[[a, b]] += v * p;
            }
        }
    }
    Ok((rho, guard, diagnostics))
}

/// Single-ancilla protocol on the full dense ancilla ⊗ system space.
///
/// Slow; it exists to cross-check the block evaluation at small `N`.
pub fn run_single_ancilla_dense(params: &ModelParams, drive: &DrivePair, cfg: &PropagationConfig) -> Result<GSample> {
    let gen = ideal_generator(params, drive, params.eps_ideal)?;
    let full = gen.assemble()?;
    let rho_s = thermal_state(&initial_hamiltonian(params, drive)?, params.beta)?;
    let anc = DensityMatrix::new(proj_minus())?;
    let rho = anc.tensor(&rho_s)?;
    let hd = embed(&hadamard(), 0, full.layout())?;
    let rho = evolve_rho(&rho, &hd)?;
    let u = propagator(&full, 0.0, drive.total_time(), cfg)?;
    let rho = evolve_rho(&evolve_rho(&rho, &u)?, &hd)?;
    let rho_a = partial_trace(&rho, &[0])?;
    let total = drive.total_time();
    let phase = gen.blocks()[0].scalar_integral(total, BLOCK_PHASE_TOL)?
        - gen.blocks()[1].scalar_integral(total, BLOCK_PHASE_TOL)?;
    single_readout(rho_a.entries(), phase, drive.u, &RunOptions::new(*cfg)).map(|(s, _)| s)
}
