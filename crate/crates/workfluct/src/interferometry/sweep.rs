use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::protocol::{
    initial_hamiltonian, initial_open_hamiltonian, run_open_system_from, run_single_ancilla_from, run_two_ancilla_from,
    GSample, RunOptions, RunOutcome, Variant, THERMAL_FLOOR,
};
use crate::error::{Error, Result};
use crate::evolve::{Diagnostics, Ensemble, PropagationConfig, SegmentCache};
use crate::model::{
    drive_exclusive, drive_inclusive, h_open, ideal_generator, qubit_splittings, two_diag_generator,
    two_rabi_generator, DrivePair, ModelParams, OpenSystem, Schedule, TdHamiltonian, WorkKind,
};

/// Everything needed to run the protocol at any `u`.
#[derive(Clone, Debug)]
pub struct ProtocolTemplate {
    pub params: ModelParams,
    /// The physical protocol `λ_t` on `[0, τ]`.
    pub lambda: Schedule,
    pub variant: Variant,
    pub work_kind: WorkKind,
    /// Two-qubit variant only: full Rabi coupling instead of the diagonal form.
    pub use_full_rabi: bool,
    pub propagation: PropagationConfig,
    pub shots: Option<u64>,
    pub seed: u64,
}

impl ProtocolTemplate {
    pub fn drive(&self, u: f64) -> Result<DrivePair> {
        match self.work_kind {
            WorkKind::Inclusive => drive_inclusive(&self.lambda, self.params.tau, u),
            WorkKind::Exclusive => drive_exclusive(&self.lambda, self.params.tau, u),
        }
    }

    fn open(&self) -> Result<Option<OpenSystem>> {
        match self.variant {
            Variant::OpenSystem => Ok(Some(h_open(&self.params, &self.params.bath)?)),
            _ => Ok(None),
        }
    }

    fn initial(&self, open: Option<&OpenSystem>) -> Result<Ensemble> {
        let drive = self.drive(0.0)?;
        let h = match (self.variant, open) {
            (Variant::IdealSingle | Variant::CqedTwoQubit, _) => initial_hamiltonian(&self.params, &drive)?,
            (Variant::OpenSystem, Some(o)) => initial_open_hamiltonian(o, &drive),
            (Variant::OpenSystem, None) => unreachable!("open system built before the initial state"),
        };
        Ensemble::thermal(&h, self.params.beta, THERMAL_FLOOR)
    }

    /// Propagations performed by a run at `u`, for cache planning.
    fn propagations(&self, u: f64, open: Option<&OpenSystem>) -> Result<Vec<(TdHamiltonian, f64, f64)>> {
        let drive = self.drive(u)?;
        let t = drive.total_time();
        let blocks = match self.variant {
            Variant::IdealSingle => ideal_generator(&self.params, &drive, self.params.eps_ideal)?.blocks().to_vec(),
            Variant::OpenSystem => {
                open.expect("open system present").ancilla_generator(&drive, self.params.eps_ideal)?.blocks().to_vec()
            }
            Variant::CqedTwoQubit => {
                let split = qubit_splittings(&drive, &self.params)?;
                if self.use_full_rabi {
                    return Ok(vec![(two_rabi_generator(&split, &self.params)?, 0.0, t)]);
                }
                two_diag_generator(&split, &self.params)?.blocks()[2..].to_vec()
            }
        };
        Ok(blocks.into_iter().map(|b| (b.system, 0.0, t)).collect())
    }

    fn run_one(
        &self,
        u: f64,
        index: usize,
        init: &Ensemble,
        open: Option<&OpenSystem>,
        cache: &SegmentCache,
    ) -> Result<RunOutcome> {
        let drive = self.drive(u)?;
        let opts = RunOptions {
            propagation: self.propagation,
            cache: Some(cache),
            shots: self.shots,
            seed: self.seed,
            stream: index as u64,
        };
        match self.variant {
            Variant::IdealSingle => run_single_ancilla_from(&self.params, &drive, init, &opts),
            Variant::OpenSystem => {
                run_open_system_from(&self.params, open.expect("open system present"), &drive, init, &opts)
            }
            Variant::CqedTwoQubit => run_two_ancilla_from(&self.params, &drive, self.use_full_rabi, init, &opts),
        }
    }
}

/// Checks that a u-grid is sorted and nonnegative.
pub fn validate_grid(u_grid: &[f64]) -> Result<()> {
    if let Some(u) = u_grid.iter().find(|u| !(**u >= 0.0 && u.is_finite())) {
        return Err(Error::Grid(format!("u = {u} must be finite and nonnegative")));
    }
    if u_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Grid("u values must be sorted".into()));
    }
    Ok(())
}

/// `[0, Δu, 2Δu, …]` up to and including `u_max` (within rounding).
pub fn uniform_grid(u_max: f64, du: f64) -> Result<Vec<f64>> {
    if !(du > 0.0 && u_max >= 0.0 && u_max.is_finite()) {
        return Err(Error::Grid(format!("need du > 0 and u_max >= 0, got du = {du}, u_max = {u_max}")));
    }
    let n = (u_max / du + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * du).collect())
}

/// The grid step, if every `u` is a multiple of it. Ramps cut at different
/// delays then share chunks of this length.
fn grid_chunk(u_grid: &[f64]) -> Option<f64> {
    let step = *u_grid.get(1)? - u_grid[0];
    let aligned = step > 0.0 && u_grid.iter().all(|u| ((u / step).round() * step - u).abs() <= 1e-9 * step.max(*u));
    aligned.then_some(step)
}

/// Runs the protocol at every `u`, in parallel; the output order follows the grid.
pub fn sweep_u(template: &ProtocolTemplate, u_grid: &[f64]) -> Result<Vec<RunOutcome>> {
    validate_grid(u_grid)?;
    if u_grid.is_empty() {
        return Ok(Vec::new());
    }
    let open = template.open()?;
    let init = template.initial(open.as_ref())?;
    let cache = SegmentCache::plan_indexed(
        u_grid.len(),
        grid_chunk(u_grid),
        |j| template.propagations(u_grid[j], open.as_ref()).map_err(|e| at_u(u_grid[j], e)),
        &template.propagation,
    )?;
    let results: Vec<Result<RunOutcome>> = u_grid
        .par_iter()
        .enumerate()
        .map(|(i, &u)| template.run_one(u, i, &init, open.as_ref(), &cache).map_err(|e| at_u(u, e)))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Sweep { failures });
    }
    // Cached ramps were stepped once on behalf of every run.
    let shared = Diagnostics { steps: 0, ..cache.diagnostics() };
    for o in &mut ok {
        o.diagnostics.merge(&shared);
    }
    Ok(ok)
}

fn at_u(u: f64, e: Error) -> Error {
    match e {
        Error::AtU { .. } => e,
        other => Error::AtU { u, source: Box::new(other) },
    }
}

/// Summary of the numerical guards over a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SweepSummary {
    pub samples: usize,
    pub max_guard_population: f64,
    pub max_unitarity_drift: f64,
    pub max_phase_per_step: f64,
    pub max_dropped_weight: f64,
    pub max_sigma_x_residue: f64,
    pub steps: usize,
}

pub fn summarize(outcomes: &[RunOutcome]) -> SweepSummary {
    let mut s = SweepSummary { samples: outcomes.len(), ..SweepSummary::default() };
    for o in outcomes {
        s.max_guard_population = s.max_guard_population.max(o.guard_population);
        s.max_unitarity_drift = s.max_unitarity_drift.max(o.diagnostics.max_unitarity_drift);
        s.max_phase_per_step = s.max_phase_per_step.max(o.diagnostics.max_phase_per_step);
        s.max_dropped_weight = s.max_dropped_weight.max(o.dropped_weight);
        s.max_sigma_x_residue = s.max_sigma_x_residue.max(o.sigma_x_residue);
        s.steps += o.diagnostics.steps;
    }
    s
}

/// Writes `u, re_g, im_g, abs_g, shots` rows at full precision.
pub fn write_g_csv(samples: &[GSample], mut out: impl Write) -> Result<()> {
    writeln!(out, "u,re_g,im_g,abs_g,shots")?;
    for s in samples {
        let shots = s.shots_used.map(|n| n.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(s.u),
            fmt17(s.g_value.re),
            fmt17(s.g_value.im),
            fmt17(s.g_value.norm()),
            shots
        )?;
    }
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
