use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, Preset};
use super::output::{GuardSummary, Manifest, Staging, MANIFEST_NAME, MANIFEST_SCHEMA_VERSION};
use super::validate::validate;
use crate::error::{Error, Result};
use crate::evolve::{compare_generators, propagator, DeviationTrace};
use crate::interferometry::{
    fmt17, initial_hamiltonian, summarize, sweep_u, uniform_grid, write_g_csv, GSample, ProtocolTemplate, RunOutcome,
    SweepSummary, Variant,
};
use crate::model::{
    drive_inclusive, forward_protocol, h_free, h_open, h_system, qubit_splittings, rabi_generator, reverse_protocol,
    softmode_generator, softmode_splitting, system_generator, two_diag_generator, two_rabi_generator, ModelParams,
    Schedule, WorkKind,
};
use crate::qop::{
    eig_hermitian, embed, log_partition, proj_minus, thermal_state, DensityMatrix, Operator, SpaceLayout,
};
use crate::workstats::{
    crooks_check_with, exclusive_oracle, free_energy_oscillator, free_energy_spectral, jarzynski_check, match_peaks,
    pdf_from_char, CrooksOptions, CrooksSampling, FTReport, PeakMatch, Reconstruction, WGrid, WorkDistribution,
    WorkOracle,
};

/// Which interferometer to run and on which ramp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PipelineSpec {
    pub variant: Variant,
    pub work_kind: WorkKind,
    pub reverse: bool,
}

/// A u-sweep of one interferometer together with its exact reference.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub spec: PipelineSpec,
    pub outcomes: Vec<RunOutcome>,
    pub summary: SweepSummary,
    pub oracle: WorkOracle,
    pub reconstruction: Reconstruction,
    pub peak_matches: Vec<PeakMatch>,
    /// `max_u |G_protocol(u) − G_oracle(u)|`
    pub max_oracle_gap: f64,
}

impl Pipeline {
    pub fn samples(&self) -> Vec<GSample> {
        self.outcomes.iter().map(|o| o.sample).collect()
    }

    pub fn guards(&self) -> GuardSummary {
        GuardSummary {
            max_guard_population: self.summary.max_guard_population,
            max_unitarity_drift: self.summary.max_unitarity_drift,
            max_phase_per_step: self.summary.max_phase_per_step,
            propagation_steps: self.summary.steps,
        }
    }

    fn report(&self) -> PipelineReport {
        PipelineReport {
            spec: self.spec,
            samples: self.summary.samples,
            max_oracle_gap: self.max_oracle_gap,
            delta_f: self.oracle.delta_f(),
            oracle_mean_work: self.oracle.mean_work(),
            oracle_leakage: self.oracle.leakage(),
            resolution: self.reconstruction.resolution,
            integral: self.reconstruction.integral,
            negative_mass: self.reconstruction.negative_mass,
            imag_residue: self.reconstruction.imag_residue,
            jarzynski_oracle: jarzynski_check(&self.oracle.distribution(), self.oracle.beta(), self.oracle.delta_f()),
            jarzynski_density: jarzynski_check(
                &self.reconstruction.distribution,
                self.oracle.beta(),
                self.oracle.delta_f(),
            ),
            peak_matches: self.peak_matches.clone(),
            sweep: self.summary,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub spec: PipelineSpec,
    pub samples: usize,
    pub max_oracle_gap: f64,
    pub delta_f: f64,
    pub oracle_mean_work: f64,
    pub oracle_leakage: f64,
    pub resolution: f64,
    pub integral: f64,
    pub negative_mass: f64,
    pub imag_residue: f64,
    pub jarzynski_oracle: f64,
    pub jarzynski_density: f64,
    pub peak_matches: Vec<PeakMatch>,
    pub sweep: SweepSummary,
}

/// Free energies of the open-system run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergies {
    /// `−β⁻¹ ln(Z_{S+B}(λ_τ)/Z_{S+B}(λ₀))`
    pub delta_f_sb: f64,
    /// `ΔF_S` with `F_S = F_{S+B} − F_B⁰`, the bath free energy taken from its own spectrum.
    pub delta_f_s: f64,
    /// Free-energy difference of the isolated system `H_S(λ)`.
    pub delta_f_isolated: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FtReportFile {
    pub schema_version: u32,
    pub preset: Preset,
    pub forward: Option<PipelineReport>,
    pub reverse: Option<PipelineReport>,
    /// Crooks fit of the reconstructed densities.
    pub crooks: Option<FTReport>,
    /// Crooks fit of the oracle peaks.
    pub crooks_oracle: Option<FTReport>,
    /// `ΔF` of the oscillator formula, where it applies.
    pub delta_f_analytic: Option<f64>,
    pub free_energies: Option<FreeEnergies>,
    pub params: ModelParams,
}

/// What [`run`] produced, in memory.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub manifest: Manifest,
    pub forward: Option<Pipeline>,
    pub reverse: Option<Pipeline>,
    pub ft_report: Option<FtReportFile>,
    pub comparison: Option<DeviationTrace>,
}

/// The protocol `λ_t` of a pipeline.
pub fn ramp(params: &ModelParams, reverse: bool) -> Result<Schedule> {
    if reverse {
        reverse_protocol(params)
    } else {
        forward_protocol(params)
    }
}

/// Exact two-measurement reference for a pipeline.
pub fn pipeline_oracle(c: &ExperimentConfig, spec: PipelineSpec) -> Result<WorkOracle> {
    let p = &c.params;
    let lambda = ramp(p, spec.reverse)?;
    match (spec.variant, spec.work_kind) {
        (Variant::OpenSystem, WorkKind::Exclusive) => {
            Err(Error::Config("exclusive work is not supported for the open system".into()))
        }
        (Variant::OpenSystem, WorkKind::Inclusive) => {
            let open = h_open(p, &p.bath)?;
            let u = propagator(&open.generator(&lambda)?, 0.0, p.tau, &c.propagation)?;
            WorkOracle::new(&open.at(lambda.value_at_start()), &open.at(lambda.value_at_end()), &u, p.beta)
        }
        (_, kind) => {
            let u = propagator(&system_generator(p, &lambda)?, 0.0, p.tau, &c.propagation)?;
            match kind {
                WorkKind::Inclusive => WorkOracle::new(
                    &h_system(p, lambda.value_at_start())?,
                    &h_system(p, lambda.value_at_end())?,
                    &u,
                    p.beta,
                ),
                WorkKind::Exclusive => exclusive_oracle(&h_free(p)?, &u, p.beta),
            }
        }
    }
}

/// Master seed of the reverse sweep, so that its shot noise is independent of the forward one.
fn reverse_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub fn run_pipeline(c: &ExperimentConfig, spec: PipelineSpec) -> Result<Pipeline> {
    let p = &c.params;
    let oracle = pipeline_oracle(c, spec)?;
    let template = ProtocolTemplate {
        params: p.clone(),
        lambda: ramp(p, spec.reverse)?,
        variant: spec.variant,
        work_kind: spec.work_kind,
        use_full_rabi: c.full_rabi,
        propagation: c.propagation,
        shots: c.shots,
        seed: if spec.reverse { reverse_seed(c.seed) } else { c.seed },
    };
    let grid = uniform_grid(c.u_max, c.du)?;
    let outcomes = sweep_u(&template, &grid)?;
    let samples: Vec<GSample> = outcomes.iter().map(|o| o.sample).collect();
    let max_oracle_gap = samples.iter().map(|s| (s.g_value - oracle.characteristic(s.u)).norm()).fold(0.0, f64::max);
    let wgrid = WGrid::symmetric(c.w_max, c.dw)?;
    let reconstruction = pdf_from_char(&samples, &wgrid, c.window, p.beta, oracle.delta_f())?;
    let peak_matches = match_peaks(&reconstruction, &oracle.peaks(), 0.01);
    Ok(Pipeline { spec, summary: summarize(&outcomes), outcomes, oracle, reconstruction, peak_matches, max_oracle_gap })
}

/// Relative floor of Crooks fits on exact oracle peaks. These carry no
/// window leakage, so only rounding noise of the overlaps has to be kept out.
pub const ORACLE_CROOKS_FLOOR: f64 = 1e-8;

/// Crooks fits of a forward/reverse pair, from the densities and from the oracle peaks.
pub fn crooks_pair(
    fwd: &Pipeline,
    bwd: &Pipeline,
    beta: f64,
    options: CrooksOptions,
) -> (Result<FTReport>, Result<FTReport>) {
    let peaks = CrooksOptions { sampling: CrooksSampling::Grid, floor: ORACLE_CROOKS_FLOOR };
    (
        crooks_check_with(&fwd.reconstruction.distribution, &bwd.reconstruction.distribution, beta, options),
        crooks_check_with(&fwd.oracle.distribution(), &bwd.oracle.distribution(), beta, peaks),
    )
}

pub fn open_free_energies(p: &ModelParams) -> Result<FreeEnergies> {
    let open = h_open(p, &p.bath)?;
    let (l0, l1) = (p.lambda0, p.lambda_tau());
    let ln_z = |h: &Operator| -> Result<f64> { Ok(log_partition(eig_hermitian(h)?.eigenvalues(), p.beta)) };
    let f_sb0 = -ln_z(&open.at(l0))? / p.beta;
    let f_sb1 = -ln_z(&open.at(l1))? / p.beta;
    // The bath alone: the coupled Hamiltonian at zero coupling minus the system part.
    let bare_bath: Vec<_> = p.bath.iter().map(|b| crate::model::BathMode { coupling: 0.0, ..*b }).collect();
    let uncoupled = h_open(&ModelParams { lambda0: 0.0, v: 0.0, ..p.clone() }, &bare_bath)?.at(0.0);
    let f_free = -ln_z(&uncoupled)? / p.beta;
    let f_s_free = -ln_z(&h_free(p)?)? / p.beta;
    let f_b0 = f_free - f_s_free;
    Ok(FreeEnergies {
        delta_f_sb: f_sb1 - f_sb0,
        delta_f_s: (f_sb1 - f_b0) - (f_sb0 - f_b0),
        delta_f_isolated: free_energy_spectral(&h_system(p, l0)?, &h_system(p, l1)?, p.beta)?,
    })
}

/// Validates, runs and writes an experiment. Outputs appear in `c.out` only if everything succeeded.
pub fn run(c: &ExperimentConfig) -> Result<ExperimentResult> {
    let diag = validate(c);
    if !diag.is_ok() {
        return Err(Error::Config(diag.errors.join("; ")));
    }
    let start = Instant::now();
    let mut staging = Staging::new(&c.out)?;
    let mut guards = GuardSummary::default();
    let mut result = ExperimentResult {
        manifest: empty_manifest(c),
        forward: None,
        reverse: None,
        ft_report: None,
        comparison: None,
    };
    match c.preset {
        Preset::Fig1 => {
            let trace = fig1(c)?;
            write_trace(&mut staging, "fig1_populations.csv", &trace, FIG1_COLUMNS)?;
            staging.write_json("comparison.json", &comparison_summary(&trace, FIG1_COLUMNS))?;
            guards.max_unitarity_drift = trace.diagnostics.max_unitarity_drift;
            guards.max_phase_per_step = trace.diagnostics.max_phase_per_step;
            guards.propagation_steps = trace.diagnostics.steps;
            result.comparison = Some(trace);
        }
        Preset::Fig2 => {
            let trace = fig2(c)?;
            write_trace(&mut staging, "fig2_populations.csv", &trace, FIG2_COLUMNS)?;
            staging.write_json("comparison.json", &comparison_summary(&trace, FIG2_COLUMNS))?;
            guards.max_unitarity_drift = trace.diagnostics.max_unitarity_drift;
            guards.max_phase_per_step = trace.diagnostics.max_phase_per_step;
            guards.propagation_steps = trace.diagnostics.steps;
            result.comparison = Some(trace);
        }
        Preset::Fig3Drives => fig3_drives(c, &mut staging)?,
        Preset::OracleOnly => {
            let spec = PipelineSpec { variant: Variant::IdealSingle, work_kind: WorkKind::Inclusive, reverse: false };
            let oracle = pipeline_oracle(c, spec)?;
            let peaks = oracle.peaks();
            let dist = WorkDistribution::peaks(peaks.clone(), oracle.beta(), oracle.delta_f());
            staging.write_with("oracle_peaks.csv", |b| dist.write_csv(b))?;
            staging.write_json(
                "oracle_report.json",
                &serde_json::json!({
                    "schema_version": MANIFEST_SCHEMA_VERSION,
                    "delta_f": oracle.delta_f(),
                    "mean_work": oracle.mean_work(),
                    "leakage": oracle.leakage(),
                    "peaks": peaks.len(),
                    "jarzynski": jarzynski_check(&dist, oracle.beta(), oracle.delta_f()),
                    "params": c.params,
                }),
            )?;
        }
        Preset::Fig4 | Preset::Fig4Reverse | Preset::Crooks | Preset::Exclusive | Preset::OpenSystem => {
            let (variant, kind) = match c.preset {
                Preset::Fig4 | Preset::Fig4Reverse => (Variant::CqedTwoQubit, WorkKind::Inclusive),
                Preset::Exclusive => (Variant::IdealSingle, WorkKind::Exclusive),
                Preset::OpenSystem => (Variant::OpenSystem, WorkKind::Inclusive),
                _ => (Variant::IdealSingle, WorkKind::Inclusive),
            };
            let forward = if c.preset == Preset::Fig4Reverse {
                None
            } else {
                Some(run_pipeline(c, PipelineSpec { variant, work_kind: kind, reverse: false })?)
            };
            let reverse = run_pipeline(c, PipelineSpec { variant, work_kind: kind, reverse: true })?;
            let suffix = if forward.is_some() { "_reverse" } else { "" };
            if let Some(f) = &forward {
                write_pipeline(&mut staging, f, "")?;
                guards.merge(&f.guards());
            }
            write_pipeline(&mut staging, &reverse, suffix)?;
            guards.merge(&reverse.guards());
            let (crooks, crooks_oracle) = match &forward {
                Some(f) => {
                    let (a, b) = crooks_pair(f, &reverse, c.params.beta, c.crooks);
                    (Some(a?), Some(b?))
                }
                None => (None, None),
            };
            let delta_f_analytic = match (c.preset, kind) {
                (Preset::OpenSystem, _) => None,
                (_, WorkKind::Exclusive) => Some(0.0),
                _ => {
                    let (l0, l1) = (c.params.lambda0, c.params.lambda_tau());
                    let (l0, l1) = if forward.is_some() { (l0, l1) } else { (l1, l0) };
                    Some(free_energy_oscillator(
                        c.params.effective_frequency(l0)?,
                        c.params.effective_frequency(l1)?,
                        c.params.beta,
                    )?)
                }
            };
            let report = FtReportFile {
                schema_version: MANIFEST_SCHEMA_VERSION,
                preset: c.preset,
                forward: forward.as_ref().map(Pipeline::report),
                reverse: Some(reverse.report()),
                crooks,
                crooks_oracle,
                delta_f_analytic,
                free_energies: if c.preset == Preset::OpenSystem { Some(open_free_energies(&c.params)?) } else { None },
                params: c.params.clone(),
            };
            staging.write_json("ft_report.json", &report)?;
            result.forward = forward;
            result.reverse = Some(reverse);
            result.ft_report = Some(report);
        }
    }
    let manifest = Manifest {
        wall_time_seconds: start.elapsed().as_secs_f64(),
        guards,
        warnings: diag.warnings,
        files: staging.files().to_vec(),
        ..result.manifest
    };
    staging.write_json(MANIFEST_NAME, &manifest)?;
    staging.commit()?;
    result.manifest = manifest;
    Ok(result)
}

fn empty_manifest(c: &ExperimentConfig) -> Manifest {
    Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: c.clone(),
        seed: c.seed,
        wall_time_seconds: 0.0,
        guards: GuardSummary::default(),
        warnings: Vec::new(),
        files: Vec::new(),
    }
}

fn write_pipeline(staging: &mut Staging, p: &Pipeline, suffix: &str) -> Result<()> {
    let samples = p.samples();
    staging.write_with(&format!("g_samples{suffix}.csv"), |b| write_g_csv(&samples, b))?;
    staging.write_with(&format!("work_density{suffix}.csv"), |b| p.reconstruction.distribution.write_csv(b))?;
    let peaks = p.oracle.distribution();
    staging.write_with(&format!("oracle_peaks{suffix}.csv"), |b| peaks.write_csv(b))
}

const FIG1_COLUMNS: &[&str] = &["p0", "p1", "p2", "p_down"];
const FIG2_COLUMNS: &[&str] = &["p0", "p1", "p2", "p_down_1"];

/// Fock projector `|n><n|` on slot `slot`.
fn fock_projector(n: usize, slot: usize, layout: &SpaceLayout) -> Result<Operator> {
    let dim = layout.factors()[slot];
    let mut d = vec![0.0; dim];
    d[n] = 1.0;
    embed(&Operator::diagonal(&SpaceLayout::single(dim)?, &d)?, slot, layout)
}

/// Single-qubit Rabi versus soft-mode dynamics, qubit initially down and the
/// oscillator in the Gibbs state of `H_S(λ₀)`.
pub fn fig1(c: &ExperimentConfig) -> Result<DeviationTrace> {
    let p = &c.params;
    let lambda = forward_protocol(p)?;
    let eps = softmode_splitting(&lambda, p)?;
    let rabi = rabi_generator(&eps, p)?;
    let soft = softmode_generator(&eps, p)?.assemble()?;
    let layout = rabi.layout().clone();
    let down = DensityMatrix::new(proj_minus())?;
    let rho = down.tensor(&thermal_state(&h_system(p, p.lambda0)?, p.beta)?)?;
    let mut obs: Vec<Operator> = (0..3).map(|n| fock_projector(n, 1, &layout)).collect::<Result<_>>()?;
    obs.push(embed(&proj_minus(), 0, &layout)?);
    compare_generators(&rabi, &soft, &rho, p.tau, &obs, c.samples, &c.propagation)
}

/// Two-qubit Rabi versus diagonal dynamics from `ρ_S ⊗ Π₋₋`, with the
/// splittings of the drive pair at delay `drive_delay`.
pub fn fig2(c: &ExperimentConfig) -> Result<DeviationTrace> {
    let p = &c.params;
    let drive = drive_inclusive(&forward_protocol(p)?, p.tau, c.drive_delay)?;
    let split = qubit_splittings(&drive, p)?;
    let rabi = two_rabi_generator(&split, p)?;
    let diag = two_diag_generator(&split, p)?.assemble()?;
    let layout = rabi.layout().clone();
    let down = DensityMatrix::new(proj_minus())?;
    let rho = down.tensor(&down)?.tensor(&thermal_state(&initial_hamiltonian(p, &drive)?, p.beta)?)?;
    let mut obs: Vec<Operator> = (0..3).map(|n| fock_projector(n, 2, &layout)).collect::<Result<_>>()?;
    obs.push(embed(&proj_minus(), 0, &layout)?);
    compare_generators(&rabi, &diag, &rho, drive.total_time(), &obs, c.samples, &c.propagation)
}

fn write_trace(staging: &mut Staging, name: &str, trace: &DeviationTrace, columns: &[&str]) -> Result<()> {
    staging.write_with(name, |b| {
        let mut header = vec!["t".to_string()];
        header.extend(columns.iter().map(|k| format!("{k}_rabi")));
        header.extend(columns.iter().map(|k| format!("{k}_diag")));
        writeln!(b, "{}", header.join(","))?;
        for (i, &t) in trace.times.iter().enumerate() {
            let row: Vec<String> = std::iter::once(t)
                .chain(trace.values_a[i].iter().copied())
                .chain(trace.values_b[i].iter().copied())
                .map(fmt17)
                .collect();
            writeln!(b, "{}", row.join(","))?;
        }
        Ok(())
    })
}

fn comparison_summary(trace: &DeviationTrace, columns: &[&str]) -> serde_json::Value {
    let per: serde_json::Map<String, serde_json::Value> =
        columns.iter().zip(&trace.max_gap_per_observable).map(|(k, g)| (k.to_string(), serde_json::json!(g))).collect();
    serde_json::json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "max_gap_oscillator": trace.max_gap_per_observable[..3].iter().cloned().fold(0.0, f64::max),
        "max_gap": trace.max_gap,
        "max_gap_per_observable": per,
    })
}

/// `χ±` as requested and as realized after the clamp, and the splittings, on `[0, τ+u]`.
fn fig3_drives(c: &ExperimentConfig, staging: &mut Staging) -> Result<()> {
    let p = &c.params;
    let drive = drive_inclusive(&forward_protocol(p)?, p.tau, c.drive_delay)?;
    let split = qubit_splittings(&drive, p)?;
    let total = drive.total_time();
    let times: Vec<f64> = (0..=c.samples).map(|i| total * i as f64 / c.samples as f64).collect();
    let table = |header: &str, cols: &[&Schedule], b: &mut Vec<u8>| -> Result<()> {
        writeln!(b, "{header}")?;
        for &t in &times {
            let row: Vec<String> = std::iter::once(t).chain(cols.iter().map(|s| s.value(t))).map(fmt17).collect();
            writeln!(b, "{}", row.join(","))?;
        }
        Ok(())
    };
    staging.write_with("chi_schedules.csv", |b| {
        table(
            "t,chi_plus,chi_minus,chi_plus_eff,chi_minus_eff",
            &[&drive.chi_plus, &drive.chi_minus, &split.chi_plus_eff, &split.chi_minus_eff],
            b,
        )
    })?;
    staging.write_with("eps_schedules.csv", |b| table("t,eps1,eps2", &[&split.eps1, &split.eps2], b))
}
