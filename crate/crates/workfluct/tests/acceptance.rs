//! End-to-end acceptance checks on the canonical parameter set.
//! Prints one `criterion N: PASS|FAIL ...` line per criterion and exits
//! nonzero if any of them fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use workfluct::cli::{run, ExperimentConfig, ExperimentResult, GuardSummary, Preset, MANIFEST_NAME};
use workfluct::evolve::{propagator, propagator_fn, Method, PropagationConfig};
use workfluct::interferometry::MAX_GUARD_POPULATION;
use workfluct::model::{forward_protocol, h_system, system_generator, ModelParams};
use workfluct::qop::{eig_hermitian, expm_skew, number, quadrature_sq};
use workfluct::workstats::{char_direct, free_energy_oscillator, free_energy_spectral, tmp_oracle, Shape};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Every run the harness performs, for the hygiene criterion.
#[derive(Default)]
struct Ledger {
    guards: Vec<(String, GuardSummary)>,
}

impl Ledger {
    fn run(&mut self, c: &ExperimentConfig) -> workfluct::Result<(ExperimentResult, Duration)> {
        let start = Instant::now();
        let r = run(c)?;
        self.guards.push((c.preset.name().to_string(), r.manifest.guards));
        Ok((r, start.elapsed()))
    }
}

fn config(preset: Preset, out: &Path) -> ExperimentConfig {
    ExperimentConfig { out: out.join(preset.name()), ..ExperimentConfig::preset(preset) }
}

fn criterion_1() -> workfluct::Result<Verdict> {
    let start = Instant::now();
    let p = ModelParams { n_fock: 30, ..ModelParams::default() };
    let lambda = forward_protocol(&p)?;
    let cfg = PropagationConfig { dt: 2.0 * PI / 1000.0, method: Method::CommutatorCorrected, ..Default::default() };
    let u_op = propagator(&system_generator(&p, &lambda)?, 0.0, p.tau, &cfg)?;
    let h0 = h_system(&p, p.lambda0)?;
    let h1 = h_system(&p, p.lambda_tau())?;
    let Shape::Peaks { peaks } = tmp_oracle(&h0, &h1, &u_op, p.beta)?.shape else {
        unreachable!("the oracle returns peaks")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u: f64 = rng.gen_range(0.0..60.0);
        let sum: C64 = peaks.iter().map(|&(w, q)| C64::from_polar(q, u * w)).sum();
        worst = worst.max((char_direct(&h0, &h1, &u_op, p.beta, u)? - sum).norm());
    }
    let elapsed = start.elapsed();
    Ok(verdict(
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!(
            "max |G_direct - G_peaks| = {worst:.2e} over 20 u in [0, 60], N = 30, {} peaks, {elapsed:.2?}",
            peaks.len()
        ),
    ))
}

fn criterion_2(r: &ExperimentResult, elapsed: Duration) -> Verdict {
    let mut pass = elapsed < Duration::from_secs(300);
    let mut detail = Vec::new();
    for p in [&r.forward, &r.reverse].into_iter().flatten() {
        let half = p.reconstruction.resolution / 2.0;
        let pos = p.peak_matches.iter().map(|m| m.position_error).fold(0.0, f64::max);
        let weight = p.peak_matches.iter().map(|m| m.weight_error).fold(0.0, f64::max);
        pass &= p.max_oracle_gap <= 1e-6 && pos <= half && weight <= 0.02 && !p.peak_matches.is_empty();
        detail.push(format!(
            "{}: G gap {:.1e}, {} peaks, position error {pos:.4} (limit {half:.4}), weight error {weight:.4}",
            if p.spec.reverse { "reverse" } else { "forward" },
            p.max_oracle_gap,
            p.peak_matches.len()
        ));
    }
    detail.push(format!("forward + reverse in {elapsed:.1?} on this machine"));
    verdict(pass, detail.join("; "))
}

fn criterion_3(r: &ExperimentResult) -> workfluct::Result<Verdict> {
    let p = ModelParams::default();
    let analytic =
        free_energy_oscillator(p.effective_frequency(p.lambda0)?, p.effective_frequency(p.lambda_tau())?, p.beta)?;
    let big = ModelParams { n_fock: 40, ..p.clone() };
    let spectral = free_energy_spectral(&h_system(&big, big.lambda0)?, &h_system(&big, big.lambda_tau())?, big.beta)?;
    let fit = r.ft_report.as_ref().and_then(|f| f.crooks).expect("crooks preset reports a fit");
    let expected_intercept = -p.beta * analytic;
    let slope_err = (fit.slope - p.beta).abs() / p.beta;
    let intercept_err = (fit.intercept - expected_intercept).abs() / expected_intercept.abs();
    Ok(verdict(
        slope_err <= 0.05 && intercept_err <= 0.05 && (analytic - spectral).abs() <= 1e-6,
        format!(
            "slope {:.4} ({:.1}%), intercept {:.5} vs {expected_intercept:.5} ({:.1}%), {} points; dF analytic {analytic:.7}, spectral {spectral:.7}",
            fit.slope,
            100.0 * slope_err,
            fit.intercept,
            100.0 * intercept_err,
            fit.points_used
        ),
    ))
}

fn criterion_4(r: &ExperimentResult) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for rep in [&r.ft_report.as_ref().unwrap().forward, &r.ft_report.as_ref().unwrap().reverse].into_iter().flatten() {
        pass &= (rep.jarzynski_oracle - 1.0).abs() <= 1e-4 && (rep.jarzynski_density - 1.0).abs() <= 0.05;
        detail.push(format!(
            "{}: oracle {:.8}, density {:.5}",
            if rep.spec.reverse { "reverse" } else { "forward" },
            rep.jarzynski_oracle,
            rep.jarzynski_density
        ));
    }
    verdict(pass, detail.join("; "))
}

fn criterion_5(ledger: &mut Ledger, out: &Path) -> workfluct::Result<Verdict> {
    let mut gaps = Vec::new();
    for preset in [Preset::Fig1, Preset::Fig2] {
        let c = config(preset, out);
        let (r, _) = ledger.run(&c)?;
        let trace = r.comparison.expect("comparison presets return a trace");
        gaps.push((preset.name(), trace.max_gap_until(c.params.tau, &[0, 1, 2])));
    }
    Ok(verdict(
        gaps.iter().all(|g| g.1 <= 0.05),
        gaps.iter()
            .map(|(n, g)| format!("{n}: max gap of the first three Fock populations on [0, tau] {g:.5}"))
            .collect::<Vec<_>>()
            .join("; "),
    ))
}

fn criterion_6(ledger: &mut Ledger, out: &Path) -> workfluct::Result<Verdict> {
    let c = config(Preset::Fig4, out);
    let (r, elapsed) = ledger.run(&c)?;
    let fwd = r.forward.as_ref().expect("fig4 runs forward");
    let dw = fwd.reconstruction.resolution;
    let mut matches = fwd.peak_matches.clone();
    matches.sort_by(|a, b| b.weight_reference.total_cmp(&a.weight_reference));
    let top = &matches[..matches.len().min(3)];
    let pos = top.iter().map(|m| m.position_error).fold(0.0, f64::max);
    let weight = top.iter().map(|m| m.weight_error).fold(0.0, f64::max);
    let fit = r.ft_report.as_ref().and_then(|f| f.crooks).expect("fig4 reports a fit");
    let slope_err = (fit.slope - c.params.beta).abs() / c.params.beta;
    let dim = 4 * c.params.n_fock;
    let peaks: Vec<String> = top.iter().map(|m| format!("{:.3}->{:.3}", m.w_reference, m.w_found)).collect();
    Ok(verdict(
        top.len() == 3 && pos <= dw && weight <= 0.10 && slope_err <= 0.15 && elapsed < Duration::from_secs(1800),
        format!(
            "top peaks {} (position error {pos:.4}, limit {dw:.4}), weight error {weight:.4}, Crooks slope {:.4} ({:.1}%), G gap to oracle {:.3}, dim {dim}, {elapsed:.0?} on {} thread(s)",
            peaks.join(", "),
            fit.slope,
            100.0 * slope_err,
            fwd.max_oracle_gap,
            rayon::current_num_threads()
        ),
    ))
}

fn criterion_7(ledger: &mut Ledger, out: &Path) -> workfluct::Result<Verdict> {
    let (r, _) = ledger.run(&config(Preset::Exclusive, out))?;
    let fit = r.ft_report.as_ref().and_then(|f| f.crooks).expect("exclusive preset reports a fit");
    let slope_err = (fit.slope - fit.beta).abs() / fit.beta;
    Ok(verdict(
        fit.intercept.abs() <= 0.05 && slope_err <= 0.05,
        format!(
            "slope {:.4} ({:.1}%), intercept {:.2e}, {} points",
            fit.slope,
            100.0 * slope_err,
            fit.intercept,
            fit.points_used
        ),
    ))
}

fn criterion_8(ledger: &mut Ledger, out: &Path) -> workfluct::Result<Verdict> {
    let (r, _) = ledger.run(&config(Preset::OpenSystem, out))?;
    let report = r.ft_report.as_ref().expect("open-system writes a report");
    let fit = report.crooks.expect("open-system reports a fit");
    let f = report.free_energies.expect("open-system reports free energies");
    let slope_err = (fit.slope - fit.beta).abs() / fit.beta;
    let gap = (f.delta_f_sb - f.delta_f_s).abs();
    Ok(verdict(
        slope_err <= 0.05 && gap <= 1e-6,
        format!(
            "slope {:.4} ({:.1}%), intercept {:.5} vs -beta dF_S {:.5}; dF_S+B {:.7}, dF_S {:.7}, gap {gap:.1e}; isolated system dF {:.7}",
            fit.slope,
            100.0 * slope_err,
            fit.intercept,
            -fit.beta * f.delta_f_s,
            f.delta_f_sb,
            f.delta_f_s,
            f.delta_f_isolated
        ),
    ))
}

/// Error ratio on halving `dt` against a propagator known in closed form:
/// `H(t) = R H₀ R†` with `R = e^{−iKt}` has `U(t) = e^{−iKt} e^{−i(H₀−K)t}`.
fn rotating_frame_ratio(method: Method) -> workfluct::Result<f64> {
    let n = 8;
    let p = ModelParams { n_fock: n, ..ModelParams::default() };
    let h0 = h_system(&p, 0.1)?;
    let k = &number(n)?.scale(0.7) + &quadrature_sq(n)?.scale(0.05);
    let ks = eig_hermitian(&k)?;
    let h = |t: f64| {
        let r = ks.evolution(t);
        r.matmul(&h0).unwrap().matmul(&r.dagger()).unwrap()
    };
    let exact = ks.evolution(1.0).matmul(&expm_skew(&(&h0 - &k), 1.0)?)?;
    let err = |dt: f64| -> workfluct::Result<f64> {
        let cfg = PropagationConfig { dt, method, ..PropagationConfig::default() };
        Ok(propagator_fn(h, 0.0, 1.0, &cfg)?.max_abs_diff(&exact))
    };
    Ok(err(0.02)? / err(0.01)?)
}

/// Error ratio on halving `dt` of the sparse production path on the ramp,
/// against a run at a sixteenth of the coarse step.
fn ramp_ratio(method: Method) -> workfluct::Result<(f64, f64)> {
    let p = ModelParams { n_fock: 16, ..ModelParams::default() };
    let td = system_generator(&p, &forward_protocol(&p)?)?;
    let u = |dt: f64| propagator(&td, 0.0, p.tau, &PropagationConfig { dt, method, ..PropagationConfig::default() });
    let coarse = 2.0 * PI / 100.0;
    let reference = u(coarse / 16.0)?;
    let e1 = u(coarse)?.max_abs_diff(&reference);
    let e2 = u(coarse / 2.0)?.max_abs_diff(&reference);
    Ok((e1, e1 / e2))
}

fn hashes(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        // The manifest records the wall time.
        if name != MANIFEST_NAME {
            files.push((name, std::fs::read(&path)?));
        }
    }
    files.sort();
    Ok(files)
}

fn criterion_9(ledger: &mut Ledger, out: &Path) -> workfluct::Result<Verdict> {
    let mut detail = Vec::new();
    let mut pass = true;
    for method in [Method::Midpoint, Method::CommutatorCorrected] {
        let rot = rotating_frame_ratio(method)?;
        let (err, ramp) = ramp_ratio(method)?;
        detail.push(format!("{method:?} halving ratio {rot:.3} (closed form), {ramp:.3} (ramp, error {err:.1e})"));
        if method == Method::CommutatorCorrected {
            pass &= rot >= 4.0 && ramp >= 4.0;
        }
    }
    let drift = ledger.guards.iter().map(|g| g.1.max_unitarity_drift).fold(0.0, f64::max);
    let guard = ledger.guards.iter().map(|g| g.1.max_guard_population).fold(0.0, f64::max);
    pass &= drift <= 1e-7 && guard <= MAX_GUARD_POPULATION;
    detail.push(format!("max drift {drift:.1e}, max guard population {guard:.1e} over {} runs", ledger.guards.len()));

    let mut outputs = Vec::new();
    for k in 0..2 {
        let c = ExperimentConfig {
            out: out.join(format!("repeat{k}")),
            seed: 11,
            shots: Some(2000),
            u_max: 20.0,
            ..ExperimentConfig::preset(Preset::Crooks)
        };
        ledger.run(&c)?;
        outputs.push(hashes(&c.out)?);
    }
    let identical = outputs[0] == outputs[1] && !outputs[0].is_empty();
    pass &= identical;
    detail.push(format!(
        "seeded shot-noise rerun: {} files {}",
        outputs[0].len(),
        if identical { "identical" } else { "differ" }
    ));
    Ok(verdict(pass, detail.join("; ")))
}

fn report(n: usize, v: workfluct::Result<Verdict>) -> bool {
    match v {
        Ok(v) => {
            println!("criterion {n}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            v.pass
        }
        Err(e) => {
            println!("criterion {n}: FAIL error: {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path();
    let mut ledger = Ledger::default();
    let mut ok = report(1, criterion_1());
    match ledger.run(&config(Preset::Crooks, out)) {
        Ok((r, elapsed)) => {
            ok &= report(2, Ok(criterion_2(&r, elapsed)));
            ok &= report(3, criterion_3(&r));
            ok &= report(4, Ok(criterion_4(&r)));
        }
        Err(e) => {
            for n in 2..=4 {
                println!("criterion {n}: FAIL error: crooks preset: {e}");
            }
            ok = false;
        }
    }
    ok &= report(5, criterion_5(&mut ledger, out));
    ok &= report(6, criterion_6(&mut ledger, out));
    ok &= report(7, criterion_7(&mut ledger, out));
    ok &= report(8, criterion_8(&mut ledger, out));
    ok &= report(9, criterion_9(&mut ledger, out));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
