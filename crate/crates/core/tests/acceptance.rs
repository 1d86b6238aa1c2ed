//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p logdec-core --test acceptance -- 3 5`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use logdec_core::coupling::CouplingSchedule;
use logdec_core::experiments::{
    breakdown_scan, calibrate_c0, compare, log_log_slope, run_jzme, run_logse, zero_pinning, GammaSpec,
    InitialCondition, PinningOutcome, Physics, Setup, C0,
};
use logdec_core::jzme::{JzmeConfig, JzmePropagator};
use logdec_core::logse::{LogSeConfig, LogSePropagator};
use logdec_core::moments::{evolve, free_second_moment, MomentParams};
use logdec_core::observables::{find_zeros, position_variance, ZERO_TOLERANCE};
use logdec_core::pinning::Verdict;
use logdec_core::reglog::{default_sweep_schemes, regularization_sweep, rel_distance, RegLog, UNIT_INTERVAL_SAMPLES};
use logdec_core::states::{gaussian, Parity};
use logdec_core::{DensityState, Grid1D, Result, WaveState};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Check = fn() -> Result<Outcome>;

fn calibrated() -> Result<f64> {
    calibrate_c0(&Physics::default(), 1.0)
}

fn paper_setup(t_final: f64, record_every: usize) -> Result<Setup> {
    Ok(Setup {
        t_final,
        record_every,
        gamma: GammaSpec::Interp { c0: C0::Fixed(calibrated()?) },
        ..Setup::default()
    })
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max)
}

/// LogSE widths track JZME widths within 5% for t ≤ 3 t_b.
fn widths_agree() -> Result<Outcome> {
    let logse = paper_setup(3.0, 1)?;
    let (lo, _) = run_logse(&logse, |_, _| Ok(()))?;
    let jz = Setup { points: 512, ..logse.clone() };
    let (jo, _) = run_jzme(&jz, |_, _| Ok(()))?;
    let (wl, wj) = (lo.series.widths(), jo.series.widths());
    if wl.len() != wj.len() {
        return Ok(Outcome::new(false, format!("record counts differ: {} vs {}", wl.len(), wj.len())));
    }
    let worst = max_rel_diff(&wl, &wj);
    Ok(Outcome::new(worst <= 0.05, format!("max |w_LogSE/w_JZME - 1| = {worst:.4} over t <= 3 (tol 0.05)")))
}

/// JZME second moment against the Gaussian moment oracle, and the
/// long-time log-log slope of the width.
fn oracle_agreement() -> Result<Outcome> {
    let params = MomentParams::default();
    let short = Setup { length: 60.0, points: 512, ..paper_setup(3.0, 1)? };
    let mut worst = 0.0f64;
    run_jzme(&short, |rho: &DensityState, rec| {
        let grid_xx = position_variance(&rho.diagonal(), &rho.grid)?;
        let oracle = evolve(1.0, rec.t, 1e-3, &params)?.last().expect("oracle sample").xx;
        worst = worst.max((grid_xx / oracle - 1.0).abs());
        Ok(())
    })?;

    let long = Setup { length: 160.0, points: 1024, record_every: 2, ..paper_setup(10.0, 2)? };
    let (jo, _) = run_jzme(&long, |_, _| Ok(()))?;
    let grid_slope = log_log_slope(&jo.series.times(), &jo.series.widths(), (5.0, 10.0))?;
    let oracle = evolve(1.0, 10.0, 1e-3, &params)?;
    let times: Vec<f64> = oracle.iter().map(|m| m.t).collect();
    let widths: Vec<f64> = oracle.iter().map(|m| m.width()).collect();
    let oracle_slope = log_log_slope(&times, &widths, (5.0, 10.0))?;
    let pass = worst <= 0.01 && (grid_slope - oracle_slope).abs() <= 0.05;
    Ok(Outcome::new(
        pass,
        format!(
            "max |<x^2>/oracle - 1| = {worst:.2e} for t <= 3 (tol 1e-2); slope on [5,10]: grid {grid_slope:.4}, oracle {oracle_slope:.4} (tol 0.05)"
        ),
    ))
}

/// A decoherence-only step damps ρ(x, x') by exp(-Λ (x - x')² t).
fn decoherence_damping() -> Result<Outcome> {
    let grid = Arc::new(Grid1D::new(32.0, 512)?);
    let a = gaussian(grid.clone(), 4.0, 0.0)?;
    let mut rho = DensityState::from_wavefunction(&a);
    let before = rho.clone();
    let lambda = 1.0;
    let dx = grid.dx();
    let offset = (1.0 / dx).round() as usize;
    let dt = 1.0 / (offset as f64 * dx).powi(2);
    let prop = JzmePropagator::new(JzmeConfig::new(dt, lambda), grid.clone())?;
    prop.decoherence_step(&mut rho);
    let j = grid.nearest_index(-0.5);
    let l = j + offset;
    let ratio = (rho.at(j, l) / before.at(j, l)).norm();
    let err = (ratio - (-1.0f64).exp()).abs();
    Ok(Outcome::new(err <= 1e-10, format!("|x-x'| = 1, Λt = 1: damping {ratio:.15} vs e^-1, error {err:.2e} (tol 1e-10)")))
}

/// LogSE norm and JZME trace and Hermiticity conservation.
fn conservation() -> Result<Outcome> {
    let setup = paper_setup(50.0, 1)?;
    let (schedule, _) = setup.schedule()?;
    let (mut prop, mut a) = setup.logse(schedule)?;
    let n0 = a.norm_sqr();
    let mut norm_drift = 0.0f64;
    for n in 1..=1000 {
        prop.strang_step(&mut a)?;
        a.t = n as f64 * setup.dt;
        norm_drift = norm_drift.max((a.norm_sqr() - n0).abs());
    }

    let jz = Setup { points: 512, ..paper_setup(3.0, 1)? };
    let mut trace_drift = 0.0f64;
    let (_, herm) = run_jzme(&jz, |rho: &DensityState, _| {
        trace_drift = trace_drift.max((rho.trace() - 1.0).abs());
        Ok(())
    })?;
    let pass = norm_drift <= 1e-10 && trace_drift <= 1e-8 && herm <= 1e-10;
    Ok(Outcome::new(
        pass,
        format!(
            "LogSE norm drift over 1000 steps {norm_drift:.2e} (tol 1e-10); JZME trace drift {trace_drift:.2e} (tol 1e-8), Hermiticity {herm:.2e} (tol 1e-10)"
        ),
    ))
}

/// Global convergence order of the LogSE split step with the interpolated γ.
fn convergence_order() -> Result<Outcome> {
    let grid = Arc::new(Grid1D::new(30.0, 2048)?);
    let schedule = CouplingSchedule::InterpLinear { lambda: 1.0, c0: calibrated()?, t_b: 1.0 };
    let run = |dt: f64| -> Result<WaveState> {
        let mut prop = LogSePropagator::new(LogSeConfig::new(dt, schedule.clone()), grid.clone())?;
        let mut a = gaussian(grid.clone(), 1.0, 0.0)?;
        let steps = (2.0 / dt).round() as usize;
        for n in 1..=steps {
            prop.strang_step(&mut a)?;
            a.t = n as f64 * dt;
        }
        Ok(a)
    };
    let dts = [0.04, 0.02, 0.01, 0.005];
    let finals: Vec<WaveState> = dts.iter().map(|&dt| run(dt)).collect::<Result<_>>()?;
    let diff = |p: &WaveState, q: &WaveState| {
        let s: f64 = p.amplitudes.iter().zip(&q.amplitudes).map(|(x, y)| (x - y).norm_sqr()).sum();
        (s * grid.dx()).sqrt()
    };
    let d: Vec<f64> = finals.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    let orders: Vec<f64> = d.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = orders.iter().all(|p| (p - 2.0).abs() <= 0.2);
    Ok(Outcome::new(
        pass,
        format!(
            "successive differences {:.3e}, {:.3e}, {:.3e}; observed orders {:.3}, {:.3} (target 2 +/- 0.2)",
            d[0], d[1], d[2], orders[0], orders[1]
        ),
    ))
}

/// Insensitivity to σ and the regularization sweep trends.
fn regularization() -> Result<Outcome> {
    let base = paper_setup(4.0, 1)?;
    let widths = |sigma: f64| -> Result<Vec<f64>> {
        let setup = Setup { reglog: RegLog::ShiftImag { sigma }, ..base.clone() };
        Ok(run_logse(&setup, |_, _| Ok(()))?.0.series.widths())
    };
    let (w8, w16) = (widths(8.0)?, widths(16.0)?);
    let sigma_dist = rel_distance(&w8, &w16)?;

    let sigmas: Vec<f64> = (2..=40).map(|i| 0.5 * i as f64).collect();
    let rows = regularization_sweep(&default_sweep_schemes(), &sigmas, UNIT_INTERVAL_SAMPLES)?;
    let mut monotone = true;
    let mut bounded = true;
    let mut at_three = Vec::new();
    for scheme in default_sweep_schemes().iter().filter(|s| !matches!(s, RegLog::Bare)) {
        let errs: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.scheme == scheme.name()).map(|r| (r.sigma, r.err)).collect();
        monotone &= errs.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15);
        bounded &= errs.iter().filter(|(s, _)| *s >= 3.0).all(|(_, e)| *e < 0.1);
        if let Some((_, e)) = errs.iter().find(|(s, _)| *s == 3.0) {
            at_three.push(format!("{} {e:.4}", scheme.name()));
        }
    }
    let pass = sigma_dist <= 1e-3 && monotone && bounded;
    Ok(Outcome::new(
        pass,
        format!(
            "width distance sigma 8 vs 16 over 4 t_b {sigma_dist:.2e} (tol 1e-3); sweep monotone {monotone}; Err < 0.1 for sigma >= 3 {bounded} (Err at 3: {})",
            at_three.join(", ")
        ),
    ))
}

fn pinning_setup(parity: Parity) -> Result<Setup> {
    Ok(Setup {
        points: 512,
        dt: 0.01,
        record_every: 1,
        ic: InitialCondition::TwinGaussian { b: 1.0, s: 1.0, parity },
        visibility_window: Some((-4.0, 4.0)),
        ..paper_setup(1.0, 1)?
    })
}

fn describe_pinning(out: &PinningOutcome) -> (bool, String) {
    let Some(t0) = out.zero_time else {
        return (false, "no LogSE zeros formed within the horizon".into());
    };
    let verdicts: Vec<String> = out.reports.iter().map(|r| r.verdict.to_string()).collect();
    let pinned = out.reports.iter().all(|r| r.verdict == Verdict::Pass);
    let refill = out.refill.map(|f| f.exponent);
    let refill_ok = refill.is_some_and(|p| (p - 3.0).abs() <= 0.3);
    let fringes: Vec<&(f64, Option<f64>, Option<f64>)> = out.visibility.iter().filter(|v| v.1.is_some()).collect();
    let logse_vis_ok = !fringes.is_empty() && fringes.iter().all(|v| v.1.is_some_and(|x| x >= 0.99));
    let jz: Vec<Option<f64>> = fringes.iter().map(|v| v.2).collect();
    let jzme_decreasing =
        !jz.is_empty() && jz.iter().all(Option::is_some) && jz.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
    let pass = pinned && refill_ok && logse_vis_ok && jzme_decreasing;
    let refill_text = refill.map(|p| format!("{p:.3}")).unwrap_or_else(|| "n/a".into());
    (
        pass,
        format!(
            "zeros at t = {t0:.2}: verdicts [{}]; refill exponent {refill_text} (target 3 +/- 0.3); LogSE visibility >= 0.99 {logse_vis_ok}; JZME visibility strictly decreasing {jzme_decreasing}",
            verdicts.join(" ")
        ),
    )
}

/// Zero pinning under the LogSE against refill under the JZME.
fn zero_pinning_check() -> Result<Outcome> {
    let (pass, detail) = describe_pinning(&zero_pinning(&pinning_setup(Parity::Even)?, 1.0)?);
    let (_, odd) = describe_pinning(&zero_pinning(&pinning_setup(Parity::Odd)?, 1.0)?);
    println!("    supplementary, odd twin (not counted): {odd}");
    Ok(Outcome::new(pass, format!("even twin b = s = 1: {detail}")))
}

/// A kink in the LogSE width at the time the first zeros form.
fn kink_at_zero_formation() -> Result<Outcome> {
    let every = 5;
    let setup = Setup {
        dt: 1e-3,
        ic: InitialCondition::TwinGaussian { b: 1.0, s: 1.0, parity: Parity::Even },
        ..paper_setup(0.5, every)?
    };
    let mut first_zero = None;
    let (out, _) = run_logse(&setup, |a: &WaveState, rec| {
        if first_zero.is_none() && !find_zeros(a, ZERO_TOLERANCE)?.is_empty() {
            first_zero = Some(rec.t);
        }
        Ok(())
    })?;
    let kink = logdec_core::experiments::detect_kink(&out.series.times(), &out.series.widths());
    let spacing = every as f64 * setup.dt;
    let fmt = |v: Option<f64>| v.map(|t| format!("{t:.3}")).unwrap_or_else(|| "none".into());
    let pass = match (kink, first_zero) {
        (Some(k), Some(z)) => (0.05..=0.3).contains(&k) && (k - z).abs() <= spacing + 1e-12,
        _ => false,
    };
    Ok(Outcome::new(
        pass,
        format!(
            "kink at {} (window [0.05, 0.3]), first zero at {} (tol one record, {spacing})",
            fmt(kink),
            fmt(first_zero)
        ),
    ))
}

fn scan_threads() -> usize {
    std::env::var("LOGDEC_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Onset of the LogSE/JZME discrepancy and its dependence on the domain.
fn breakdown_behaviour() -> Result<Outcome> {
    let rise = |points: usize| -> Result<Option<f64>> {
        let setup = Setup { points, ..paper_setup(14.0, 2)? };
        Ok(compare(&setup, |_, _, _| Ok(()))?.error_rise_time)
    };
    let (r1, r2) = (rise(512)?, rise(1024)?);
    let rise_ok = match (r1, r2) {
        (Some(a), Some(b)) => (7.0..=11.0).contains(&b) && ((b - a) / b).abs() < 0.1,
        _ => false,
    };

    let base = paper_setup(60.0, 2)?;
    let lengths = [30.0, 60.0, 120.0, 240.0, 480.0];
    let rows = breakdown_scan(&base, &lengths, 60.0, scan_threads())?;
    let t: Vec<f64> = rows.iter().map(|r| r.t_breakdown.unwrap_or(f64::INFINITY)).collect();
    let monotone = t.windows(2).all(|w| w[1] >= w[0]);
    let spacing = base.record_every as f64 * base.dt;
    let plateau = t[3].is_finite() && t[4].is_finite() && (t[4] - t[3]).abs() <= spacing + 1e-12;
    let fmt = |v: Option<f64>| v.map(|t| format!("{t:.2}")).unwrap_or_else(|| "none".into());
    let scan: Vec<String> = rows.iter().map(|r| format!("L={} t={}", r.length, fmt(r.t_breakdown))).collect();
    Ok(Outcome::new(
        rise_ok && monotone && plateau,
        format!(
            "Err rise at N=512 {}, N=1024 {} (window [7, 11], shift < 10%); breakdown scan [{}] (censored at 60); monotone {monotone}; plateau {plateau}",
            fmt(r1),
            fmt(r2),
            scan.join(", ")
        ),
    ))
}

/// With Λ = 0 both formalisms reduce to free Schrödinger evolution.
fn free_limit() -> Result<Outcome> {
    let setup = Setup {
        points: 512,
        t_final: 1.0,
        record_every: 1,
        physics: Physics { lambda: 0.0, ..Physics::default() },
        ..Setup::default()
    };
    let mut intensity = Vec::new();
    let mut free_err = 0.0f64;
    let (lo, _) = run_logse(&setup, |a: &WaveState, rec| {
        intensity = a.intensity();
        let exact = free_second_moment(1.0, rec.t, 1.0, 1.0).sqrt();
        free_err = free_err.max((rec.width / exact - 1.0).abs());
        Ok(())
    })?;
    let mut diagonal = Vec::new();
    run_jzme(&setup, |rho: &DensityState, _| {
        diagonal = rho.diagonal();
        Ok(())
    })?;
    let dist = rel_distance(&intensity, &diagonal)?;
    let t_end = lo.series.last().map(|r| r.t).unwrap_or(0.0);
    Ok(Outcome::new(
        dist <= 1e-8 && free_err <= 1e-3,
        format!("at t = {t_end}: |a|^2 vs rho(x,x) distance {dist:.2e} (tol 1e-8); width vs free spreading {free_err:.2e} (tol 1e-3)"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, Check); 10] = [
        (1, widths_agree),
        (2, oracle_agreement),
        (3, decoherence_damping),
        (4, conservation),
        (5, convergence_order),
        (6, regularization),
        (7, zero_pinning_check),
        (8, kink_at_zero_formation),
        (9, breakdown_behaviour),
        (10, free_limit),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id}: {} ({detail}) [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} failing");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
