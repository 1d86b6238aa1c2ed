//! The five subcommands. Each writes its data files into the output
//! directory and returns a summary for `run.json`.

use std::path::{Path, PathBuf};

use log::{info, warn};
use logdec_core::coupling::tabulate;
use logdec_core::experiments::{
    self, breakdown_scan, compare as compare_runs, run_jzme, run_logse, scan_csv, Backend, GammaSpec, Setup, C0,
};
use logdec_core::logse::snapshot_csv;
use logdec_core::observables::ObservableSeries;
use logdec_core::pinning::report_csv;
use logdec_core::propagation::Breakdown;
use logdec_core::reglog::{regularization_sweep, sweep_csv};
use logdec_core::{DensityState, WaveState};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::Settings;
use crate::svg::{line_chart, Axes, Series};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Core(#[from] logdec_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
}

type VisibilityRow = (f64, Option<f64>, Option<f64>);

pub struct Report {
    pub breakdown: Option<Breakdown>,
    pub result: Value,
}

struct Output<'a> {
    dir: &'a Path,
    svg: bool,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<(), CommandError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CommandError::Write { path, source })
    }

    fn chart(&self, name: &str, chart: impl FnOnce() -> String) -> Result<(), CommandError> {
        if self.svg {
            self.write(name, &chart())?;
        }
        Ok(())
    }
}

/// Picks the first record at or after each requested snapshot time.
struct Snapshots {
    pending: Vec<f64>,
    tol: f64,
}

impl Snapshots {
    fn new(settings: &Settings, unit: f64) -> Self {
        let mut pending: Vec<f64> = settings.snapshot_times.iter().map(|m| m * unit).collect();
        pending.sort_by(|a, b| b.total_cmp(a));
        Self { pending, tol: 0.5 * settings.setup.dt }
    }

    fn due(&mut self, t: f64) -> bool {
        let mut hit = false;
        while self.pending.last().is_some_and(|&next| next <= t + self.tol) {
            self.pending.pop();
            hit = true;
        }
        hit
    }
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:.3}.csv")
}

fn paired_snapshot(a: &WaveState, rho: &DensityState) -> String {
    let mut out = String::from("x,re_a,im_a,intensity,rho_diag\n");
    for ((x, v), d) in a.grid.x().iter().zip(&a.amplitudes).zip(rho.diagonal()) {
        out.push_str(&format!("{x},{:.12e},{:.12e},{:.12e},{:.12e}\n", v.re, v.im, v.norm_sqr(), d));
    }
    out
}

fn width_chart(series: &[(&str, &ObservableSeries)]) -> String {
    let lines: Vec<Series> = series
        .iter()
        .map(|(name, s)| Series::new(*name, s.records.iter().map(|r| (r.t, r.width)).collect()))
        .collect();
    line_chart("Ensemble width", "t", "w", &lines, Axes::default())
}

fn breakdown_json(b: Option<Breakdown>) -> Value {
    json!({ "t_breakdown": b.map(|b| b.t), "reason": b.map(|b| b.reason) })
}

pub fn run(settings: &Settings, dir: &Path) -> Result<Report, CommandError> {
    let out = Output { dir, svg: settings.emit_svg };
    let setup = &settings.setup;
    let unit = setup.time_unit()?;
    let mut snaps = Snapshots::new(settings, unit);
    if settings.gamma_tabulate {
        gamma_table(settings, &out, unit)?;
    }
    let (breakdown, result) = match settings.backend {
        Backend::Logse => {
            let (outcome, c0) = run_logse(setup, |a, rec| {
                if snaps.due(rec.t) {
                    std::fs::write(dir.join(snapshot_name(rec.t)), snapshot_csv(a))?;
                }
                Ok(())
            })?;
            out.write("series.csv", &outcome.series.to_csv())?;
            out.chart("width.svg", || width_chart(&[("LogSE", &outcome.series)]))?;
            let result = json!({ "backend": "logse", "c0": c0, "records": outcome.series.len() });
            (outcome.breakdown, result)
        }
        Backend::Jzme => {
            let (outcome, herm) = run_jzme(setup, |rho, rec| {
                if snaps.due(rec.t) {
                    std::fs::write(dir.join(snapshot_name(rec.t)), rho.diagonal_csv())?;
                }
                Ok(())
            })?;
            out.write("series.csv", &outcome.series.to_csv())?;
            out.chart("width.svg", || width_chart(&[("JZME", &outcome.series)]))?;
            let result = json!({
                "backend": "jzme",
                "records": outcome.series.len(),
                "max_hermiticity_error": herm,
            });
            (outcome.breakdown, result)
        }
        Backend::Both => {
            let cmp = compare_runs(setup, |a, rho, rec| {
                if snaps.due(rec.t) {
                    std::fs::write(dir.join(snapshot_name(rec.t)), paired_snapshot(a, rho))?;
                }
                Ok(())
            })?;
            let (logse, jzme) = (cmp.logse_series(), cmp.jzme_series());
            out.write("series.csv", &logse.to_csv())?;
            out.write("series_jzme.csv", &jzme.to_csv())?;
            out.chart("width.svg", || width_chart(&[("LogSE", &logse), ("JZME", &jzme)]))?;
            let result = json!({
                "backend": "both",
                "c0": cmp.c0,
                "records": cmp.records.len(),
                "max_hermiticity_error": cmp.max_hermiticity_error,
            });
            (cmp.logse_breakdown, result)
        }
    };
    Ok(Report { breakdown, result: json!({ "run": result, "breakdown": breakdown_json(breakdown) }) })
}

/// `γ(t)` from the oracle history next to the interpolated form, on a
/// logarithmic time grid.
fn gamma_table(settings: &Settings, out: &Output, unit: f64) -> Result<(), CommandError> {
    let setup = &settings.setup;
    if setup.physics.lambda == 0.0 {
        warn!("gamma.tabulate ignored: the coupling vanishes for physics.lambda = 0");
        return Ok(());
    }
    let (lo, hi) = (settings.gamma_range.0 * unit, settings.gamma_range.1 * unit);
    let exact = Setup { gamma: GammaSpec::Integral, t_final: hi, ..setup.clone() }.schedule()?.0;
    let c0 = match setup.gamma {
        GammaSpec::Interp { c0 } => c0,
        GammaSpec::Integral => C0::Calibrate,
    };
    let interp = Setup { gamma: GammaSpec::Interp { c0 }, ..setup.clone() }.schedule()?.0;
    let exact = tabulate(&exact, lo, hi, settings.gamma_points)?;
    let interp = tabulate(&interp, lo, hi, settings.gamma_points)?;
    let mut csv = String::from("t,gamma_exact,gamma_interp\n");
    for ((t, g), (_, gi)) in exact.iter().zip(&interp) {
        csv.push_str(&format!("{t:.12e},{g:.12e},{gi:.12e}\n"));
    }
    out.write("gamma.csv", &csv)?;
    out.chart("gamma.svg", || {
        line_chart(
            "Coupling",
            "t",
            "gamma",
            &[Series::new("exact", exact.clone()), Series::new("interpolated", interp.clone())],
            Axes { log_x: true, log_y: true },
        )
    })
}

pub fn compare(settings: &Settings, dir: &Path) -> Result<Report, CommandError> {
    let out = Output { dir, svg: settings.emit_svg };
    let cmp = compare_runs(&settings.setup, |_, _, _| Ok(()))?;
    out.write("compare.csv", &cmp.to_csv())?;
    let (logse, jzme) = (cmp.logse_series(), cmp.jzme_series());
    out.write("series.csv", &logse.to_csv())?;
    out.write("series_jzme.csv", &jzme.to_csv())?;
    out.chart("width.svg", || {
        let relative = |s: &ObservableSeries| -> Vec<(f64, f64)> {
            let w0 = s.records.first().map(|r| r.width).unwrap_or(1.0);
            s.records.iter().map(|r| (r.t, r.width / w0)).collect()
        };
        line_chart(
            "Width relative to initial width",
            "t",
            "w / w(0)",
            &[Series::new("LogSE", relative(&logse)), Series::new("JZME", relative(&jzme))],
            Axes { log_x: true, log_y: true },
        )
    })?;
    out.chart("error.svg", || {
        let err: Vec<(f64, f64)> = cmp.records.iter().map(|r| (r.t, r.rel_l2_error)).collect();
        line_chart("Relative L2 error", "t", "Err", &[Series::new("Err", err)], Axes { log_x: false, log_y: true })
    })?;
    if let Some(k) = cmp.kink_time {
        info!("width kink at t = {k}");
    }
    let result = json!({
        "c0": cmp.c0,
        "records": cmp.records.len(),
        "kink_time": cmp.kink_time,
        "first_zero_time": cmp.first_zero_time,
        "error_rise_time": cmp.error_rise_time,
        "max_hermiticity_error": cmp.max_hermiticity_error,
    });
    Ok(Report {
        breakdown: cmp.logse_breakdown,
        result: json!({ "compare": result, "breakdown": breakdown_json(cmp.logse_breakdown) }),
    })
}

pub fn breakdown_scan_cmd(settings: &Settings, dir: &Path, threads: usize) -> Result<Report, CommandError> {
    let out = Output { dir, svg: settings.emit_svg };
    info!("scanning {} domain lengths on {threads} thread(s)", settings.scan_lengths.len());
    let rows = breakdown_scan(&settings.setup, &settings.scan_lengths, settings.scan_t_max, threads)?;
    out.write("scan.csv", &scan_csv(&rows))?;
    out.chart("scan.svg", || {
        let pts = rows.iter().filter_map(|r| r.t_breakdown.map(|t| (r.length, t))).collect();
        line_chart("Breakdown time", "L", "t_breakdown", &[Series::new("LogSE", pts)], Axes { log_x: true, log_y: false })
    })?;
    Ok(Report { breakdown: None, result: json!({ "scan": rows, "t_max": settings.scan_t_max }) })
}

pub fn reg_sweep(settings: &Settings, dir: &Path) -> Result<Report, CommandError> {
    let out = Output { dir, svg: settings.emit_svg };
    let rows = regularization_sweep(&settings.sweep_schemes, &settings.sweep_sigmas, settings.sweep_samples)?;
    out.write("sweep.csv", &sweep_csv(&rows))?;
    out.chart("sweep.svg", || {
        let lines: Vec<Series> = settings
            .sweep_schemes
            .iter()
            .map(|s| {
                let pts = rows.iter().filter(|r| r.scheme == s.name()).map(|r| (r.sigma, r.err)).collect();
                Series::new(s.name(), pts)
            })
            .collect();
        line_chart("Distance from ln on (0, 1]", "sigma", "Err", &lines, Axes { log_x: false, log_y: true })
    })?;
    Ok(Report { breakdown: None, result: json!({ "rows": rows.len() }) })
}

pub fn zero_pinning(settings: &Settings, dir: &Path) -> Result<Report, CommandError> {
    let out = Output { dir, svg: settings.emit_svg };
    let outcome = experiments::zero_pinning(&settings.setup, settings.pinning_horizon)?;
    out.write("pinning.csv", &report_csv(&outcome.reports))?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    let mut vis = String::from("t,visibility_logse,visibility_jzme\n");
    for (t, l, j) in &outcome.visibility {
        vis.push_str(&format!("{t},{},{}\n", fmt(*l), fmt(*j)));
    }
    out.write("visibility.csv", &vis)?;
    out.chart("visibility.svg", || {
        let pick = |f: fn(&VisibilityRow) -> Option<f64>| -> Vec<(f64, f64)> {
            outcome.visibility.iter().filter_map(|v| f(v).map(|x| (v.0, x))).collect()
        };
        line_chart(
            "Central fringe visibility",
            "t",
            "V",
            &[Series::new("LogSE", pick(|v| v.1)), Series::new("JZME", pick(|v| v.2))],
            Axes::default(),
        )
    })?;
    if outcome.zero_time.is_none() {
        info!("no zeros formed before the horizon; the report is vacuous");
    }
    let result = json!({
        "zero_time": outcome.zero_time,
        "zeros": outcome.reports.len(),
        "all_pass": outcome.all_pass(),
        "refill": outcome.refill,
    });
    Ok(Report { breakdown: None, result: json!({ "pinning": result }) })
}
