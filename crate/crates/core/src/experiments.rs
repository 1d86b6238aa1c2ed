//! Experiment drivers built from the propagators: single runs, lockstep
//! LogSE/JZME comparisons, breakdown scans and zero-pinning probes, plus the
//! curve analyses used on their output.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::coupling::{characteristic_time, fit_c0_from_history, CouplingSchedule};
use crate::error::{non_negative, positive, Error, Result};
use crate::grid::Grid1D;
use crate::jzme::{DensityState, JzmeConfig, JzmePropagator};
use crate::logse::{LogSeConfig, LogSePropagator};
use crate::moments::{second_moment_history, MomentParams};
use crate::observables::{find_zeros, rel_l2_error, ObservableRecord, ObservableSeries, ZERO_TOLERANCE};
use crate::pinning::{self, linear_fit, Frame, RefillFit, ZeroReport};
use crate::propagation::{propagate, Breakdown, BreakdownReason, BreakdownRule, Propagator, RunOptions, RunOutcome};
use crate::reglog::RegLog;
use crate::states::{self, Parity, WaveState};

/// Long-time window, in units of `t_b`, over which `c₀` is calibrated.
pub const CALIBRATION_WINDOW: (f64, f64) = (5.0, 10.0);
/// Moment-oracle step, in units of `t_b`.
pub const ORACLE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Gaussian { b: f64, x0: f64 },
    Lorentzian { b: f64 },
    Sech { b: f64 },
    TwinGaussian { b: f64, s: f64, parity: Parity },
}

impl InitialCondition {
    pub fn build(&self, grid: Arc<Grid1D>) -> Result<WaveState> {
        match *self {
            InitialCondition::Gaussian { b, x0 } => states::gaussian(grid, b, x0),
            InitialCondition::Lorentzian { b } => states::lorentzian(grid, b),
            InitialCondition::Sech { b } => states::sech(grid, b),
            InitialCondition::TwinGaussian { b, s, parity } => states::twin_gaussian_with_parity(grid, b, s, parity),
        }
    }

    pub fn width_parameter(&self) -> f64 {
        match *self {
            InitialCondition::Gaussian { b, .. }
            | InitialCondition::Lorentzian { b }
            | InitialCondition::Sech { b }
            | InitialCondition::TwinGaussian { b, .. } => b,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Gaussian { .. } => "gaussian",
            InitialCondition::Lorentzian { .. } => "lorentzian",
            InitialCondition::Sech { .. } => "sech",
            InitialCondition::TwinGaussian { .. } => "twin_gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Physics {
    pub lambda: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { lambda: 1.0, hbar: 1.0, mass: 1.0 }
    }
}

impl Physics {
    pub fn validate(&self) -> Result<()> {
        non_negative("physics.lambda", self.lambda)?;
        positive("physics.hbar", self.hbar)?;
        positive("physics.mass", self.mass)?;
        Ok(())
    }

    fn moments(&self) -> MomentParams {
        MomentParams { lambda: self.lambda, hbar: self.hbar, mass: self.mass }
    }

    /// `t_b` for width `b`, or the free spreading time `m b²/ħ` when `Λ = 0`.
    pub fn time_unit(&self, b: f64) -> Result<f64> {
        if self.lambda > 0.0 {
            characteristic_time(self.lambda, b, self.hbar)
        } else {
            positive("b", b)?;
            Ok(self.mass * b * b / self.hbar)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum C0 {
    Fixed(f64),
    /// Fit against the Gaussian moment oracle.
    Calibrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GammaSpec {
    Interp { c0: C0 },
    /// `γ` from the oracle's second-moment history.
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Logse,
    Jzme,
    Both,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setup {
    pub length: f64,
    pub points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
    pub ic: InitialCondition,
    pub physics: Physics,
    pub gamma: GammaSpec,
    pub reglog: RegLog,
    /// Lag of the kinetic-energy breakdown rule; `None` means two time units.
    pub breakdown_window: Option<f64>,
    pub breakdown_factor: f64,
    pub visibility_window: Option<(f64, f64)>,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            length: 30.0,
            points: 2048,
            dt: 0.05,
            t_final: 4.0,
            record_every: 10,
            ic: InitialCondition::Gaussian { b: 1.0, x0: 0.0 },
            physics: Physics::default(),
            gamma: GammaSpec::Interp { c0: C0::Fixed(0.0) },
            reglog: RegLog::default(),
            breakdown_window: None,
            breakdown_factor: BreakdownRule::DEFAULT_FACTOR,
            visibility_window: None,
        }
    }
}

impl Setup {
    pub fn grid(&self) -> Result<Arc<Grid1D>> {
        Ok(Arc::new(Grid1D::new(self.length, self.points)?))
    }

    pub fn time_unit(&self) -> Result<f64> {
        self.physics.time_unit(self.ic.width_parameter())
    }

    pub fn validate(&self) -> Result<()> {
        Grid1D::new(self.length, self.points)?;
        positive("time.dt", self.dt)?;
        non_negative("time.t_final", self.t_final)?;
        if self.record_every == 0 {
            return Err(Error::InvalidParameter { name: "time.record_every", reason: "must be at least 1".into() });
        }
        self.physics.validate()?;
        self.reglog.validate()?;
        if let Some(w) = self.breakdown_window {
            positive("breakdown.window", w)?;
        }
        BreakdownRule::new(1.0, self.breakdown_factor)?;
        if let GammaSpec::Interp { c0: C0::Fixed(c0) } = self.gamma {
            if !c0.is_finite() {
                return Err(Error::InvalidParameter { name: "gamma.c0", reason: "must be finite".into() });
            }
        }
        self.ic.build(self.grid()?).map(|_| ())
    }

    /// The coupling schedule and, for the interpolated form, the `c₀` used.
    pub fn schedule(&self) -> Result<(CouplingSchedule, Option<f64>)> {
        let p = self.physics;
        if p.lambda == 0.0 {
            return Ok((CouplingSchedule::Zero, None));
        }
        let b = self.ic.width_parameter();
        let t_b = characteristic_time(p.lambda, b, p.hbar)?;
        match self.gamma {
            GammaSpec::Interp { c0 } => {
                let c0 = match c0 {
                    C0::Fixed(v) => v,
                    C0::Calibrate => calibrate_c0(&p, b)?,
                };
                Ok((CouplingSchedule::InterpLinear { lambda: p.lambda, c0, t_b }, Some(c0)))
            }
            GammaSpec::Integral => {
                let horizon = self.t_final + 2.0 * self.dt;
                let history = second_moment_history(b, horizon, ORACLE_STEP * t_b, &p.moments())?;
                Ok((CouplingSchedule::IntegralOfWidth { lambda: p.lambda, hbar: p.hbar, history }, None))
            }
        }
    }

    pub fn breakdown_rule(&self) -> Result<BreakdownRule> {
        let window = match self.breakdown_window {
            Some(w) => w,
            None => 2.0 * self.time_unit()?,
        };
        BreakdownRule::new(window, self.breakdown_factor)
    }

    pub fn logse(&self, schedule: CouplingSchedule) -> Result<(LogSePropagator, WaveState)> {
        let grid = self.grid()?;
        let config = LogSeConfig {
            dt: self.dt,
            scheme: self.reglog,
            schedule,
            hbar: self.physics.hbar,
            mass: self.physics.mass,
        };
        let mut prop = LogSePropagator::new(config, grid.clone())?;
        prop.visibility_window = self.visibility_window;
        Ok((prop, self.ic.build(grid)?))
    }

    pub fn jzme(&self) -> Result<(JzmePropagator, DensityState)> {
        let grid = self.grid()?;
        let config = JzmeConfig { dt: self.dt, lambda: self.physics.lambda, hbar: self.physics.hbar, mass: self.physics.mass };
        let mut prop = JzmePropagator::new(config, grid.clone())?;
        prop.visibility_window = self.visibility_window;
        let a = self.ic.build(grid)?;
        Ok((prop, DensityState::from_wavefunction(&a)))
    }
}

/// Intercept `c₀` of the long-time coupling `c₀ + Λt/2` for a Gaussian of width `b`.
pub fn calibrate_c0(physics: &Physics, b: f64) -> Result<f64> {
    let t_b = characteristic_time(physics.lambda, b, physics.hbar)?;
    let window = (CALIBRATION_WINDOW.0 * t_b, CALIBRATION_WINDOW.1 * t_b);
    let history = second_moment_history(b, window.1, ORACLE_STEP * t_b, &physics.moments())?;
    fit_c0_from_history(&history, physics.lambda, physics.hbar, window, t_b)
}

pub fn run_logse<H>(setup: &Setup, hook: H) -> Result<(RunOutcome, Option<f64>)>
where
    H: FnMut(&WaveState, &ObservableRecord) -> Result<()>,
{
    setup.validate()?;
    let (schedule, c0) = setup.schedule()?;
    let (mut prop, mut state) = setup.logse(schedule)?;
    let options = RunOptions::new(setup.t_final, setup.record_every).with_breakdown(setup.breakdown_rule()?, true);
    Ok((propagate(&mut prop, &mut state, &options, hook)?, c0))
}

pub fn run_jzme<H>(setup: &Setup, hook: H) -> Result<(RunOutcome, f64)>
where
    H: FnMut(&DensityState, &ObservableRecord) -> Result<()>,
{
    setup.validate()?;
    let (mut prop, mut state) = setup.jzme()?;
    let options = RunOptions::new(setup.t_final, setup.record_every);
    let outcome = propagate(&mut prop, &mut state, &options, hook)?;
    Ok((outcome, prop.max_hermiticity_error))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRecord {
    pub t: f64,
    pub logse: ObservableRecord,
    pub jzme: ObservableRecord,
    pub rel_l2_error: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Comparison {
    pub records: Vec<CompareRecord>,
    pub c0: Option<f64>,
    pub logse_breakdown: Option<Breakdown>,
    /// Local minimum of `d ln w / d ln t` for the LogSE width.
    pub kink_time: Option<f64>,
    /// First record at which the LogSE intensity has a zero.
    pub first_zero_time: Option<f64>,
    /// Steepest growth of `ln Err`, searched from one time unit on.
    pub error_rise_time: Option<f64>,
    pub max_hermiticity_error: f64,
}

pub const COMPARE_HEADER: &str = "t,width_logse,width_jzme,rel_l2_error";

impl Comparison {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rel_l2_error).collect()
    }

    pub fn logse_series(&self) -> ObservableSeries {
        ObservableSeries {
            records: self
                .records
                .iter()
                .map(|r| ObservableRecord { rel_l2_error: Some(r.rel_l2_error), ..r.logse.clone() })
                .collect(),
        }
    }

    pub fn jzme_series(&self) -> ObservableSeries {
        ObservableSeries {
            records: self
                .records
                .iter()
                .map(|r| ObservableRecord { rel_l2_error: Some(r.rel_l2_error), ..r.jzme.clone() })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", r.t, r.logse.width, r.jzme.width, r.rel_l2_error));
        }
        out
    }
}

/// Runs both formalisms in lockstep on the same grid, recording width, error
/// and the other observables at the shared cadence. The LogSE breakdown is
/// recorded but does not stop the run unless the state becomes non-finite.
pub fn compare<H>(setup: &Setup, mut hook: H) -> Result<Comparison>
where
    H: FnMut(&WaveState, &DensityState, &CompareRecord) -> Result<()>,
{
    setup.validate()?;
    let (schedule, c0) = setup.schedule()?;
    let (mut lp, mut a) = setup.logse(schedule)?;
    let (mut jp, mut rho) = setup.jzme()?;
    if lp.grid() != &rho.grid {
        return Err(Error::GridMismatch("LogSE and JZME grids differ".into()));
    }
    let rule = setup.breakdown_rule()?;
    let unit = setup.time_unit()?;
    let steps = (setup.t_final / setup.dt).round() as usize;
    let mut out = Comparison { c0, ..Default::default() };
    if steps == 0 {
        return Ok(out);
    }
    let mut ke = Vec::new();
    let mut record = |lp: &mut LogSePropagator,
                      jp: &mut JzmePropagator,
                      a: &WaveState,
                      rho: &DensityState,
                      out: &mut Comparison|
     -> Result<()> {
        let rec = CompareRecord {
            t: a.t,
            logse: lp.observe(a)?,
            jzme: jp.observe(rho)?,
            rel_l2_error: rel_l2_error(rho, a)?,
        };
        ke.push((rec.t, rec.logse.kinetic_energy));
        if out.logse_breakdown.is_none() && rule.triggered(&ke) {
            out.logse_breakdown = Some(Breakdown { t: rec.t, reason: BreakdownReason::KineticEnergyJump });
        }
        if out.first_zero_time.is_none() && !find_zeros(a, ZERO_TOLERANCE)?.is_empty() {
            out.first_zero_time = Some(rec.t);
        }
        hook(a, rho, &rec)?;
        out.records.push(rec);
        Ok(())
    };
    record(&mut lp, &mut jp, &a, &rho, &mut out)?;
    for n in 1..=steps {
        let t = n as f64 * setup.dt;
        match lp.strang_step(&mut a) {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => {
                out.logse_breakdown = Some(Breakdown { t, reason: BreakdownReason::NonFinite });
                break;
            }
            Err(e) => return Err(e),
        }
        jp.strang_step(&mut rho)?;
        a.t = t;
        rho.t = t;
        if n % setup.record_every == 0 || n == steps {
            record(&mut lp, &mut jp, &a, &rho, &mut out)?;
        }
    }
    let times = out.times();
    out.kink_time = detect_kink(&times, &out.records.iter().map(|r| r.logse.width).collect::<Vec<_>>());
    out.error_rise_time = error_rise_time(&times, &out.errors(), unit);
    out.max_hermiticity_error = jp.max_hermiticity_error;
    Ok(out)
}

/// Depth a local minimum of the log-slope needs below the maxima on both
/// sides to count as a kink rather than rounding noise.
pub const KINK_PROMINENCE: f64 = 1e-3;

/// First interior local minimum of `d ln w / d ln t` (records with `t > 0`)
/// with at least [`KINK_PROMINENCE`] depth.
pub fn detect_kink(times: &[f64], widths: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(widths)
        .filter(|(t, w)| **t > 0.0 && **w > 0.0)
        .map(|(t, w)| (t.ln(), w.ln()))
        .collect();
    let slopes = centred_derivative(&pts);
    (1..slopes.len().saturating_sub(1))
        .find(|&i| {
            let left = slopes[..i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let right = slopes[i + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            slopes[i] < slopes[i - 1] && slopes[i] <= slopes[i + 1] && left.min(right) - slopes[i] >= KINK_PROMINENCE
        })
        .map(|i| pts[i].0.exp())
}

/// Time of the steepest growth of `ln Err` at or after `t_min`.
pub fn error_rise_time(times: &[f64], errors: &[f64], t_min: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    let rates = centred_derivative(&pts);
    (1..rates.len().saturating_sub(1))
        .filter(|&i| pts[i].0 >= t_min)
        .max_by(|&i, &j| rates[i].total_cmp(&rates[j]))
        .map(|i| pts[i].0)
}

fn centred_derivative(pts: &[(f64, f64)]) -> Vec<f64> {
    (0..pts.len())
        .map(|i| {
            let (l, r) = (i.saturating_sub(1), (i + 1).min(pts.len() - 1));
            if l == r {
                0.0
            } else {
                (pts[r].1 - pts[l].1) / (pts[r].0 - pts[l].0)
            }
        })
        .collect()
}

/// Least-squares slope of `ln v` against `ln t` over `window`.
pub fn log_log_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::WindowTooShort { got: pts.len(), need: 2 });
    }
    Ok(linear_fit(&pts).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub length: f64,
    pub points: usize,
    /// `None` when the run reached `t_max` without breaking down.
    pub t_breakdown: Option<f64>,
    pub reason: Option<BreakdownReason>,
}

pub const SCAN_HEADER: &str = "L,N,t_breakdown,censored";

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(SCAN_HEADER);
    out.push('\n');
    for r in rows {
        let t = r.t_breakdown.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.length, r.points, t, r.t_breakdown.is_none()));
    }
    out
}

/// LogSE breakdown time for each domain length, holding the grid density of
/// `base` fixed. Runs are spread over at most `threads` workers.
pub fn breakdown_scan(base: &Setup, lengths: &[f64], t_max: f64, threads: usize) -> Result<Vec<ScanRow>> {
    positive("t_max", t_max)?;
    if lengths.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidParameter { name: "scan.lengths", reason: "must be strictly increasing".into() });
    }
    let density = base.points as f64 / base.length;
    let setups: Vec<Setup> = lengths
        .iter()
        .map(|&length| {
            let points = 2 * ((0.5 * density * length).round() as usize).max(4);
            Setup { length, points, t_final: t_max, ..base.clone() }
        })
        .collect();
    for s in &setups {
        s.validate()?;
    }
    let results: Mutex<Vec<Option<Result<ScanRow>>>> = Mutex::new(setups.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, setups.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(setup) = setups.get(i) else { break };
                let row = run_logse(setup, |_, _| Ok(())).map(|(outcome, _)| ScanRow {
                    length: setup.length,
                    points: setup.points,
                    t_breakdown: outcome.breakdown.map(|b| b.t),
                    reason: outcome.breakdown.map(|b| b.reason),
                });
                results.lock().expect("unpoisoned")[i] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("unpoisoned")
        .into_iter()
        .map(|r| r.expect("every scan entry ran"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PinningOutcome {
    pub zero_time: Option<f64>,
    pub reports: Vec<ZeroReport>,
    /// Refill of the JZME diagonal at the first zero, if it was empty there.
    pub refill: Option<RefillFit>,
    pub visibility: Vec<(f64, Option<f64>, Option<f64>)>,
}

impl PinningOutcome {
    /// True when every zero passed (vacuously true without zeros).
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.verdict == pinning::Verdict::Pass)
    }
}

/// Window of the refill fit, in time units.
pub const REFILL_WINDOW: f64 = 0.1;

/// Runs the comparison to `horizon`, takes the LogSE zero set at the first
/// record that has zeros and follows it to the horizon. The JZME refill
/// exponent is measured from that record with a step of `1e-3` time units.
pub fn zero_pinning(setup: &Setup, horizon: f64) -> Result<PinningOutcome> {
    let mut frames = Vec::new();
    let mut zero_set: Option<(f64, Vec<f64>, DensityState)> = None;
    let run = Setup { t_final: horizon, ..setup.clone() };
    let cmp = compare(&run, |a, rho, rec| {
        if zero_set.is_none() {
            let zeros = find_zeros(a, ZERO_TOLERANCE)?;
            if !zeros.is_empty() {
                zero_set = Some((rec.t, zeros, rho.clone()));
            }
        }
        if zero_set.is_some() {
            frames.push(Frame { t: rec.t, intensity: a.intensity(), diagonal: rho.diagonal() });
        }
        Ok(())
    })?;
    let visibility = cmp.records.iter().map(|r| (r.t, r.logse.visibility, r.jzme.visibility)).collect();
    let Some((t0, zeros, rho0)) = zero_set else {
        return Ok(PinningOutcome { zero_time: None, reports: Vec::new(), refill: None, visibility });
    };
    let grid = run.grid()?;
    let reports = pinning::pinning_witness(&grid, &frames, &zeros, horizon)?;
    let x0 = zeros.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs())).expect("non-empty zero set");
    let j = grid.nearest_index(x0);
    let refill = if rho0.at(j, j).re.abs() < ZERO_TOLERANCE {
        let unit = run.time_unit()?;
        let config = JzmeConfig {
            dt: 1e-3 * unit,
            lambda: run.physics.lambda,
            hbar: run.physics.hbar,
            mass: run.physics.mass,
        };
        let mut prop = JzmePropagator::new(config, grid)?;
        let mut rho = rho0;
        let samples = pinning::measure_refill(&mut prop, &mut rho, x0, REFILL_WINDOW * unit)?;
        Some(pinning::refill_exponent(&samples)?)
    } else {
        None
    };
    Ok(PinningOutcome { zero_time: Some(t0), reports, refill, visibility })
}
