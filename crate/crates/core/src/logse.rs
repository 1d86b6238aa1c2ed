//! Strang-split propagator for the logarithmic Schrödinger equation
//!
//! ```text
//! i ∂a/∂t = -(ħ/2m) ∂²a/∂x² + (ħ γ(t)/m) a ln|a|²
//! ```
//!
//! Kinetic half-steps are diagonal in k-space; the nonlinear step is a pure
//! pointwise phase because `|a|` is invariant under its flow.

use std::sync::Arc;

use crate::coupling::CouplingSchedule;
use crate::error::{positive, Error, Result};
use crate::grid::{Grid1D, Spectral1D};
use crate::observables::{ensemble_width, fringe_visibility, kinetic_energy, ObservableRecord};
use crate::propagation::Propagator;
use crate::reglog::RegLog;
use crate::states::WaveState;
use crate::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct LogSeConfig {
    pub dt: f64,
    pub scheme: RegLog,
    pub schedule: CouplingSchedule,
    pub hbar: f64,
    pub mass: f64,
}

impl LogSeConfig {
    pub fn new(dt: f64, schedule: CouplingSchedule) -> Self {
        Self { dt, scheme: RegLog::default(), schedule, hbar: 1.0, mass: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        self.scheme.validate()
    }
}

pub struct LogSePropagator {
    config: LogSeConfig,
    grid: Arc<Grid1D>,
    fft: Spectral1D,
    half_kinetic: Vec<Complex64>,
    step_sign: f64,
    /// Window for the visibility column of recorded observables.
    pub visibility_window: Option<(f64, f64)>,
}

impl LogSePropagator {
    pub fn new(config: LogSeConfig, grid: Arc<Grid1D>) -> Result<Self> {
        config.validate()?;
        Ok(Self::build(config, grid, 1.0))
    }

    fn build(config: LogSeConfig, grid: Arc<Grid1D>, step_sign: f64) -> Self {
        let coef = config.hbar / (2.0 * config.mass) * step_sign * config.dt / 2.0;
        let half_kinetic = grid.k().iter().map(|k| Complex64::from_polar(1.0, -coef * k * k)).collect();
        Self { fft: Spectral1D::new(grid.len()), grid, config, half_kinetic, step_sign, visibility_window: None }
    }

    /// The same propagator stepping backwards in time.
    pub fn reversed(&self) -> Self {
        let mut p = Self::build(self.config.clone(), self.grid.clone(), -self.step_sign);
        p.visibility_window = self.visibility_window;
        p
    }

    pub fn config(&self) -> &LogSeConfig {
        &self.config
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    /// Multiplies the spectrum by `exp(-i (ħ/2m) k² dt/2)`.
    pub fn kinetic_half_step(&mut self, state: &mut WaveState) -> Result<()> {
        self.grid.check_len(state.amplitudes.len())?;
        self.fft.forward(&mut state.amplitudes);
        for (a, p) in state.amplitudes.iter_mut().zip(&self.half_kinetic) {
            *a *= p;
        }
        self.fft.inverse(&mut state.amplitudes);
        Ok(())
    }

    /// `a ← a exp(-i (ħ/m) Γ reg_ln|a|²)` with `Γ = ∫_{t0}^{t0+dt} γ`.
    pub fn nonlinear_step(&self, state: &mut WaveState, t0: f64, dt: f64) -> Result<()> {
        let gamma = self.config.schedule.integral(t0, dt)?;
        if gamma == 0.0 {
            return Ok(());
        }
        let coef = self.config.hbar / self.config.mass * gamma;
        let scheme = self.config.scheme;
        for a in state.amplitudes.iter_mut() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            *a *= Complex64::from_polar(1.0, -coef * scheme.value(p));
        }
        Ok(())
    }

    /// Half kinetic, full nonlinear, half kinetic.
    pub fn strang_step(&mut self, state: &mut WaveState) -> Result<()> {
        let dt = self.step_sign * self.config.dt;
        let t0 = state.t;
        self.kinetic_half_step(state)?;
        self.nonlinear_step(state, t0, dt)?;
        self.kinetic_half_step(state)?;
        state.t = t0 + dt;
        if let Some(j) = state.amplitudes.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::NonFinite(format!("amplitude at x = {} after t = {}", self.grid.x()[j], state.t)));
        }
        Ok(())
    }
}

impl Propagator for LogSePropagator {
    type State = WaveState;

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn time(state: &WaveState) -> f64 {
        state.t
    }

    fn set_time(state: &mut WaveState, t: f64) {
        state.t = t;
    }

    fn step(&mut self, state: &mut WaveState) -> Result<()> {
        self.strang_step(state)
    }

    fn observe(&mut self, state: &WaveState) -> Result<ObservableRecord> {
        let p = state.intensity();
        let width = ensemble_width(&p, &self.grid).unwrap_or(f64::NAN);
        let ke = kinetic_energy(state, self.config.hbar, self.config.mass).unwrap_or(f64::NAN);
        let mut rec = ObservableRecord::new(state.t, width, state.norm_sqr(), ke);
        if let Some(win) = self.visibility_window {
            rec.visibility = fringe_visibility(&p, &self.grid, win)?;
        }
        Ok(rec)
    }
}

/// Snapshot CSV `x,re_a,im_a,intensity`.
pub fn snapshot_csv(state: &WaveState) -> String {
    let mut out = String::from("x,re_a,im_a,intensity\n");
    for (x, a) in state.grid.x().iter().zip(&state.amplitudes) {
        out.push_str(&format!("{x},{:.12e},{:.12e},{:.12e}\n", a.re, a.im, a.norm_sqr()));
    }
    out
}
