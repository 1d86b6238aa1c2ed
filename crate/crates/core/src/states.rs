//! Initial marginal wavefunctions.
//!
//! Every constructor samples the *shape* on the grid and then renormalizes by
//! grid quadrature, so `∫|a|² dx = 1` holds exactly on the discrete grid
//! regardless of the analytic prefactor.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};
use crate::grid::Grid1D;

/// Intensity above which the periodic boundary is considered contaminated.
pub const BOUNDARY_INTENSITY_LIMIT: f64 = 1e-12;

/// Marginal wavefunction `a(x, t)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub grid: Arc<Grid1D>,
    pub amplitudes: Vec<Complex64>,
    pub t: f64,
}

impl WaveState {
    pub fn new(grid: Arc<Grid1D>, amplitudes: Vec<Complex64>, t: f64) -> Result<Self> {
        grid.check_len(amplitudes.len())?;
        Ok(Self { grid, amplitudes, t })
    }

    /// Build from a real shape function and normalize on the grid.
    pub fn from_shape(grid: Arc<Grid1D>, shape: impl Fn(f64) -> f64) -> Result<Self> {
        let amplitudes = grid.x().iter().map(|&x| Complex64::new(shape(x), 0.0)).collect();
        let mut state = Self { grid, amplitudes, t: 0.0 };
        state.normalize()?;
        Ok(state)
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let scale = norm.sqrt().recip();
        self.amplitudes.iter_mut().for_each(|a| *a *= scale);
        Ok(())
    }

    /// Largest intensity among the two samples nearest the domain edges.
    pub fn boundary_intensity(&self) -> f64 {
        let n = self.amplitudes.len();
        self.amplitudes[0].norm_sqr().max(self.amplitudes[n - 1].norm_sqr())
    }

    pub fn mean_position(&self) -> f64 {
        let x = self.grid.x();
        let w: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        self.amplitudes.iter().zip(x).map(|(a, x)| a.norm_sqr() * x).sum::<f64>() / w
    }

    fn warn_on_boundary(&self, kind: &str) {
        let edge = self.boundary_intensity();
        if edge > BOUNDARY_INTENSITY_LIMIT {
            warn!(
                "{kind} initial state has boundary intensity {edge:.3e} > {BOUNDARY_INTENSITY_LIMIT:e}; \
                 expect wrap-around contamination"
            );
        }
    }
}

/// Relative sign of the two lobes of [`twin_gaussian_with_parity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `g(x - s) + g(x + s)`, the coherent superposition.
    #[default]
    Even,
    /// `g(x - s) - g(x + s)`, which carries an exact zero at the origin.
    Odd,
}

/// `a ∝ exp(-(x - x0)² / 4b²)`, so `|a|²` has standard deviation `b`.
pub fn gaussian(grid: Arc<Grid1D>, b: f64, x0: f64) -> Result<WaveState> {
    positive("b", b)?;
    let state = WaveState::from_shape(grid, |x| (-(x - x0).powi(2) / (4.0 * b * b)).exp())?;
    state.warn_on_boundary("gaussian");
    Ok(state)
}

/// `a ∝ 1 / (1 + (x/b)²)`; `b` is half the full width at half maximum of `a`.
pub fn lorentzian(grid: Arc<Grid1D>, b: f64) -> Result<WaveState> {
    positive("b", b)?;
    let state = WaveState::from_shape(grid, |x| 1.0 / (1.0 + (x / b).powi(2)))?;
    state.warn_on_boundary("lorentzian");
    Ok(state)
}

/// `a ∝ sech(x/b)`.
pub fn sech(grid: Arc<Grid1D>, b: f64) -> Result<WaveState> {
    positive("b", b)?;
    let state = WaveState::from_shape(grid, |x| (x / b).cosh().recip())?;
    state.warn_on_boundary("sech");
    Ok(state)
}

/// Coherent superposition of two Gaussians at `±s`.
pub fn twin_gaussian(grid: Arc<Grid1D>, b: f64, s: f64) -> Result<WaveState> {
    twin_gaussian_with_parity(grid, b, s, Parity::Even)
}

pub fn twin_gaussian_with_parity(grid: Arc<Grid1D>, b: f64, s: f64, parity: Parity) -> Result<WaveState> {
    positive("b", b)?;
    non_negative("s", s)?;
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let state = WaveState::from_shape(grid, |x| twin_shape(x, b, s, sign))?;
    state.warn_on_boundary("twin_gaussian");
    Ok(state)
}

/// Grid value of the twin-Gaussian normalization `N(b, s) = ∫ |shape|² dx`.
pub fn twin_gaussian_norm(grid: &Grid1D, b: f64, s: f64) -> Result<f64> {
    positive("b", b)?;
    non_negative("s", s)?;
    let dens: Vec<f64> = grid.x().iter().map(|&x| twin_shape(x, b, s, 1.0).powi(2)).collect();
    grid.quadrature_real(&dens)
}

fn twin_shape(x: f64, b: f64, s: f64, sign: f64) -> f64 {
    let w = 4.0 * b * b;
    (-(x - s).powi(2) / w).exp() + sign * (-(x + s).powi(2) / w).exp()
}
