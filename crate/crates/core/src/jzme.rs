//! Strang-split propagator for the Joos-Zeh master equation
//!
//! ```text
//! ∂ρ/∂t = (iħ/2m)(∂²/∂x² - ∂²/∂x'²) ρ - (Λ/ħ)(x - x')² ρ
//! ```
//!
//! on the square grid `ρ[j * N + l] = ρ(x_j, x'_l)`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};
use crate::grid::{Grid1D, Spectral2D};
use crate::observables::{
    coherence_length, density_kinetic_energy, ensemble_width, fringe_visibility, ObservableRecord,
};
use crate::propagation::Propagator;
use crate::states::WaveState;
use crate::Complex64;

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DensityState {
    pub grid: Arc<Grid1D>,
    pub rho: Vec<Complex64>,
    pub t: f64,
}

impl DensityState {
    pub fn new(grid: Arc<Grid1D>, rho: Vec<Complex64>, t: f64) -> Result<Self> {
        let n = grid.len();
        if rho.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: rho.len() });
        }
        Ok(Self { grid, rho, t })
    }

    /// `ρ(x, x') = a(x) a*(x')`.
    pub fn from_wavefunction(a: &WaveState) -> Self {
        let amp = &a.amplitudes;
        let rho = amp.iter().flat_map(|aj| amp.iter().map(move |al| aj * al.conj())).collect();
        Self { grid: a.grid.clone(), rho, t: a.t }
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn at(&self, j: usize, l: usize) -> Complex64 {
        self.rho[j * self.size() + l]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|j| self.at(j, j).re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() * self.grid.dx()
    }

    /// `max |ρ(x, x') - ρ*(x', x)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for l in j..n {
                worst = worst.max((self.at(j, l) - self.at(l, j).conj()).norm());
            }
        }
        worst
    }

    /// Most negative diagonal entry (zero if none).
    pub fn diagonal_negativity(&self) -> f64 {
        self.diagonal().iter().fold(0.0f64, |m, &v| m.min(v))
    }

    /// `Tr ρ²` by double quadrature.
    pub fn purity(&self) -> f64 {
        let dx = self.grid.dx();
        self.rho.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// Little-endian `(re, im)` pairs of `f64` in row-major order, plus a JSON
    /// sidecar with `N`, `L` and `t` next to it.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for v in &self.rho {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        let meta = DumpMeta { n: self.size(), l: self.grid.length(), t: self.t };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let meta: DumpMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let bytes = fs::read(path)?;
        if bytes.len() != meta.n * meta.n * 16 {
            return Err(Error::LengthMismatch { expected: meta.n * meta.n * 16, got: bytes.len() });
        }
        let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let rho = bytes.chunks_exact(16).map(|c| Complex64::new(word(&c[..8]), word(&c[8..]))).collect();
        Self::new(Arc::new(Grid1D::new(meta.l, meta.n)?), rho, meta.t)
    }

    /// Diagonal CSV `x,rho_diag`.
    pub fn diagonal_csv(&self) -> String {
        let mut out = String::from("x,rho_diag\n");
        for (x, d) in self.grid.x().iter().zip(self.diagonal()) {
            out.push_str(&format!("{x},{d:.12e}\n"));
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpMeta {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    t: f64,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JzmeConfig {
    pub dt: f64,
    pub lambda: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl JzmeConfig {
    pub fn new(dt: f64, lambda: f64) -> Self {
        Self { dt, lambda, hbar: 1.0, mass: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        non_negative("lambda", self.lambda)?;
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        Ok(())
    }
}

pub struct JzmePropagator {
    config: JzmeConfig,
    grid: Arc<Grid1D>,
    fft: Spectral2D,
    half_kinetic: Vec<Complex64>,
    /// `exp(-(Λ/ħ)((j - l) dx)² dt)` indexed by `j - l + N - 1`.
    decay: Vec<f64>,
    pub visibility_window: Option<(f64, f64)>,
    /// Largest Hermiticity defect seen at any record.
    pub max_hermiticity_error: f64,
}

impl JzmePropagator {
    pub fn new(config: JzmeConfig, grid: Arc<Grid1D>) -> Result<Self> {
        config.validate()?;
        let n = grid.len();
        let coef = config.hbar / (2.0 * config.mass) * config.dt / 2.0;
        let half_kinetic = grid.k().iter().map(|k| Complex64::from_polar(1.0, -coef * k * k)).collect();
        let rate = config.lambda / config.hbar * config.dt;
        let dx = grid.dx();
        let decay = (0..2 * n - 1)
            .map(|d| {
                let y = (d as f64 - (n - 1) as f64) * dx;
                (-rate * y * y).exp()
            })
            .collect();
        Ok(Self {
            config,
            fft: Spectral2D::new(n),
            grid,
            half_kinetic,
            decay,
            visibility_window: None,
            max_hermiticity_error: 0.0,
        })
    }

    pub fn config(&self) -> &JzmeConfig {
        &self.config
    }

    /// Multiplies the 2-D spectrum by `exp(-i (ħ/2m)(k² - k'²) dt/2)`.
    pub fn kinetic_half_step(&mut self, state: &mut DensityState) -> Result<()> {
        let n = self.grid.len();
        if state.size() != n {
            return Err(Error::LengthMismatch { expected: n, got: state.size() });
        }
        self.fft.forward_transposed(&mut state.rho);
        // Transposed layout: (k_j, k'_l) at l * N + j.
        for (l, row) in state.rho.chunks_exact_mut(n).enumerate() {
            let right = self.half_kinetic[l].conj();
            for (v, left) in row.iter_mut().zip(&self.half_kinetic) {
                *v *= left * right;
            }
        }
        self.fft.inverse_transposed(&mut state.rho);
        Ok(())
    }

    /// `ρ ← ρ exp(-(Λ/ħ)(x - x')² dt)`.
    pub fn decoherence_step(&self, state: &mut DensityState) {
        let n = self.grid.len();
        for (j, row) in state.rho.chunks_exact_mut(n).enumerate() {
            let base = &self.decay[j..j + n];
            // decay index j - l + n - 1 runs backwards along the row.
            for (v, d) in row.iter_mut().zip(base.iter().rev()) {
                *v *= d;
            }
        }
    }

    pub fn strang_step(&mut self, state: &mut DensityState) -> Result<()> {
        self.kinetic_half_step(state)?;
        self.decoherence_step(state);
        self.kinetic_half_step(state)?;
        state.t += self.config.dt;
        if state.rho.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("density matrix after t = {}", state.t)));
        }
        Ok(())
    }
}

impl Propagator for JzmePropagator {
    type State = DensityState;

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn time(state: &DensityState) -> f64 {
        state.t
    }

    fn set_time(state: &mut DensityState, t: f64) {
        state.t = t;
    }

    fn step(&mut self, state: &mut DensityState) -> Result<()> {
        self.strang_step(state)
    }

    fn observe(&mut self, state: &DensityState) -> Result<ObservableRecord> {
        let herm = state.hermiticity_error();
        self.max_hermiticity_error = self.max_hermiticity_error.max(herm);
        if herm > HERMITICITY_TOLERANCE {
            warn!("density matrix Hermiticity defect {herm:.3e} at t = {}", state.t);
        }
        let diag = state.diagonal();
        let width = ensemble_width(&diag, &self.grid).unwrap_or(f64::NAN);
        let ke = density_kinetic_energy(state, self.config.hbar, self.config.mass).unwrap_or(f64::NAN);
        let mut rec = ObservableRecord::new(state.t, width, state.trace(), ke);
        rec.coherence_length = coherence_length(state).ok();
        if let Some(win) = self.visibility_window {
            rec.visibility = fringe_visibility(&diag, &self.grid, win)?;
        }
        Ok(rec)
    }
}
