//! Diagnostics recorded along a propagation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dft_forward, Grid1D};
use crate::jzme::DensityState;
use crate::states::WaveState;
use crate::Complex64;

/// Default intensity threshold for [`find_zeros`].
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Standard deviation of a (not necessarily normalized) position distribution.
pub fn ensemble_width(p: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check_len(p.len())?;
    let total: f64 = p.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let x = grid.x();
    let mean = p.iter().zip(x).map(|(p, x)| p * x).sum::<f64>() / total;
    let var = p.iter().zip(x).map(|(p, x)| p * (x - mean).powi(2)).sum::<f64>() / total;
    Ok(var.max(0.0).sqrt())
}

/// `⟨x²⟩ - ⟨x⟩²`, the squared width.
pub fn position_variance(p: &[f64], grid: &Grid1D) -> Result<f64> {
    ensemble_width(p, grid).map(|w| w * w)
}

/// Standard deviation of `y = x - x'` under the weight `Σ_z |ρ|` taken along
/// lines of constant `y`.
pub fn coherence_length(rho: &DensityState) -> Result<f64> {
    let n = rho.grid.len();
    let dx = rho.grid.dx();
    // Bin d = j - l + (n - 1) holds y = (j - l) dx.
    let mut weight = vec![0.0; 2 * n - 1];
    for j in 0..n {
        let row = &rho.rho[j * n..(j + 1) * n];
        for (l, v) in row.iter().enumerate() {
            weight[j + n - 1 - l] += v.norm();
        }
    }
    let total: f64 = weight.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let y = |d: usize| (d as f64 - (n - 1) as f64) * dx;
    let mean = weight.iter().enumerate().map(|(d, w)| w * y(d)).sum::<f64>() / total;
    let var = weight.iter().enumerate().map(|(d, w)| w * (y(d) - mean).powi(2)).sum::<f64>() / total;
    Ok(var.sqrt())
}

/// `⟨p²⟩ / 2m` of a wavefunction, normalized by its current norm.
pub fn kinetic_energy(state: &WaveState, hbar: f64, mass: f64) -> Result<f64> {
    let spec = dft_forward(&state.amplitudes);
    let k = state.grid.k();
    let num: f64 = spec.iter().zip(k).map(|(s, k)| k * k * s.norm_sqr()).sum();
    let den: f64 = spec.iter().map(|s| s.norm_sqr()).sum();
    if !(den.is_finite() && den > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(hbar * hbar / (2.0 * mass) * num / den)
}

/// `Tr(p²ρ) / (2m Tr ρ)`.
///
/// The momentum distribution is the transform of the sums of `ρ` along
/// lines of constant `x - x'`, which avoids a full 2-D transform.
pub fn density_kinetic_energy(rho: &DensityState, hbar: f64, mass: f64) -> Result<f64> {
    let n = rho.grid.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let row = &rho.rho[j * n..(j + 1) * n];
        for (l, v) in row.iter().enumerate() {
            c[(j + n - l) % n] += v;
        }
    }
    let spec = dft_forward(&c);
    let k = rho.grid.k();
    let num: f64 = spec.iter().zip(k).map(|(s, k)| k * k * s.re).sum();
    let den: f64 = spec.iter().map(|s| s.re).sum();
    if !(den.is_finite() && den > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(hbar * hbar / (2.0 * mass) * num / den)
}

/// Largest `(max - min)/(max + min)` over adjacent local extrema of `p`
/// inside `window`. `None` when the window holds fewer than two extrema.
pub fn fringe_visibility(p: &[f64], grid: &Grid1D, window: (f64, f64)) -> Result<Option<f64>> {
    grid.check_len(p.len())?;
    let x = grid.x();
    let inside: Vec<usize> = (1..p.len() - 1).filter(|&i| x[i] >= window.0 && x[i] <= window.1).collect();
    let mut extrema: Vec<f64> = Vec::new();
    let mut last: Option<bool> = None;
    for &i in &inside {
        let (l, c, r) = (p[i - 1], p[i], p[i + 1]);
        let kind = if c > l && c >= r {
            Some(true)
        } else if c < l && c <= r {
            Some(false)
        } else {
            None
        };
        if let Some(is_max) = kind {
            // Keep the alternation max/min even on noisy plateaus.
            if last == Some(is_max) {
                let prev = extrema.last_mut().expect("extremum recorded");
                *prev = if is_max { prev.max(c) } else { prev.min(c) };
            } else {
                extrema.push(c);
                last = Some(is_max);
            }
        }
    }
    let best = extrema
        .windows(2)
        .map(|w| {
            let (hi, lo) = if w[0] > w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            if hi + lo > 0.0 {
                (hi - lo) / (hi + lo)
            } else {
                0.0
            }
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(best)
}

/// Local minima of `p` below `tol`, refined by a parabola through the
/// neighbouring samples. Neighbours wrap periodically.
///
/// A zero must be resolved on the grid: at least one neighbour has to reach
/// `tol`. This keeps numerically empty tails, where every sample is below
/// `tol`, from being reported.
pub fn find_zeros_of(p: &[f64], grid: &Grid1D, tol: f64) -> Result<Vec<f64>> {
    grid.check_len(p.len())?;
    let n = p.len();
    let x = grid.x();
    let dx = grid.dx();
    let mut zeros = Vec::new();
    for i in 0..n {
        let (l, c, r) = (p[(i + n - 1) % n], p[i], p[(i + 1) % n]);
        if c < tol && c < l && c <= r && l.max(r) >= tol {
            let curv = l - 2.0 * c + r;
            let shift = if curv > 0.0 { (0.5 * (l - r) / curv).clamp(-0.5, 0.5) } else { 0.0 };
            zeros.push(x[i] + shift * dx);
        }
    }
    Ok(zeros)
}

pub fn find_zeros(state: &WaveState, tol: f64) -> Result<Vec<f64>> {
    find_zeros_of(&state.intensity(), &state.grid, tol)
}

/// Relative distance between `ρ` and the pure state `a(x) a*(x')`, with the
/// Frobenius norm (the `dx²` weights cancel).
pub fn rel_l2_error(rho: &DensityState, a: &WaveState) -> Result<f64> {
    if rho.grid.len() != a.grid.len() || rho.grid.length() != a.grid.length() {
        return Err(Error::GridMismatch(format!(
            "density matrix on ({}, {}), wavefunction on ({}, {})",
            rho.grid.length(),
            rho.grid.len(),
            a.grid.length(),
            a.grid.len()
        )));
    }
    let n = a.grid.len();
    let amp = &a.amplitudes;
    let (mut diff, mut norm_rho) = (0.0, 0.0);
    for j in 0..n {
        let row = &rho.rho[j * n..(j + 1) * n];
        for (l, v) in row.iter().enumerate() {
            diff += (v - amp[j] * amp[l].conj()).norm_sqr();
            norm_rho += v.norm_sqr();
        }
    }
    // ‖a a*‖_F = Σ|a|².
    let norm_pure: f64 = amp.iter().map(|v| v.norm_sqr()).sum();
    let denom = (norm_rho.sqrt() * norm_pure).sqrt();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(diff.sqrt() / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub width: f64,
    pub coherence_length: Option<f64>,
    /// Norm of the wavefunction or trace of the density matrix.
    pub norm: f64,
    pub kinetic_energy: f64,
    pub visibility: Option<f64>,
    pub zeros: Option<Vec<f64>>,
    pub rel_l2_error: Option<f64>,
}

impl ObservableRecord {
    pub fn new(t: f64, width: f64, norm: f64, kinetic_energy: f64) -> Self {
        Self {
            t,
            width,
            coherence_length: None,
            norm,
            kinetic_energy,
            visibility: None,
            zeros: None,
            rel_l2_error: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub records: Vec<ObservableRecord>,
}

pub const SERIES_HEADER: &str = "t,width,coherence_length,norm,kinetic_energy,visibility,rel_l2_error";

impl ObservableSeries {
    pub fn push(&mut self, record: ObservableRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(Error::InvalidParameter {
                    name: "t",
                    reason: format!("records must be strictly increasing in time ({} after {})", record.t, last.t),
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.width).collect()
    }

    pub fn last(&self) -> Option<&ObservableRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.12e},{},{:.12e},{:.12e},{},{}\n",
                r.t,
                r.width,
                opt(r.coherence_length),
                r.norm,
                r.kinetic_energy,
                opt(r.visibility),
                opt(r.rel_l2_error)
            ));
        }
        out
    }
}
