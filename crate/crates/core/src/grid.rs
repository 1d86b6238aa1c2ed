//! Periodic 1-D grid, its Fourier-dual wavenumbers, quadrature, and the
//! discrete Fourier transforms shared by both propagators.
//!
//! Transform convention: the forward transform is unnormalized and the
//! inverse carries the `1/N`, so `inverse(forward(f)) == f` and the spectral
//! derivative of `f` is `inverse((i k)^n forward(f))`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid centered on the origin.
///
/// `x_j = -L/2 + j dx` for `j = 0..N`, and `k_j = 2π m_j / L` with the integer
/// frequencies in standard DFT order `0, 1, .., N/2-1, -N/2, .., -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    length: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
}

impl Grid1D {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if points < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 points, got {points}")));
        }
        if !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "point count must be even (Nyquist mode), got {points}"
            )));
        }
        let dx = length / points as f64;
        let x = (0..points).map(|j| -0.5 * length + j as f64 * dx).collect();
        let k = (0..points)
            .map(|j| 2.0 * PI * frequency_index(j, points) as f64 / length)
            .collect();
        Ok(Self { length, dx, x, k })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Index of the sample closest to `x`, with periodic wrapping.
    pub fn nearest_index(&self, x: f64) -> usize {
        let n = self.len() as isize;
        let j = ((x + 0.5 * self.length) / self.dx).round() as isize;
        j.rem_euclid(n) as usize
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.len(), got })
        }
    }

    /// Rectangle-rule integral `Σ f_j dx`, exact for band-limited periodic integrands.
    pub fn quadrature(&self, f: &[Complex64]) -> Result<Complex64> {
        self.check_len(f.len())?;
        Ok(f.iter().sum::<Complex64>() * self.dx)
    }

    pub fn quadrature_real(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(f.iter().sum::<f64>() * self.dx)
    }
}

/// Signed DFT frequency of bin `j` for an `n`-point transform.
pub fn frequency_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Planned forward/inverse transforms of a fixed length, with owned scratch.
pub struct Spectral1D {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl Spectral1D {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            scale: 1.0 / len as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-place forward transform of one or more consecutive blocks of `len()`.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = self.scale;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

pub fn dft_forward(f: &[Complex64]) -> Vec<Complex64> {
    let mut out = f.to_vec();
    if !out.is_empty() {
        Spectral1D::new(out.len()).forward(&mut out);
    }
    out
}

pub fn dft_inverse(f_hat: &[Complex64]) -> Vec<Complex64> {
    let mut out = f_hat.to_vec();
    if !out.is_empty() {
        Spectral1D::new(out.len()).inverse(&mut out);
    }
    out
}

/// `order`-th spectral derivative. For odd orders the Nyquist bin is dropped,
/// since its derivative is not representable on the grid.
pub fn spectral_derivative(grid: &Grid1D, f: &[Complex64], order: u32) -> Result<Vec<Complex64>> {
    grid.check_len(f.len())?;
    let n = grid.len();
    let mut spec = dft_forward(f);
    let ik = Complex64::new(0.0, 1.0);
    for (j, (s, &k)) in spec.iter_mut().zip(grid.k()).enumerate() {
        if order % 2 == 1 && j == n / 2 {
            *s = Complex64::new(0.0, 0.0);
        } else {
            *s *= (ik * k).powu(order);
        }
    }
    Ok(dft_inverse(&spec))
}

/// Square `N x N` transforms for the density matrix, stored row-major with the
/// row index on the first (unprimed) axis.
///
/// The forward transform leaves the spectrum *transposed*: element
/// `(k_j, k'_l)` sits at index `l * N + j`. [`Spectral2D::inverse_transposed`]
/// undoes exactly that layout, so callers only need to index the spectrum
/// consistently in between.
pub struct Spectral2D {
    rows: Spectral1D,
    n: usize,
    buffer: Vec<Complex64>,
}

impl Spectral2D {
    pub fn new(n: usize) -> Self {
        Self {
            rows: Spectral1D::new(n),
            n,
            buffer: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward_transposed(&mut self, data: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.n * self.n);
        self.rows.forward(data);
        self.transpose(data);
        self.rows.forward(data);
    }

    pub fn inverse_transposed(&mut self, data: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.n * self.n);
        self.rows.inverse(data);
        self.transpose(data);
        self.rows.inverse(data);
    }

    fn transpose(&mut self, data: &mut Vec<Complex64>) {
        const BLOCK: usize = 32;
        let n = self.n;
        let out = &mut self.buffer;
        for rb in (0..n).step_by(BLOCK) {
            for cb in (0..n).step_by(BLOCK) {
                for r in rb..(rb + BLOCK).min(n) {
                    for c in cb..(cb + BLOCK).min(n) {
                        out[c * n + r] = data[r * n + c];
                    }
                }
            }
        }
        std::mem::swap(data, out);
    }
}
