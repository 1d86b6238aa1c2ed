//! Zero-pinning diagnostics: refill of density-matrix diagonal zeros under
//! the JZME against persistence of wavefunction zeros under the LogSE.

use serde::Serialize;

use crate::error::{positive, Error, Result};
use crate::grid::Grid1D;
use crate::jzme::{DensityState, JzmePropagator};

/// RMS log-residual above which a power-law fit is flagged.
pub const REFILL_RESIDUAL_LIMIT: f64 = 0.05;
/// LogSE intensity a pinned zero may not exceed.
pub const PINNED_INTENSITY: f64 = 1e-12;
/// JZME diagonal value a refilled zero must exceed.
pub const REFILLED_DIAGONAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefillFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of the fit in natural-log units.
    pub residual: f64,
    pub flagged: bool,
}

/// Least-squares slope of `ln ρ` against `ln τ` for samples `(τ, ρ)`.
pub fn refill_exponent(samples: &[(f64, f64)]) -> Result<RefillFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, v)| *t > 0.0 && *v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::WindowTooShort { got: pts.len(), need: 3 });
    }
    let (slope, intercept) = linear_fit(&pts);
    let residual = (pts.iter().map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(RefillFit { exponent: slope, prefactor: intercept.exp(), residual, flagged: residual > REFILL_RESIDUAL_LIMIT })
}

pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Steps `rho` for `window` and samples the diagonal at the grid point nearest
/// `x0` after every step, returning `(τ, ρ(x0, x0))`.
pub fn measure_refill(prop: &mut JzmePropagator, rho: &mut DensityState, x0: f64, window: f64) -> Result<Vec<(f64, f64)>> {
    positive("window", window)?;
    let j = rho.grid.nearest_index(x0);
    let t0 = rho.t;
    let steps = (window / prop.config().dt).round() as usize;
    let mut out = Vec::with_capacity(steps);
    for n in 1..=steps {
        prop.strang_step(rho)?;
        rho.t = t0 + n as f64 * prop.config().dt;
        out.push((rho.t - t0, rho.at(j, j).re));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// The zero could not be followed (lost, or fringes below 4 dx apart).
    Flagged,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Flagged => "FLAGGED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroReport {
    pub zero_id: usize,
    pub x0_initial: f64,
    pub max_intensity_logse: f64,
    pub max_rho_diag_jzme: f64,
    pub verdict: Verdict,
}

/// Matched recordings of both formalisms: `(t, |a|², ρ diagonal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub intensity: Vec<f64>,
    pub diagonal: Vec<f64>,
}

/// Follows each zero in `zero_set` through the frames up to `horizon` as the
/// nearest local minimum of the LogSE intensity, and compares both
/// formalisms at the tracked grid point.
pub fn pinning_witness(grid: &Grid1D, frames: &[Frame], zero_set: &[f64], horizon: f64) -> Result<Vec<ZeroReport>> {
    for f in frames {
        grid.check_len(f.intensity.len())?;
        grid.check_len(f.diagonal.len())?;
    }
    let dx = grid.dx();
    let mut sorted = zero_set.to_vec();
    sorted.sort_by(f64::total_cmp);
    let spacing = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let radius = if spacing.is_finite() { (0.5 * spacing).max(dx) } else { 10.0 * dx };
    let mut reports = Vec::with_capacity(zero_set.len());
    for (id, &x0) in zero_set.iter().enumerate() {
        let mut j = grid.nearest_index(x0);
        let mut lost = spacing < 4.0 * dx;
        let (mut max_a, mut max_rho) = (0.0f64, 0.0f64);
        for f in frames.iter().filter(|f| f.t <= horizon + 1e-12) {
            match nearest_local_min(&f.intensity, j, (radius / dx).ceil() as usize) {
                Some(m) => j = m,
                None => {
                    lost = true;
                    break;
                }
            }
            max_a = max_a.max(f.intensity[j]);
            max_rho = max_rho.max(f.diagonal[j]);
        }
        let verdict = if lost {
            Verdict::Flagged
        } else if max_a <= PINNED_INTENSITY && max_rho > REFILLED_DIAGONAL {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        reports.push(ZeroReport {
            zero_id: id,
            x0_initial: x0,
            max_intensity_logse: max_a,
            max_rho_diag_jzme: max_rho,
            verdict,
        });
    }
    Ok(reports)
}

fn nearest_local_min(p: &[f64], from: usize, radius: usize) -> Option<usize> {
    let n = p.len();
    let is_min = |i: usize| {
        let (l, c, r) = (p[(i + n - 1) % n], p[i], p[(i + 1) % n]);
        c <= l && c <= r
    };
    (0..=radius).find_map(|d| {
        let right = (from + d) % n;
        let left = (from + n - d % n) % n;
        if is_min(left) && p[left] <= p[right] {
            Some(left)
        } else if is_min(right) {
            Some(right)
        } else {
            None
        }
    })
}

pub const REPORT_HEADER: &str = "zero_id,x0_initial,max_intensity_logse,max_rho_diag_jzme,verdict";

pub fn report_csv(reports: &[ZeroReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{:.6e},{:.6e},{}\n",
            r.zero_id, r.x0_initial, r.max_intensity_logse, r.max_rho_diag_jzme, r.verdict
        ));
    }
    out
}
