//! Second-moment dynamics of Gaussian states under the JZME.
//!
//! Taking moments of the master equation gives a closed linear system
//!
//! ```text
//! d⟨x²⟩/dt = 2 C / m,    dC/dt = ⟨p²⟩ / m,    d⟨p²⟩/dt = 2Λħ,
//! ```
//!
//! with `C = ⟨xp + px⟩/2`. It is independent of the grid propagators and is
//! used as their oracle, and to build the moment history behind `γ(t)`.

use serde::Serialize;

use crate::coupling::MomentHistory;
use crate::error::{non_negative, positive, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMoments {
    pub t: f64,
    /// `⟨x²⟩`
    pub xx: f64,
    /// `⟨xp + px⟩ / 2`
    pub xp: f64,
    /// `⟨p²⟩`
    pub pp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams {
    pub lambda: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl Default for MomentParams {
    fn default() -> Self {
        Self { lambda: 1.0, hbar: 1.0, mass: 1.0 }
    }
}

impl MomentParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("lambda", self.lambda)?;
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        Ok(())
    }
}

impl GaussianMoments {
    /// Minimum-uncertainty packet with position spread `b` at rest.
    pub fn minimum_uncertainty(b: f64, hbar: f64) -> Self {
        Self { t: 0.0, xx: b * b, xp: 0.0, pp: hbar * hbar / (4.0 * b * b) }
    }

    pub fn width(&self) -> f64 {
        self.xx.sqrt()
    }

    /// `⟨x²⟩⟨p²⟩ - C²`, bounded below by `(ħ/2)²`.
    pub fn uncertainty_product(&self) -> f64 {
        self.xx * self.pp - self.xp * self.xp
    }

    fn derivative(&self, p: &MomentParams) -> [f64; 3] {
        [2.0 * self.xp / p.mass, self.pp / p.mass, 2.0 * p.lambda * p.hbar]
    }

    fn shifted(&self, d: [f64; 3], h: f64) -> Self {
        Self { t: self.t + h, xx: self.xx + h * d[0], xp: self.xp + h * d[1], pp: self.pp + h * d[2] }
    }
}

/// One classical RK4 step.
pub fn step_moments(m: &GaussianMoments, dt: f64, params: &MomentParams) -> GaussianMoments {
    let k1 = m.derivative(params);
    let k2 = m.shifted(k1, 0.5 * dt).derivative(params);
    let k3 = m.shifted(k2, 0.5 * dt).derivative(params);
    let k4 = m.shifted(k3, dt).derivative(params);
    let mut out = *m;
    out.t += dt;
    out.xx += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    out.xp += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    out.pp += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
    out
}

/// Moments on `[0, t_final]` every `dt`, starting from a minimum-uncertainty packet.
pub fn evolve(b: f64, t_final: f64, dt: f64, params: &MomentParams) -> Result<Vec<GaussianMoments>> {
    positive("b", b)?;
    positive("dt", dt)?;
    non_negative("t_final", t_final)?;
    params.validate()?;
    let steps = (t_final / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut m = GaussianMoments::minimum_uncertainty(b, params.hbar);
    out.push(m);
    for i in 1..=steps {
        m = step_moments(&m, dt, params);
        m.t = i as f64 * dt;
        out.push(m);
    }
    Ok(out)
}

/// `(t, w = sqrt⟨x²⟩)`.
pub fn width_history(b: f64, t_final: f64, dt: f64, params: &MomentParams) -> Result<Vec<(f64, f64)>> {
    Ok(evolve(b, t_final, dt, params)?.iter().map(|m| (m.t, m.width())).collect())
}

/// `⟨x²⟩(t)` as a [`MomentHistory`], the input of the integral form of `γ`.
pub fn second_moment_history(b: f64, t_final: f64, dt: f64, params: &MomentParams) -> Result<MomentHistory> {
    let ms = evolve(b, t_final, dt, params)?;
    MomentHistory::new(ms.iter().map(|m| m.t).collect(), ms.iter().map(|m| m.xx).collect())
}

/// Free-particle spreading `b² + (ħt / 2mb)²`.
pub fn free_second_moment(b: f64, t: f64, hbar: f64, mass: f64) -> f64 {
    b * b + (hbar * t / (2.0 * mass * b)).powi(2)
}

pub fn moments_csv(ms: &[GaussianMoments]) -> String {
    let mut out = String::from("t,w,xx,xp,pp\n");
    for m in ms {
        out.push_str(&format!("{},{:.12e},{:.12e},{:.12e},{:.12e}\n", m.t, m.width(), m.xx, m.xp, m.pp));
    }
    out
}
