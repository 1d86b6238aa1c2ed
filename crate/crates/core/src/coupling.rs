//! Time-dependent coupling `γ(t)` of the logarithmic nonlinearity.
//!
//! For a Gaussian the exact coupling is `γ = (2Λ/ħ) ∫₀ᵗ m₂ / m₂(t)` where `m₂`
//! is the position second moment `⟨x²⟩`. Its short-time limit is `2Λt` and
//! its long-time limit `c₀ + Λt/2`; [`gamma_interp`] blends the two linear
//! regimes with a `tanh` step centred on `t_b`.

use crate::error::{positive, Error, Result};

/// `t_b = ħ / (Λ b²)`, the time for the coherence length to fall by `1/e`.
pub fn characteristic_time(lambda: f64, b: f64, hbar: f64) -> Result<f64> {
    positive("lambda", lambda)?;
    positive("b", b)?;
    positive("hbar", hbar)?;
    Ok(hbar / (lambda * b * b))
}

/// `(1 + tanh(t - t_b)) / 2`.
pub fn sigmoid_blend(t: f64, t_b: f64) -> f64 {
    0.5 * (1.0 + (t - t_b).tanh())
}

pub fn gamma_interp(t: f64, lambda: f64, c0: f64, t_b: f64) -> f64 {
    let s = sigmoid_blend(t, t_b);
    2.0 * lambda * t * (1.0 - s) + (c0 + 0.5 * lambda * t) * s
}

/// Monotone time samples of a positive moment, with its running trapezoid integral.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentHistory {
    times: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MomentHistory {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: values.len() });
        }
        if times.len() < 2 {
            return Err(Error::WindowTooShort { got: times.len(), need: 2 });
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidParameter {
                name: "width_history",
                reason: "times must be strictly increasing".into(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "width_history",
                reason: format!("values must be positive, found {v}"),
            });
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 1..times.len() {
            let area = 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
            cumulative.push(cumulative[i - 1] + area);
        }
        Ok(Self { times, values, cumulative })
    }

    /// Sample `f` on `n + 1` equally spaced times over `[0, t_final]`.
    pub fn sample(f: impl Fn(f64) -> f64, t_final: f64, n: usize) -> Result<Self> {
        let times: Vec<f64> = (0..=n).map(|i| t_final * i as f64 / n as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let i = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => (p - 1).min(self.times.len() - 2),
        };
        let frac = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok((i, frac))
    }

    /// Piecewise-linear interpolation.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let (i, f) = self.locate(t)?;
        Ok(self.values[i] + f * (self.values[i + 1] - self.values[i]))
    }

    /// `∫_{start}^{t}` of the piecewise-linear interpolant.
    pub fn integral_to(&self, t: f64) -> Result<f64> {
        let (i, f) = self.locate(t)?;
        let h = self.times[i + 1] - self.times[i];
        let v0 = self.values[i];
        let v1 = self.values[i + 1];
        let partial = h * (f * v0 + 0.5 * f * f * (v1 - v0));
        Ok(self.cumulative[i] + partial)
    }
}

/// `(2Λ/ħ) · ∫₀ᵗ m(t') dt' / m(t)` for a sampled moment history `m`.
pub fn gamma_from_width(t: f64, lambda: f64, hbar: f64, history: &MomentHistory) -> Result<f64> {
    positive("hbar", hbar)?;
    let integral = history.integral_to(t)?;
    Ok(2.0 * lambda / hbar * integral / history.value_at(t)?)
}

/// Minimum number of samples inside a `fit_c0` window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares intercept `c₀` of `γ(t) - Λt/2` over `window`.
///
/// The slope is fixed at `Λ/2`, so the fit reduces to the mean residual.
/// `t_b` guards the precondition that the window sits in the long-time regime.
pub fn fit_c0(samples: &[(f64, f64)], lambda: f64, window: (f64, f64), t_b: f64) -> Result<f64> {
    let min = 5.0 * t_b;
    if window.0 < min {
        return Err(Error::WindowNotLongTime { start: window.0, end: window.1, min });
    }
    let inside: Vec<f64> = samples
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|(t, g)| g - 0.5 * lambda * t)
        .collect();
    if inside.len() < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooShort { got: inside.len(), need: MIN_FIT_SAMPLES });
    }
    Ok(inside.iter().sum::<f64>() / inside.len() as f64)
}

/// `fit_c0` applied to `γ` computed from a moment history.
pub fn fit_c0_from_history(
    history: &MomentHistory,
    lambda: f64,
    hbar: f64,
    window: (f64, f64),
    t_b: f64,
) -> Result<f64> {
    let samples: Vec<(f64, f64)> = history
        .times()
        .iter()
        .filter(|t| **t >= window.0 && **t <= window.1)
        .map(|&t| gamma_from_width(t, lambda, hbar, history).map(|g| (t, g)))
        .collect::<Result<_>>()?;
    fit_c0(&samples, lambda, window, t_b)
}

/// Rule producing `γ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSchedule {
    /// `γ ≡ 0`: the free Schrödinger equation.
    Zero,
    InterpLinear { lambda: f64, c0: f64, t_b: f64 },
    IntegralOfWidth { lambda: f64, hbar: f64, history: MomentHistory },
}

// Three-point Gauss-Legendre nodes and weights on [-1, 1].
const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

impl CouplingSchedule {
    pub fn gamma(&self, t: f64) -> Result<f64> {
        match self {
            CouplingSchedule::Zero => Ok(0.0),
            CouplingSchedule::InterpLinear { lambda, c0, t_b } => Ok(gamma_interp(t, *lambda, *c0, *t_b)),
            CouplingSchedule::IntegralOfWidth { lambda, hbar, history } => {
                gamma_from_width(t, *lambda, *hbar, history)
            }
        }
    }

    /// `∫_{t0}^{t0+dt} γ` by three-point Gauss-Legendre.
    pub fn integral(&self, t0: f64, dt: f64) -> Result<f64> {
        if matches!(self, CouplingSchedule::Zero) {
            return Ok(0.0);
        }
        let mid = t0 + 0.5 * dt;
        let mut acc = 0.0;
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            acc += weight * self.gamma(mid + 0.5 * dt * node)?;
        }
        Ok(0.5 * dt * acc)
    }

    /// `γ(t₀ + dt/2) dt`, the midpoint-rule fallback.
    pub fn midpoint_integral(&self, t0: f64, dt: f64) -> Result<f64> {
        Ok(self.gamma(t0 + 0.5 * dt)? * dt)
    }
}

/// `(t, γ(t))` on `points` log-spaced times over `[lo, hi]`.
pub fn tabulate(schedule: &CouplingSchedule, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    positive("lo", lo)?;
    positive("hi", hi)?;
    if points < 2 {
        return Err(Error::WindowTooShort { got: points, need: 2 });
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            let t = (a + (b - a) * i as f64 / (points - 1) as f64).exp();
            schedule.gamma(t).map(|g| (t, g))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn characteristic_time_examples() {
        assert_eq!(characteristic_time(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(characteristic_time(1.0, 2.0, 1.0).unwrap(), 0.25);
        assert_eq!(characteristic_time(4.0, 1.0, 1.0).unwrap(), 0.25);
        assert!(characteristic_time(0.0, 1.0, 1.0).is_err());
        assert!(characteristic_time(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid_blend(1.0, 1.0), 0.5);
        assert!(sigmoid_blend(-1e3, 1.0) < 1e-300);
        assert_eq!(sigmoid_blend(1e3, 1.0), 1.0);
        assert!((sigmoid_blend(2.0, 1.0) - 0.5 * (1.0 + 1f64.tanh())).abs() < 1e-15);
        assert!((sigmoid_blend(2.0, 1.0) - 0.8808).abs() < 1e-4);
        let ts: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
        assert!(ts.windows(2).all(|w| sigmoid_blend(w[1], 1.0) >= sigmoid_blend(w[0], 1.0)));
    }

    #[test]
    fn gamma_interp_examples() {
        assert_eq!(gamma_interp(0.0, 1.0, 0.0, 1.0), 0.0);
        assert!((gamma_interp(1.0, 1.0, 0.0, 1.0) - 1.25).abs() < 1e-15);
        assert!((gamma_interp(10.0, 1.0, 0.0, 1.0) - 5.0).abs() < 1e-6);
    }

    #[test]
    fn gamma_interp_limits() {
        // Short times: 2Λt up to the tanh tail; long times: c0 + Λt/2.
        for t in [1e-3, 1e-2] {
            let g = gamma_interp(t, 1.0, 0.0, 8.0);
            assert!((g / (2.0 * t) - 1.0).abs() < 1e-6);
        }
        let g = gamma_interp(40.0, 1.0, 0.3, 1.0);
        assert!((g - (0.3 + 20.0)).abs() < 1e-10);
    }

    #[test]
    fn gamma_interp_non_negative() {
        for i in 0..1000 {
            let t = 0.02 * i as f64;
            assert!(gamma_interp(t, 1.0, 0.0, 1.0) >= 0.0);
            assert!(gamma_interp(t, 2.0, 0.5, 0.5) >= 0.0);
        }
    }

    #[test]
    fn gamma_interp_is_c1() {
        let (lambda, c0, t_b) = (1.0, 0.1, 1.0);
        let analytic = |t: f64| {
            let s = sigmoid_blend(t, t_b);
            let ds = 0.5 / (t - t_b).cosh().powi(2);
            2.0 * lambda * (1.0 - s) - 2.0 * lambda * t * ds + 0.5 * lambda * s + (c0 + 0.5 * lambda * t) * ds
        };
        let h = 1e-5;
        for i in 1..400 {
            let t = 0.025 * i as f64;
            let fd = (gamma_interp(t + h, lambda, c0, t_b) - gamma_interp(t - h, lambda, c0, t_b)) / (2.0 * h);
            assert!((fd - analytic(t)).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn gamma_from_constant_width() {
        let h = MomentHistory::sample(|_| 1.0, 10.0, 100).unwrap();
        for t in [0.0, 0.35, 1.0, 7.77, 10.0] {
            let g = gamma_from_width(t, 1.5, 1.0, &h).unwrap();
            assert!((g - 3.0 * t).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn gamma_from_linear_width() {
        // Linear interpolation and trapezoid integration are exact for w = b(1 + t).
        let b = 2.0;
        let h = MomentHistory::sample(|t| b * (1.0 + t), 5.0, 50).unwrap();
        for t in [0.0, 0.5, 1.23, 4.9] {
            let g = gamma_from_width(t, 1.0, 1.0, &h).unwrap();
            let expected = 2.0 * (t + t * t / 2.0) / (1.0 + t);
            assert!((g - expected).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn gamma_from_width_out_of_range() {
        let h = MomentHistory::sample(|_| 1.0, 2.0, 10).unwrap();
        assert!(matches!(gamma_from_width(2.5, 1.0, 1.0, &h), Err(Error::OutOfRange { .. })));
        assert!(matches!(gamma_from_width(-0.1, 1.0, 1.0, &h), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn history_validation() {
        assert!(MomentHistory::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(MomentHistory::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(MomentHistory::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn polynomial_widths_give_linear_growth() {
        // m = t^n gives γ/t → 2Λ/(ħ(n+1)).
        for n in 0..=3 {
            let h = MomentHistory::sample(|t| 1e-9 + t.powi(n), 200.0, 200_000).unwrap();
            let t = 200.0;
            let ratio = gamma_from_width(t, 1.0, 1.0, &h).unwrap() / t;
            let expected = 2.0 / (n as f64 + 1.0);
            assert!((ratio - expected).abs() < 1e-3 * expected, "n={n}: {ratio} vs {expected}");
        }
    }

    #[test]
    fn fit_c0_exact_line() {
        let samples: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = 5.0 + 0.125 * i as f64;
            (t, 3.0 + 0.5 * 1.7 * t)
        }).collect();
        let c0 = fit_c0(&samples, 1.7, (5.0, 10.0), 1.0).unwrap();
        assert!((c0 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fit_c0_preconditions() {
        let samples: Vec<(f64, f64)> = (0..40).map(|i| (0.1 * i as f64, 0.0)).collect();
        assert!(matches!(fit_c0(&samples, 1.0, (0.0, 3.0), 1.0), Err(Error::WindowNotLongTime { .. })));
        let sparse: Vec<(f64, f64)> = (0..5).map(|i| (5.0 + i as f64, 0.0)).collect();
        assert!(matches!(fit_c0(&sparse, 1.0, (5.0, 10.0), 1.0), Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn gauss_integral_is_exact_for_quintics() {
        let h = MomentHistory::sample(|_| 1.0, 20.0, 20).unwrap();
        let s = CouplingSchedule::IntegralOfWidth { lambda: 1.0, hbar: 1.0, history: h };
        // γ = 2t exactly here, so the integral over [t0, t0+dt] is (t0+dt)² - t0².
        let v = s.integral(1.3, 0.4).unwrap();
        assert!((v - (1.7f64.powi(2) - 1.3f64.powi(2))).abs() < 1e-12);
        assert_eq!(CouplingSchedule::Zero.integral(3.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn tabulation_is_log_spaced() {
        let s = CouplingSchedule::InterpLinear { lambda: 1.0, c0: 0.0, t_b: 1.0 };
        let tab = tabulate(&s, 1e-2, 1e2, 5).unwrap();
        let ts: Vec<f64> = tab.iter().map(|p| p.0).collect();
        for (t, e) in ts.iter().zip([1e-2, 1e-1, 1.0, 10.0, 100.0]) {
            assert!((t / e - 1.0).abs() < 1e-12);
        }
    }
}
