//! Regularized logarithms for the nonlinear potential, and the relative
//! functional distance used to compare them against `ln` on `(0, 1]`.

use std::f64::consts::{LN_10, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, Error, Result};

/// Default exponent: a shift of `10^-16`.
pub const DEFAULT_SIGMA: f64 = 16.0;

/// Midpoint samples used for `(0, 1]` norms.
pub const UNIT_INTERVAL_SAMPLES: usize = 20_000;

/// A finite-at-zero surrogate for `ln x`, `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum RegLog {
    /// Plain `ln x`; evaluating at zero is a domain error.
    Bare,
    /// `Re ln(x + 10^-σ i) = ½ ln(x² + 10^-2σ)`.
    ShiftImag { sigma: f64 },
    /// `(1/N) Σ_k Re ln(x + 10^-σ e^{2πik/N})`.
    RootAverage { sigma: f64, roots: u32 },
    /// `x^p / (x^p + 10^-σ) · ln(x + 10^-σ)`.
    Rational { sigma: f64, power: f64 },
}

impl Default for RegLog {
    fn default() -> Self {
        RegLog::ShiftImag { sigma: DEFAULT_SIGMA }
    }
}

impl RegLog {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegLog::Bare => Ok(()),
            RegLog::ShiftImag { sigma } => non_negative("sigma", sigma).map(|_| ()),
            RegLog::RootAverage { sigma, roots } => {
                non_negative("sigma", sigma)?;
                if roots == 0 {
                    return Err(Error::InvalidParameter {
                        name: "n_roots",
                        reason: "must be at least 1".into(),
                    });
                }
                Ok(())
            }
            RegLog::Rational { sigma, power } => {
                non_negative("sigma", sigma)?;
                if !(power.is_finite() && power >= 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "p",
                        reason: format!("must be >= 1, got {power}"),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            RegLog::Bare => None,
            RegLog::ShiftImag { sigma }
            | RegLog::RootAverage { sigma, .. }
            | RegLog::Rational { sigma, .. } => Some(sigma),
        }
    }

    /// Same scheme with a different exponent; `Bare` is returned unchanged.
    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            RegLog::Bare => RegLog::Bare,
            RegLog::ShiftImag { .. } => RegLog::ShiftImag { sigma },
            RegLog::RootAverage { roots, .. } => RegLog::RootAverage { sigma, roots },
            RegLog::Rational { power, .. } => RegLog::Rational { sigma, power },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegLog::Bare => "bare",
            RegLog::ShiftImag { .. } => "shift_imag",
            RegLog::RootAverage { .. } => "root_average",
            RegLog::Rational { .. } => "rational",
        }
    }

    /// Checked evaluation; `x` must be non-negative and `Bare` rejects zero.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Domain(x));
        }
        if matches!(self, RegLog::Bare) && x == 0.0 {
            return Err(Error::Domain(x));
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation for the propagation hot path.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            RegLog::Bare => x.ln(),
            RegLog::ShiftImag { sigma } => {
                let eps = 10f64.powf(-sigma);
                // ½ ln(x² + ε²), evaluated without overflow/underflow in the squares.
                let (big, small) = if x >= eps { (x, eps) } else { (eps, x) };
                big.ln() + 0.5 * (small / big).powi(2).ln_1p()
            }
            RegLog::RootAverage { sigma, roots } => {
                let eps = 10f64.powf(-sigma);
                let n = roots as f64;
                (0..roots)
                    .map(|k| {
                        let shift = Complex64::from_polar(eps, 2.0 * PI * k as f64 / n);
                        (Complex64::new(x, 0.0) + shift).norm().ln()
                    })
                    .sum::<f64>()
                    / n
            }
            RegLog::Rational { sigma, power } => {
                let eps = 10f64.powf(-sigma);
                let xp = x.powf(power);
                xp / (xp + eps) * (x + eps).ln()
            }
        }
    }

    /// `-σ ln 10` for `ShiftImag`, the finite value the scheme takes at zero.
    pub fn floor(&self) -> Option<f64> {
        match *self {
            RegLog::ShiftImag { sigma } => Some(-sigma * LN_10),
            _ => None,
        }
    }
}

impl fmt::Display for RegLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RegLog::Bare => write!(f, "bare"),
            RegLog::ShiftImag { sigma } => write!(f, "shift_imag(sigma={sigma})"),
            RegLog::RootAverage { sigma, roots } => write!(f, "root_average(sigma={sigma}, n={roots})"),
            RegLog::Rational { sigma, power } => write!(f, "rational(sigma={sigma}, p={power})"),
        }
    }
}

/// `(∫₀¹ |f|² dx)^½` by the composite midpoint rule on `samples` points.
pub fn l2_norm_unit_interval(f: impl Fn(f64) -> f64, samples: usize) -> Result<f64> {
    let values = unit_interval_samples(f, samples)?;
    Ok(norm_unit_interval(&values))
}

/// Midpoint samples `f((i + ½)/M)`, rejecting non-finite values.
pub fn unit_interval_samples(f: impl Fn(f64) -> f64, samples: usize) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::InvalidParameter { name: "samples", reason: "must be positive".into() });
    }
    let h = 1.0 / samples as f64;
    (0..samples)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("f({x}) = {v}")))
            }
        })
        .collect()
}

fn norm_unit_interval(values: &[f64]) -> f64 {
    let h = 1.0 / values.len() as f64;
    (values.iter().map(|v| v * v).sum::<f64>() * h).sqrt()
}

/// `Err(f, g) = ‖f - g‖ / sqrt(‖f‖ ‖g‖)` for equally weighted samples.
///
/// The common quadrature weight cancels, so the same routine serves `(0, 1]`
/// midpoint samples, grid functions and flattened density matrices.
pub fn rel_distance(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch { expected: f.len(), got: g.len() });
    }
    let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff = f.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(diff / (nf * ng).sqrt())
}

pub fn rel_distance_complex(f: &[Complex64], g: &[Complex64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch { expected: f.len(), got: g.len() });
    }
    let nf = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let ng = g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff = f.iter().zip(g).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(diff / (nf * ng).sqrt())
}

/// Distance on `(0, 1]` between two functions.
pub fn rel_distance_unit_interval(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    samples: usize,
) -> Result<f64> {
    let fv = unit_interval_samples(f, samples)?;
    let gv = unit_interval_samples(g, samples)?;
    rel_distance(&fv, &gv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    pub sigma: f64,
    pub err: f64,
}

/// `Err(ln, scheme_σ)` on `(0, 1]` for every scheme and every σ.
///
/// Each template's σ is replaced by the swept value; `Bare` is skipped.
pub fn regularization_sweep(schemes: &[RegLog], sigmas: &[f64], samples: usize) -> Result<Vec<SweepRow>> {
    let reference = unit_interval_samples(f64::ln, samples)?;
    let mut rows = Vec::with_capacity(schemes.len() * sigmas.len());
    for template in schemes.iter().filter(|s| !matches!(s, RegLog::Bare)) {
        for &sigma in sigmas {
            if !sigma.is_finite() {
                return Err(Error::InvalidParameter { name: "sigma", reason: "must be finite".into() });
            }
            let scheme = template.with_sigma(sigma);
            scheme.validate()?;
            let values = unit_interval_samples(|x| scheme.value(x), samples)?;
            rows.push(SweepRow {
                scheme: scheme.name().to_string(),
                sigma,
                err: rel_distance(&reference, &values)?,
            });
        }
    }
    Ok(rows)
}

/// The three schemes plotted in the regularization comparison.
pub fn default_sweep_schemes() -> [RegLog; 3] {
    [
        RegLog::ShiftImag { sigma: DEFAULT_SIGMA },
        RegLog::RootAverage { sigma: DEFAULT_SIGMA, roots: 4 },
        RegLog::Rational { sigma: DEFAULT_SIGMA, power: 1.0 },
    ]
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("scheme,sigma,err\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.12e}\n", r.scheme, r.sigma, r.err));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_imag_floor_at_zero() {
        let s = RegLog::ShiftImag { sigma: 16.0 };
        let v = s.eval(0.0).unwrap();
        assert!((v - (-16.0 * LN_10)).abs() < 1e-12);
        assert!((v + 36.84).abs() < 0.01);
        assert_eq!(s.floor(), Some(v));
    }

    #[test]
    fn every_scheme_vanishes_at_one() {
        for s in [
            RegLog::Bare,
            RegLog::ShiftImag { sigma: 16.0 },
            RegLog::RootAverage { sigma: 16.0, roots: 4 },
            RegLog::RootAverage { sigma: 16.0, roots: 7 },
            RegLog::Rational { sigma: 16.0, power: 1.0 },
            RegLog::Rational { sigma: 16.0, power: 2.5 },
        ] {
            assert!(s.eval(1.0).unwrap().abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn rational_at_its_shift() {
        // x = ε: x/(x+ε) ln(x+ε) = ½ ln(2ε).
        let v = RegLog::Rational { sigma: 3.0, power: 1.0 }.eval(1e-3).unwrap();
        let expected = 0.5 * (2e-3f64).ln();
        assert!((v - expected).abs() < 1e-14);
        assert!((v + 3.107).abs() < 1e-3);
    }

    #[test]
    fn bare_rejects_zero() {
        assert!(matches!(RegLog::Bare.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(RegLog::ShiftImag { sigma: 4.0 }.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn root_average_matches_product_identity() {
        // Π_k (x + ε ω^k) = x^N - (-ε)^N, so the average is ln|x^N - (-ε)^N| / N.
        let eps: f64 = 1e-3;
        for n in [1u32, 2, 3, 4, 5] {
            let s = RegLog::RootAverage { sigma: 3.0, roots: n };
            for x in [0.0f64, 2e-4, 5e-3, 0.3, 1.7] {
                let exact = (x.powi(n as i32) - (-eps).powi(n as i32)).abs().ln() / n as f64;
                assert!((s.value(x) - exact).abs() < 1e-10, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(RegLog::ShiftImag { sigma: -1.0 }.validate().is_err());
        assert!(RegLog::RootAverage { sigma: 3.0, roots: 0 }.validate().is_err());
        assert!(RegLog::Rational { sigma: 3.0, power: 0.5 }.validate().is_err());
        assert!(RegLog::default().validate().is_ok());
    }

    #[test]
    fn unit_interval_norms() {
        let m = UNIT_INTERVAL_SAMPLES;
        assert!((l2_norm_unit_interval(|_| 1.0, m).unwrap() - 1.0).abs() < 1e-12);
        assert!((l2_norm_unit_interval(|x| x, m).unwrap() - 3f64.sqrt().recip()).abs() < 1e-8);
        // ∫₀¹ ln² x dx = 2; the midpoint rule converges slowly at the singular endpoint.
        assert!((l2_norm_unit_interval(f64::ln, m).unwrap() - 2f64.sqrt()).abs() < 1e-3);
        assert!(l2_norm_unit_interval(|x| 1.0 / (x - 0.5 / m as f64), m).is_err());
    }

    #[test]
    fn distance_identities() {
        let f: Vec<f64> = (1..100).map(|i| (i as f64 * 0.1).sin() + 2.0).collect();
        let twice: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        assert_eq!(rel_distance(&f, &f).unwrap(), 0.0);
        assert!((rel_distance(&f, &twice).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((rel_distance(&twice, &f).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(matches!(rel_distance(&f, &vec![0.0; f.len()]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn shift_imag_sigma_two_distance() {
        let m = UNIT_INTERVAL_SAMPLES;
        let e2 = rel_distance_unit_interval(f64::ln, |x| RegLog::ShiftImag { sigma: 2.0 }.value(x), m).unwrap();
        let e3 = rel_distance_unit_interval(f64::ln, |x| RegLog::ShiftImag { sigma: 3.0 }.value(x), m).unwrap();
        assert!(e3 < e2);
        assert!(e3 < 0.1);
    }

    #[test]
    fn sweep_trends() {
        let sigmas: Vec<f64> = (0..=32).map(|i| 1.0 + 0.5 * i as f64).collect();
        let rows = regularization_sweep(&default_sweep_schemes(), &sigmas, UNIT_INTERVAL_SAMPLES).unwrap();
        assert_eq!(rows.len(), 3 * sigmas.len());
        for scheme in ["shift_imag", "root_average", "rational"] {
            let curve: Vec<&SweepRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
            for w in curve.windows(2) {
                // Past σ ≈ 15 the distance sits at the rounding floor of the samples.
                assert!(w[1].err <= w[0].err + 1e-15, "{scheme}: {} -> {}", w[0].err, w[1].err);
            }
            let at = |s: f64| curve.iter().find(|r| r.sigma == s).unwrap().err;
            assert!(at(4.0) < at(3.0), "{scheme}");
            if scheme == "rational" {
                // The x/(x+ε) damping reaches up to x ~ ε; high-precision
                // quadrature of the continuum distance gives 0.17829.
                assert!((at(3.0) - 0.17829).abs() < 2e-3, "{}", at(3.0));
                assert!(at(4.0) < 0.1);
            } else {
                assert!(at(3.0) < 0.1, "{scheme}");
            }
            assert!(at(16.0) <= 1e-6, "{scheme}: {}", at(16.0));
        }
        assert!(sweep_csv(&rows).starts_with("scheme,sigma,err\n"));
    }
}
