//! Numerical toolkit for comparing the logarithmic Schrödinger equation (LogSE)
//! of conditional wave theory against the Joos-Zeh master equation (JZME).
//!
//! Both equations are advanced with the same second-order Strang splitting:
//! a spectral kinetic half-step, an exact pointwise step for the remaining
//! term, and another kinetic half-step. Everything lives on a periodic 1-D
//! grid ([`grid::Grid1D`]); the density matrix uses the same grid on both axes.
//!
//! Units follow the usual convention for this problem: lengths in units of the
//! initial width `b`, time in units of `t_b = ħ/(Λ b²)`, and `ħ = m = Λ = 1`
//! unless a configuration says otherwise.

pub mod coupling;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod jzme;
pub mod logse;
pub mod moments;
pub mod observables;
pub mod pinning;
pub mod propagation;
pub mod reglog;
pub mod states;

pub use error::{Error, Result};
pub use grid::Grid1D;
pub use jzme::DensityState;
pub use states::WaveState;

pub use num_complex::Complex64;
