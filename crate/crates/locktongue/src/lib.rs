//! Frequency locking in the injection-locked frequency divider equation.
//!
//! The crate predicts and measures the Arnold-tongue / devil's-staircase
//! structure of the driven Lienard oscillator
//! `u'' + (1 - b + 3 b u^2) u' + (a - b) u + b u^3 + mu Psi(u, u', t) = 0`:
//!
//! * [`limit_cycle`] locates the unperturbed cycle and its proper frequency;
//! * [`linearized`] builds the Wronskian of the variational equation and its
//!   Floquet splitting `w11 = a + e^{-f0 tau} b`;
//! * [`compatibility`] evaluates the first-order solvability constants
//!   (`A`, `B_ij`, `D1`, `D2`) and the first-order correction;
//! * [`perturbation`] runs the order-k recursion for the detuning series
//!   `eps(tau0, mu)` and predicts locking intervals;
//! * [`locking`] measures locking directly from simulation via Poincare
//!   sections and rotation numbers;
//! * [`selftest`] bundles the end-to-end checks comparing all of the above.

pub mod compatibility;
pub mod error;
pub mod exec;
pub mod fourier;
pub mod limit_cycle;
pub mod linearized;
pub mod locking;
pub mod ode;
pub mod params;
pub mod perturbation;
pub mod selftest;

pub use error::{Error, Result};
pub use fourier::{FourierSeries, HarmonicParity};
pub use limit_cycle::{find_limit_cycle, rescale_cycle, LimitCycle, ScaledLimitCycle};
pub use params::{circuit_to_dimensionless, CircuitParams, DimensionlessParams, ResonanceRatio};


