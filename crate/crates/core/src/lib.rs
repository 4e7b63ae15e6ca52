//! Stark resonances of a one-dimensional Hamiltonian with two attractive
//! point interactions in a constant field,
//!
//! ```text
//! H = -d²/dx² + α₁ δ(x - x₁) + α₂ δ(x - x₂) - F x ,
//! ```
//!
//! in units with ħ = 1 and 2m = 1.
//!
//! The crate is organised bottom-up:
//!
//! * [`airy`]: complex Airy functions and the outgoing combinations `Ci±`.
//! * [`kernel`]: the free Stark resolvent kernel and the Krein objects built on it.
//! * [`solver`]: resonance search, zero counting and branch tracking in `F`.
//! * [`crossing`]: Agmon lengths, crossing classification, critical field.
//! * [`survival`]: survival amplitude of a Gaussian initial state.
//! * [`quadrature`]: adaptive Gauss-Kronrod integration of complex integrands.

pub mod airy;
pub mod crossing;
pub mod kernel;
pub mod quadrature;
pub mod solver;
pub mod survival;

pub use num_complex::Complex64;

pub use airy::{AiryError, Sign};
pub use crossing::{CrossingReport, CrossingType};
pub use kernel::{KMatrix, KernelError, ModelParams};
pub use solver::{Branch, BranchTrack, Resonance, SolveError};
pub use survival::{GaussianState, SurvivalSeries};
