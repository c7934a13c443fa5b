//! Particle simulation of the mollified gyrokinetic mean-field system with a
//! screened-logarithm interaction, and numerical checks of its stability estimates.
//!
//! Phase-space points are `(x, v) ∈ R² × R²`. The interaction kernel
//! `K(x, v) = -ln(max(|x|, |v|)) / 2π` drives the flow
//! `dX/dt = U[f](X, V)`, `dV/dt = A[f](X, V)`, where
//! `U = ∇^⊥_x K * f` and `A` is the same field with the roles of `x` and `v` swapped.

pub mod error;
pub mod fields;
pub mod harness;
pub mod flow;
pub mod kernel;
pub mod measures;
pub mod mollify;
pub mod quadrature;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{PhasePoint, Vec2};
