//! Levenberg–Marquardt penalty dynamics for minimizing `Φ + Θ` over `argmin Ψ`.
//!
//! The continuous system `v ∈ ∂Φ(x)`, `λẋ + v̇ + v + ∇Θ(x) + β∇Ψ(x) = 0` is
//! integrated through its first-order reformulation in `z = x + v/λ`
//! ([`ode`]); [`iterate`] holds the forward–backward scheme obtained by
//! discretizing it, and [`diagnostics`] checks the asymptotic statements on
//! sampled trajectories against a reference solution.
// negated float comparisons are deliberate so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculus;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod iterate;
mod linalg;
pub mod ode;
pub mod problem;
pub mod quadrature;
pub mod schedules;

pub use error::{Error, Result};
