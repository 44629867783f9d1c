//! Solvers for constrained nested stochastic optimization
//! `min_{x in X} f(g(x))` where both the inner map `g` and the outer
//! function `f` are only accessible through a noisy sampling oracle.
//!
//! The two solvers are single time-scale averaging methods:
//!
//! * [`nasa`] — Nested Averaged Stochastic Approximation. One stepsize
//!   sequence drives the primal iterate together with two running
//!   averages: a gradient tracker `z` and an inner-value tracker `u`.
//! * [`asa`] — Averaged Stochastic Approximation, the single-level
//!   specialization (`g` = identity). A constrained dual-averaging
//!   method whose basic regime needs no problem constants at all.
//!
//! Supporting modules: [`geometry`] (feasible sets, projections, the
//! quadratic direction subproblem and the optimality measure),
//! [`oracle`] (the stochastic oracle contract and its RNG stream
//! discipline), [`problems`] (benchmark instances with analytic ground
//! truth), and [`diagnostics`] (merit functions, the per-iteration
//! descent ledger, finite-difference checks and rate-slope fits).

pub mod asa;
pub mod diagnostics;
mod error;
pub mod geometry;
pub mod nasa;
pub mod oracle;
pub mod problems;

pub use error::{Error, Result};

/// Convenience alias used throughout: dense column vector of `f64`.
pub type Vector = nalgebra::DVector<f64>;
/// Convenience alias used throughout: dense matrix of `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;
