//! Quantum characteristic exponents of kicked quantum systems.
//!
//! The exponent measures the exponential growth rate of the spatial
//! derivative of a Heisenberg-evolved observable field
//! `γₙ(x) = (U⁻ⁿ X Uⁿ ψ)(x)`. This crate evaluates it numerically for the
//! kicked rotator on the circle and the configurational cat on the torus,
//! and compares the latter with its closed-form solution.
//!
//! - [`grid`]: periodic grids, fields, finite differences, masked averages
//! - [`spectral`]: unitary FFTs
//! - [`floquet`]: one-period evolution operators
//! - [`heisenberg`]: the fields `γₙ`
//! - [`qce`]: growth indices, guarded traces and the exponent fit
//! - [`cat_oracle`]: exact cat results
//! - [`cli`]: experiment configuration, outputs and charts

pub mod cat_oracle;
pub mod cli;
pub mod error;
pub mod floquet;
pub mod grid;
pub mod heisenberg;
pub mod qce;
pub mod spectral;

pub use error::{Error, Result};
