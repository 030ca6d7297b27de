//! Exact symbol calculus on coherent-state phase space and the dynamics it
//! generates.
//!
//! The crate is organized around a sparse polynomial algebra in the complex
//! phase-space variables `(α_j, α*_j)` ([`symbols`]), the Wick and anti-Wick
//! star products and brackets built on it ([`star`]), derivation of evolution
//! equations for the Husimi Q- and Glauber-Sudarshan P-functions from a
//! Hamiltonian symbol ([`eom`]), a single-mode grid integrator for the derived
//! equations ([`pde`]), and closed-form reference solutions ([`oracle`]).
//!
//! Conventions used throughout: `ħ = 1`, `mω = 1`, `α = (q + ip)/√2`, and all
//! phase-space integrals carry the measure `d²α/π = dq dp / (2π)`.

pub mod eom;
mod error;
pub mod oracle;
pub mod pde;
pub mod star;
pub mod symbols;

pub use error::Error;
pub use num_complex::Complex64;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
