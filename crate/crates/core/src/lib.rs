//! Truncated-series models of `Sub_φ(Ω)` stochastic processes with a certified
//! reliability `1 − α` and accuracy `δ` in `L_p(0, T)`.
//!
//! The crate is organised bottom-up:
//!
//! | Module             | Contents                                                                 |
//! |--------------------|--------------------------------------------------------------------------|
//! | [`orlicz`]         | Orlicz functions φ, their densities, Young-Fenchel conjugates and inverses |
//! | [`subgaussian`]    | Sub-Gaussian standards τ_φ, the sum inequality, seeded samplers          |
//! | [`bounds`]         | Tail bound and admissibility conditions, forward and inverse             |
//! | [`quadrature`]     | Composite Gauss-Legendre grids on `[0, T]`                               |
//! | [`series`]         | Generic series models with approximate coefficient functions            |
//! | [`karhunen_loeve`] | Nyström eigensolver, two-grid error estimates, KL models                 |
//! | [`montecarlo`]     | Empirical verification of a built model                                  |
//!
//! Every certified quantity is computed conservatively: grid suprema are taken
//! from above, negative Mercer remainders are clamped at zero and tails are
//! never silently truncated.

pub mod bounds;
pub mod error;
pub mod karhunen_loeve;
pub mod montecarlo;
mod numeric;
pub mod orlicz;
pub mod plan;
pub mod quadrature;
pub mod rng;
pub mod series;
pub mod subgaussian;

pub use error::{Error, Result};
