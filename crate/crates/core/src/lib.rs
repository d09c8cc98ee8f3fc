//! Multiplicative probability ensembles on integer partitions with
//! equiweighted parts.
//!
//! A partition `λ = (1^ν₁ 2^ν₂ …)` receives weight `Π c_{ν_ℓ}` where the
//! `c_k` are the Taylor coefficients of a generating function
//! `F₀(u) = Σ c_k u^k` shared by every part size. The crate provides
//!
//! - [`ensembles`]: the six standard generating-function families, their
//!   log-coefficients `a_k` (`H₀ = ln F₀ = Σ a_k u^k`), `c_k`, and the
//!   Dirichlet series `A(s) = Σ a_k k^{-s}`;
//! - [`special`]: power-exponential sums `S_q(t)`, the dilogarithm and
//!   adaptive quadrature;
//! - [`calibrate`]: the choice `z = exp(-γ/√n)` with `γ² = A(1)` and exact
//!   series for cumulants of the total weight and of the diagram profile;
//! - [`sampler`]: grand-ensemble (Boltzmann) sampling and conditioned
//!   sampling by rejection;
//! - [`oracle`]: exact normalizers, conditional laws and event probabilities;
//! - [`shape`]: Young-diagram profiles, limit shapes, sup-norm distances;
//! - [`verify`]: reproducible verification reports;
//! - [`cli`]: the command-line front end.

#![forbid(unsafe_code)]

pub mod calibrate;
pub mod cli;
pub mod ensembles;
pub mod error;
pub mod exact;
pub mod oracle;
pub mod partition;
pub mod sampler;
pub mod shape;
pub mod special;
pub mod stats;
pub mod verify;

pub use calibrate::Calibration;
pub use ensembles::{EnsembleSpec, Family};
pub use error::{Error, Result};
pub use partition::Partition;
pub use sampler::SamplerConfig;
