//! Spectral Faedo-Galerkin solver for a stochastic predator-prey
//! reaction-diffusion system with prey-taxis and multiplicative noise.
//!
//! The predator density `u1` and prey density `u2` evolve on a 1D interval
//! or 2D rectangle with homogeneous Neumann boundary conditions:
//!
//! ```text
//! du1 - d1 Δu1 dt + div(χ(u1) ∇u2) dt = F1(u1,u2) dt + σ_{u1}(u1,u2) dW_{u1}
//! du2 - d2 Δu2 dt                     = F2(u1,u2) dt + σ_{u2}(u1,u2) dW_{u2}
//! ```
//!
//! Both equations are projected onto the span of the first `n` Neumann
//! Laplacian eigenfunctions (cosines on boxes) and the resulting
//! finite-dimensional SDE system is integrated with Euler-Maruyama.
//! The [`diagnostics`] module turns the analytical machinery behind this
//! system (energy estimates, time-translation bounds, Stampacchia
//! nonnegativity, weak-form identities) into computable statistics.
//!
//! This crate is `no_std` (with `alloc`); IO, configuration and the
//! Monte Carlo orchestration live in the companion `preytaxis` crate.

#![no_std]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod model;
pub mod noise;
pub mod spectral;

pub use error::Error;
pub use galerkin::{StepConfig, Trajectory};
pub use model::ModelParams;
pub use noise::{Equation, NoiseModel, NoiseShape, SeedPolicy, WienerIncrements};
pub use spectral::{BasisSet, Domain, Field, SpectralState};
