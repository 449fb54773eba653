//! Numerical laboratory for continuously monitored open quantum systems.
//!
//! The crate implements, at desk scale (dense matrices, n ≤ 32):
//!
//! * the stochastic master equation of homodyne detection and its
//!   unnormalized linear Stratonovich form ([`filters`], [`operator_algebra`]),
//! * multi-index calculus with truncation sets Λ_k and their remainder
//!   sets ([`multi_index`]),
//! * iterated Stratonovich integrals on sampled noise grids, the
//!   differentiators D_α and L_α, order-k stochastic Taylor expansions,
//!   and an empirical strong-convergence study ([`stratonovich`]),
//! * exponential submanifolds of unnormalized density operators with
//!   their quantum Fisher metric and orthogonal projection ([`geometry`]),
//! * drift and diffusion coefficients of the projection filters built
//!   from those pieces, in Stratonovich, Itô, baseline, and self-adjoint
//!   spectral forms ([`filters`]).
//!
//! Everything is deterministic given a seed: noise is generated by a
//! counter-based stream keyed by (seed, path, step) in [`noise`].

#![forbid(unsafe_code)]

pub mod error;
pub mod filters;
pub mod geometry;
pub mod linalg;
pub mod multi_index;
pub mod noise;
pub mod operator_algebra;
pub mod stratonovich;
pub mod tol;

pub use error::{Error, Result};
