//! Penalized-likelihood order estimation for location mixtures.
//!
//! The crate is `no_std` and only needs `alloc`. It holds the numerical core:
//! location families and mixture parameters ([`density`]), quadrature-based
//! divergences and weighted densities ([`divergence`]), the local geometry of
//! mixtures around a true density ([`geometry`]), empirical packing entropy
//! of Hellinger balls and weighted classes ([`entropy`]), constrained
//! multi-start EM and likelihood-ratio statistics ([`em`]), and the penalty
//! family with the order estimator itself ([`order`]).
//!
//! IO, file formats, parallel drivers and the command line live in the
//! `mixsel` companion crate.

#![no_std]

extern crate alloc;

pub mod density;
pub mod divergence;
pub mod em;
pub mod entropy;
mod error;
pub mod geometry;
pub mod math;
pub mod order;
pub mod rng;
pub mod stats;

pub use density::{Dataset, FamilyKind, LocationFamily, MixtureParams, ParamBall, Provenance, SieveSchedule};
pub use divergence::{QuadratureGrid, Scheme, WeightedDensity};
pub use em::{FitOptions, FitResult, LilModel, LilTrajectory};
pub use order::{OrderEstimate, Penalty, RateSpec};

pub use error::{Error, Result};

