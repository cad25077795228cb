//! Spectral numerics for a boundary-driven stochastic growth flow on planar
//! domains: the Dirichlet-to-Neumann (Steklov) calculus, the boundary heat
//! semigroup, renormalized singular SPDE solvers with their Da Prato–Debussche
//! splitting, and a reflected-particle interface growth model.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod geometry;
pub mod growth;
pub mod heatflow;
pub mod parallel;
pub mod rng;
pub mod spde;
pub mod steklov;
pub mod stochastics;

pub use domain::Domain;
pub use error::{Error, Result};
pub use geometry::{BoundaryField, ClosedCurve, CurvePreset};
pub use heatflow::HeatPropagator;
pub use steklov::{ModeCutoff, SteklovBasis, ZeroMode};
