//! Numerical laboratory for random (Steinhaus) sequences in the unit disk.
//!
//! A Steinhaus sequence has fixed radii `r_n` and independent arguments
//! `θ_n` uniform on `[0, 2π)`. This crate samples such sequences, evaluates
//! Blaschke-product quantities on them in log-domain, builds explicit
//! quasi-bounded harmonic majorants of the counting function
//! `φ_Λ(λ) = log 1/|B_λ(λ)|`, and checks the probabilistic estimates that
//! govern free interpolation in Nevanlinna, Smirnov and Hardy–Orlicz classes.
//!
//! Points are stored in polar form with their distance to the boundary kept
//! in log-domain (see [`DiskPoint`]), so sequences whose radii are not
//! representable as `f64` (for example `1 - 2^{-2000}`) are handled exactly.
//!
//! Module map:
//! - [`geometry`]: pseudohyperbolic distance, Blaschke factors, dyadic annuli,
//!   Stolz angles, harmonic measure of arcs.
//! - [`sequences`]: radius profiles, seeded samples, dyadic counting.
//! - [`blaschke`]: `φ_Λ` tables, criterion sums, separation constants.
//! - [`majorant`]: Poisson kernel analytics, the step-function majorant ψ,
//!   balayage and the discrete-measure duality check.
//! - [`stochastic`]: Monte Carlo and quadrature verification batteries.
//! - [`criteria`]: end-to-end verdicts, Stolz covering, the Carleson
//!   counterexample.

// `!(x > a)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blaschke;
pub mod criteria;
mod error;
pub mod geometry;
pub mod majorant;
pub mod quad;
pub mod rng;
pub mod sequences;
pub mod stochastic;

pub use error::{LabError, Result};
pub use geometry::{BoundaryArc, DiskPoint, StolzAngle};
pub use sequences::{RadiusProfile, SequenceSample};
