//! Invariant manifolds of normally hyperbolic trapped sets under decaying
//! time-dependent perturbations.
//!
//! The workspace splits into four layers:
//!
//! * [`dynamics`]: vector fields, discrete maps, an adaptive integrator,
//!   finite-difference Jacobians, invariant splittings and their expansion
//!   rates, and the normal-hyperbolicity checks that gate everything else.
//! * [`graph_transform`]: weighted section spaces over a trapped set and the
//!   graph-transform fixed-point iteration that produces perturbed unstable
//!   and stable manifolds, together with decay-rate fits and invariance
//!   verification.
//! * [`kerr`]: the rotating black hole geodesic flow in Boyer-Lindquist
//!   coordinates, its trapped set, expansion rates, and the stable-manifold
//!   pipeline for decaying metric perturbations.
//! * [`torus`]: a two-dimensional kinetic-energy-free model on the torus with
//!   closed-form expansion functions, used as an exactly solvable cross-check.
//!
//! The [`suite`] module ties the layers together into a battery of eleven
//! quantitative verification criteria shared by the `acceptance` integration
//! test and the command-line `verify` subcommand.

pub mod dynamics;
pub mod graph_transform;
pub mod kerr;
pub mod suite;
pub mod torus;
