//! Kerr spacetimes in Boyer-Lindquist coordinates: metric and dual metric,
//! null-geodesic Hamilton flow, the trapped photon sphere with its expansion
//! rates, decaying metric perturbations, and the stable-manifold pipeline
//! that feeds the trapped-set data into the graph-transform engine.
//!
//! Signature convention `(+,-,-,-)`; covectors are written
//! `sigma dt + xi_r dr + xi_theta dtheta + xi_phi dphi`. Charts keep
//! `r > r_+` and a fixed polar margin on `theta`, inside which the metric
//! is smooth and Lorentzian for every subextremal parameter pair.

mod chargraph;
mod geometry;
mod hamilton;
mod manifold;
mod perturb;
mod reduced;
mod trapped;

pub use chargraph::{characteristic_graph, CharacteristicGraph};
pub use geometry::{
    dual_gradient_exact, dual_metric_exact, dual_metric_value, metric, DualMetric, KerrParams,
    PhasePoint, THETA_MARGIN,
};
pub use hamilton::{
    hamilton_exact, hamilton_field, hamilton_vector_field, rescaled_hamilton, G_FD_STEP,
};
pub use manifold::{center_line_decay, kerr_stable_manifold, KerrManifold, KerrManifoldSettings};
pub use perturb::{perturbed_dual_metric, ChartBox, MetricPerturbation, PerturbationShape};
pub use reduced::{equatorial_reduced_field, equatorial_trapped_radius, ReducedBranch};
pub use trapped::{
    equatorial_orbit_guess, expansion_rates, trapped_set_solve, ConformalFactor, ExpansionRates,
    TrappedComponent, TrappedMode, TrappedPoint,
};

use thiserror::Error;

/// Errors surfaced by the Kerr geometry and solvers.
#[derive(Debug, Error)]
pub enum KerrError {
    #[error("point outside the Boyer-Lindquist chart (r = {r}, theta = {theta})")]
    OutsideChart { r: f64, theta: f64 },
    #[error("metric not invertible: {detail}")]
    Singular { detail: String },
    #[error("Hamilton field evaluation produced a non-finite component")]
    NonFinite,
    #[error("time flow degenerate: |H_G t| = {ht:.3e} below threshold")]
    DegenerateTimeFlow { ht: f64 },
    #[error("trapped-set solve stalled at residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("trapped-set solve left the chart (r = {r})")]
    LeftChart { r: f64 },
    #[error("hyperbolic eigenvalue pair not real: {re:.6e} + {im:.6e} i")]
    ComplexEigenvalues { re: f64, im: f64 },
    #[error(
        "perturbed metric loses Lorentzian signature at (t = {t}, r = {r}, theta = {theta}); \
         reduce the amplitude below {amplitude}"
    )]
    SignatureLost {
        t: f64,
        r: f64,
        theta: f64,
        amplitude: f64,
    },
    #[error("graph solve does not contract: estimated factor {factor:.3} >= 0.5; lower tau0")]
    NoContraction { factor: f64 },
    #[error(transparent)]
    Graph(#[from] crate::graph_transform::GraphError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}
