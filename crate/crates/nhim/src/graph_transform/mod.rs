//! Graph-transform construction of invariant sections and manifolds.
//!
//! Sections live on grids over a time window times a base chart
//! ([`SectionGrid`]), measured against an admissible decay weight
//! ([`Weight`]). The transform pulls a section back through one map step and
//! re-evaluates its fiber part; for maps that contract fibers the iteration
//! is a contraction on weighted section space, and its fixed point is the
//! invariant section or manifold. [`unstable_manifold`] iterates from the
//! zero section, [`stable_manifold`] propagates a seed slab through the
//! inverse map, and [`flow_unstable_manifold`] reduces a flow to its
//! time-one map first.

mod bundle;
mod section;
mod transform;
mod weight;

pub use bundle::{invariant_section, FiberBundleMap, IterationReport};
pub use section::{Interpolation, RhoBounds, SectionGrid};
pub use transform::{
    fit_decay_rate, flow_unstable_manifold, graph_transform_step, stable_manifold,
    unstable_manifold, verify_invariance, DecayFit, ManifoldReport, ManifoldSettings,
    StationaryModel,
};
pub use weight::Weight;

use crate::dynamics::DynamicsError;

/// Errors from section spaces and graph-transform iterations.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("weight is not admissible: {0}")]
    WeightNotAdmissible(String),

    /// The weight is too large at the start of the window for the chart
    /// half-width (`rho(T0) < eps^2` is required).
    #[error("rho(T0) = {rho_t0:.3e} is not below eps^2 = {eps_sq:.3e}")]
    WindowStartTooEarly { rho_t0: f64, eps_sq: f64 },

    /// A base solve or pullback landed outside the chart.
    #[error("left the base chart at t = {t} (coordinate {coord:.3e})")]
    ChartEscape { t: f64, coord: f64 },

    /// The allocated time window was consumed before the iteration became
    /// Cauchy at the requested tolerance.
    #[error("time window exhausted with increment {increment:.3e} > tol {tol:.3e}")]
    WindowExhausted { increment: f64, tol: f64 },

    /// Successive increments stopped shrinking.
    #[error("iteration stalled (contraction estimate {theta:.4})")]
    ContractionStalled { theta: f64 },

    /// The iteration is Cauchy but the sampled invariance residual stays
    /// above its bound (usually an under-resolved grid).
    #[error("invariance residual {residual:.3e} exceeds {bound:.3e}")]
    ResidualAboveTolerance { residual: f64, bound: f64 },

    /// The stable-manifold seed disagrees with its own image under the
    /// inverse map on the overlap slab.
    #[error("seed slab is inconsistent with the map (mismatch {mismatch:.3e} > {bound:.3e})")]
    SeedInconsistent { mismatch: f64, bound: f64 },

    /// The field fails to be tangent to the computed graph.
    #[error("field-tangency residual {residual:.3e} exceeds {bound:.3e}")]
    TangencyFailed { residual: f64, bound: f64 },

    /// Decay-rate fit on an identically zero section.
    #[error("section is identically zero; decay rate is undefined")]
    AllZero,

    /// Flow operations require the convention `V t = -1`.
    #[error("field has time component {time_component}, expected -1")]
    TimeConvention { time_component: f64 },

    /// The fiber map fails the sampled contraction bound.
    #[error("fiber map is not a contraction (sampled factor {k:.4})")]
    FiberNotContracting { k: f64 },

    /// The base map fails the sampled overflowing check on the chart.
    #[error("base map is not overflowing: {0}")]
    NotOverflowing(String),

    #[error("base solve failed at t = {t}: {detail}")]
    BaseSolveFailed { t: f64, detail: String },

    #[error("i/o: {0}")]
    Io(String),

    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
