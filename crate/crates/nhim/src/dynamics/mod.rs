//! Shared dynamical-systems layer: fields, maps, integration, Jacobians,
//! invariant splittings, hyperbolicity rates, and local map inversion.

mod field;
mod integrate;
mod invert;
mod jacobian;
mod splitting;

pub use field::{DiscreteMap, VectorField};
pub use integrate::{integrate, time_one_map, Trajectory};
pub use invert::{inverse_map, invert_map_step};
pub use jacobian::{field_jacobian, map_jacobian};
pub use splitting::{
    check_eventual_normal_hyperbolicity, check_normal_hyperbolicity, splitting_rates,
    HyperbolicityRates, Splitting, SplittingFrame,
};

/// Errors from the dynamics layer.
#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    /// The adaptive integrator drove the step size below the resolvable
    /// fraction of the integration span.
    #[error("integration step underflow at t = {t} (step {step:.3e})")]
    StepUnderflow { t: f64, step: f64 },

    /// Step budget exhausted before reaching the end of the span.
    #[error("integration exceeded {limit} steps")]
    MaxSteps { limit: usize },

    /// A splitting failed a structural check (dimensions, orthonormality,
    /// or uniform transversality).
    #[error("invalid splitting: {0}")]
    InvalidSplitting(String),

    /// The linearized map leaks between splitting blocks more than the
    /// invariance tolerance allows.
    #[error("splitting is not invariant (off-block leakage {leakage:.3e})")]
    SplittingNotInvariant { leakage: f64 },

    /// The rate inequalities of normal hyperbolicity fail at some order.
    #[error("not normally hyperbolic at order {order}: {detail}")]
    NotHyperbolic { order: usize, detail: String },

    /// A Newton iteration could not reduce its residual even after step
    /// damping.
    #[error("iteration stopped contracting (residual {residual:.3e})")]
    NoContraction { residual: f64 },

    /// A Newton iteration ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    MaxIter { iterations: usize, residual: f64 },
}
