//! Vector fields and discrete maps on an extended phase space `R_t x R^d`.
//!
//! Time is carried separately from the spatial state. A [`VectorField`] moves
//! `t` at the constant rate `time_component` while the spatial state evolves
//! under `eval`; a [`DiscreteMap`] shifts `t` by the constant `time_step` and
//! transforms the spatial state. The convention in which each map application
//! lowers `t` by one corresponds to `time_step = -1`, and time-one maps of a
//! field inherit `time_step = time_component`.

use std::sync::Arc;

type EvalFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Time-dependent vector field `V = time_component * d/dt + sum_i eval_i d/dx_i`.
///
/// `eval` writes the spatial velocity at `(t, x)`; the time coordinate moves
/// at the constant rate `time_component` (0 for fields whose time variable,
/// if any, is folded into the state).
#[derive(Clone)]
pub struct VectorField {
    dimension: usize,
    time_component: f64,
    eval: Arc<EvalFn>,
}

impl VectorField {
    pub fn new(
        dimension: usize,
        time_component: f64,
        eval: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dimension,
            time_component,
            eval: Arc::new(eval),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Value of `V t`, the constant speed of the time coordinate.
    pub fn time_component(&self) -> f64 {
        self.time_component
    }

    /// Spatial velocity at `(t, x)`, written into `out`.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dimension, "state dimension mismatch");
        assert_eq!(out.len(), self.dimension, "output dimension mismatch");
        (self.eval)(t, x, out);
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.eval(t, x, &mut out);
        out
    }

    /// The reversed field `-V`. Exchanges the roles of stable and unstable
    /// manifolds while keeping the same orbits.
    pub fn reversed(&self) -> VectorField {
        let inner = self.eval.clone();
        let dim = self.dimension;
        VectorField::new(dim, -self.time_component, move |t, x, out| {
            inner(t, x, out);
            for v in out.iter_mut() {
                *v = -*v;
            }
        })
    }
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("dimension", &self.dimension)
            .field("time_component", &self.time_component)
            .finish_non_exhaustive()
    }
}

/// Discrete-time map `(t, x) -> (t + time_step, eval(t, x))`.
#[derive(Clone)]
pub struct DiscreteMap {
    dimension: usize,
    time_step: f64,
    eval: Arc<EvalFn>,
}

impl DiscreteMap {
    pub fn new(
        dimension: usize,
        time_step: f64,
        eval: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dimension,
            time_step,
            eval: Arc::new(eval),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Shift applied to the time coordinate by one application of the map.
    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    /// Spatial image of `(t, x)`, written into `out`. The image lives at time
    /// `t + time_step`.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dimension, "state dimension mismatch");
        assert_eq!(out.len(), self.dimension, "output dimension mismatch");
        (self.eval)(t, x, out);
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.eval(t, x, &mut out);
        out
    }

    /// The `n`-fold composition of the map with itself, `n >= 1`.
    pub fn iterate(&self, n: usize) -> DiscreteMap {
        assert!(n >= 1, "iterate requires n >= 1");
        let inner = self.eval.clone();
        let dim = self.dimension;
        let step = self.time_step;
        DiscreteMap::new(dim, step * n as f64, move |t, x, out| {
            let mut cur = x.to_vec();
            let mut t_cur = t;
            for _ in 0..n {
                inner(t_cur, &cur, out);
                cur.copy_from_slice(out);
                t_cur += step;
            }
        })
    }
}

impl std::fmt::Debug for DiscreteMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteMap")
            .field("dimension", &self.dimension)
            .field("time_step", &self.time_step)
            .finish_non_exhaustive()
    }
}
