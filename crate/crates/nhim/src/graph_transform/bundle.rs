//! Bundle maps over a shrinking time window and their invariant sections.
//!
//! A fiber-bundle map covers a base map: it sends the fiber over a base
//! point to the fiber over that point's image. When the base map is
//! overflowing on its chart and the fiber action is a uniform contraction,
//! pulling a section back through the map, with the fiber map applied at the
//! pullback point, defines a contraction on weighted section space whose
//! fixed point is the unique invariant section.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GraphError, RhoBounds, SectionGrid, Weight};
use crate::dynamics::{invert_map_step, DiscreteMap};

type FiberFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Map of a trivial bundle `(t, x, e) -> (t', x', e')` covering `base_map`.
///
/// The fiber map takes the source point `(t, x)` (where the section is read)
/// and the fiber value `e`, and produces the fiber value over the image.
#[derive(Clone)]
pub struct FiberBundleMap {
    base_map: DiscreteMap,
    fiber_dim: usize,
    fiber_map: Arc<FiberFn>,
}

impl FiberBundleMap {
    pub fn new(
        base_map: DiscreteMap,
        fiber_dim: usize,
        fiber_map: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(fiber_dim > 0, "fiber dimension must be positive");
        Self {
            base_map,
            fiber_dim,
            fiber_map: Arc::new(fiber_map),
        }
    }

    pub fn base_map(&self) -> &DiscreteMap {
        &self.base_map
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn eval_fiber(&self, t_source: f64, x_source: &[f64], e: &[f64], out: &mut [f64]) {
        assert_eq!(e.len(), self.fiber_dim);
        assert_eq!(out.len(), self.fiber_dim);
        (self.fiber_map)(t_source, x_source, e, out);
    }

    /// Largest sampled fiber difference quotient
    /// `|l(t,x,e) - l(t,x,e')| / |e - e'|` over the chart and time range.
    pub fn sampled_fiber_contraction(
        &self,
        t_range: (f64, f64),
        base_box: &[(f64, f64)],
        e_radius: f64,
        samples: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.fiber_dim;
        let mut worst = 0.0f64;
        let mut e1 = vec![0.0; d];
        let mut e2 = vec![0.0; d];
        let mut f1 = vec![0.0; d];
        let mut f2 = vec![0.0; d];
        for _ in 0..samples {
            let t = rng.random_range(t_range.0..=t_range.1);
            let x: Vec<f64> = base_box
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect();
            for i in 0..d {
                e1[i] = rng.random_range(-e_radius..=e_radius);
                e2[i] = rng.random_range(-e_radius..=e_radius);
            }
            let dist: f64 = e1
                .iter()
                .zip(&e2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist < 1e-12 * e_radius {
                continue;
            }
            self.eval_fiber(t, &x, &e1, &mut f1);
            self.eval_fiber(t, &x, &e2, &mut f2);
            let image_dist: f64 = f1
                .iter()
                .zip(&f2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(image_dist / dist);
        }
        worst
    }

    /// Checks on boundary samples that the base map sends the chart boundary
    /// outside the closed chart (so the image covers the chart).
    pub fn check_overflowing(
        &self,
        t_range: (f64, f64),
        base_box: &[(f64, f64)],
        samples_per_face: usize,
        seed: u64,
    ) -> Result<(), GraphError> {
        let dim = self.base_map.dimension();
        if dim == 0 {
            return Ok(());
        }
        assert_eq!(base_box.len(), dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut image = vec![0.0; dim];
        for face_axis in 0..dim {
            for &face in &[base_box[face_axis].0, base_box[face_axis].1] {
                for _ in 0..samples_per_face {
                    let mut x: Vec<f64> = base_box
                        .iter()
                        .map(|&(lo, hi)| rng.random_range(lo..=hi))
                        .collect();
                    x[face_axis] = face;
                    let t = rng.random_range(t_range.0..=t_range.1);
                    self.base_map.eval(t, &x, &mut image);
                    let inside = image
                        .iter()
                        .zip(base_box)
                        .all(|(v, &(lo, hi))| *v > lo && *v < hi);
                    if inside {
                        return Err(GraphError::NotOverflowing(format!(
                            "boundary point {x:?} at t = {t} maps into the open chart"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for FiberBundleMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiberBundleMap")
            .field("base_map", &self.base_map)
            .field("fiber_dim", &self.fiber_dim)
            .finish_non_exhaustive()
    }
}

/// Convergence diagnostics of a section iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub final_increment: f64,
    pub invariance_residual: f64,
    /// Observed contraction factor (median of the trailing increment ratios).
    pub theta_estimate: f64,
    pub rho_bounds: RhoBounds,
    pub window: (f64, f64),
}

/// Tracks sup-norm increments of an iteration and estimates the contraction
/// factor from trailing ratios.
pub(crate) struct ConvergenceTracker {
    increments: Vec<f64>,
}

impl ConvergenceTracker {
    pub fn new() -> Self {
        Self {
            increments: Vec::new(),
        }
    }

    pub fn record(&mut self, increment: f64) {
        self.increments.push(increment);
    }

    pub fn last(&self) -> f64 {
        *self.increments.last().unwrap_or(&f64::INFINITY)
    }

    pub fn iterations(&self) -> usize {
        self.increments.len()
    }

    pub fn theta_estimate(&self) -> f64 {
        let n = self.increments.len();
        if n < 2 {
            return f64::NAN;
        }
        let mut ratios: Vec<f64> = self
            .increments
            .windows(2)
            .rev()
            .take(5)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        if ratios.is_empty() {
            return 0.0;
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ratios[ratios.len() / 2]
    }

    /// True once the trailing ratios show no real contraction.
    pub fn stalled(&self) -> bool {
        self.increments.len() >= 8 && self.theta_estimate() >= 0.999
    }
}

/// Iterates the bundle-map pullback from `initial` until the increment drops
/// below `tol` and the sampled invariance residual below `10 * tol`.
///
/// Each iteration writes the new section at every node `(t, y)` with `t` at
/// least one time step below the current window top, reading the previous
/// section at the base pullback of `(t, y)`; the valid window shrinks by
/// `|time_step|` per iteration and must stay above `required_top`.
pub fn invariant_section(
    bundle: &FiberBundleMap,
    weight: &Weight,
    initial: SectionGrid,
    required_top: f64,
    tol: f64,
    seed: u64,
) -> Result<(SectionGrid, IterationReport), GraphError> {
    assert_eq!(bundle.fiber_dim(), initial.fiber_dim(), "fiber dimension mismatch");
    assert_eq!(
        bundle.base_map().dimension(),
        initial.base_dim(),
        "base dimension mismatch"
    );
    let step = bundle.base_map().time_step();
    assert!(step < 0.0, "invariant sections propagate down a decreasing time window");

    let window = initial.window();
    weight.check_admissible(window.0, window.1)?;
    let base_box: Vec<(f64, f64)> = initial
        .base_axes()
        .iter()
        .map(|axis| (axis[0], *axis.last().unwrap()))
        .collect();
    let k = bundle.sampled_fiber_contraction(window, &base_box, 1.0, 64, seed ^ 0x5eed);
    if k >= 1.0 {
        return Err(GraphError::FiberNotContracting { k });
    }
    bundle.check_overflowing(window, &base_box, 16, seed ^ 0xb0d)?;

    // The pullback of each node through the base map does not depend on the
    // section, so solve for it once.
    let dim_base = initial.base_dim();
    let n_base = initial.n_base();
    let mut pullbacks: Vec<Option<Vec<f64>>> = vec![None; initial.n_t() * n_base];
    let mut y = vec![0.0; dim_base];
    for it in 0..initial.n_t() {
        let t = initial.t_nodes()[it];
        if t > window.1 + step {
            continue;
        }
        for ib in 0..n_base {
            initial.base_point(ib, &mut y);
            let x_src = if dim_base == 0 {
                Vec::new()
            } else {
                invert_map_step(bundle.base_map(), t, &y, &y, 1e-13_f64.max(tol * 1e-3), 60)
                    .map_err(|e| GraphError::BaseSolveFailed {
                        t,
                        detail: e.to_string(),
                    })?
            };
            for (d, &(lo, hi)) in x_src.iter().zip(&base_box) {
                let margin = 1e-9 * (hi - lo);
                if *d < lo - margin || *d > hi + margin {
                    return Err(GraphError::ChartEscape { t, coord: *d });
                }
            }
            pullbacks[it * n_base + ib] = Some(x_src);
        }
    }

    let mut cur = initial;
    let mut tracker = ConvergenceTracker::new();
    let mut e = vec![0.0; bundle.fiber_dim()];
    let mut fibered = vec![0.0; bundle.fiber_dim()];
    loop {
        let (w0, w1) = cur.window();
        let new_top = w1 + step;
        if new_top < required_top {
            return Err(GraphError::WindowExhausted {
                increment: tracker.last(),
                tol,
            });
        }
        let mut next = cur.clone();
        next.set_window(w0, new_top);
        let mut increment = 0.0f64;
        for it in next.window_node_range() {
            let t = next.t_nodes()[it];
            if t > new_top {
                continue;
            }
            let t_src = t - step;
            for ib in 0..n_base {
                let x_src = pullbacks[it * n_base + ib]
                    .as_ref()
                    .expect("pullback exists for window nodes");
                cur.eval(t_src, x_src, &mut e);
                bundle.eval_fiber(t_src, x_src, &e, &mut fibered);
                let slot = next.value_mut(it, ib);
                for (k, v) in fibered.iter().enumerate() {
                    increment = increment.max((v - slot[k]).abs());
                    slot[k] = *v;
                }
            }
        }
        tracker.record(increment);
        cur = next;

        if increment < tol {
            let residual = bundle_residual(bundle, &cur, 100, seed ^ 0x0b5);
            if residual < 10.0 * tol {
                let report = IterationReport {
                    iterations: tracker.increments.len(),
                    final_increment: increment,
                    invariance_residual: residual,
                    theta_estimate: tracker.theta_estimate(),
                    rho_bounds: cur.rho_bounds(weight),
                    window: cur.window(),
                };
                return Ok((cur, report));
            }
            if increment < tol * 0.1 {
                return Err(GraphError::ResidualAboveTolerance {
                    residual,
                    bound: 10.0 * tol,
                });
            }
        }
        if tracker.stalled() {
            return Err(GraphError::ContractionStalled {
                theta: tracker.theta_estimate(),
            });
        }
    }
}

/// Max mismatch between the section and its bundle pullback at random
/// interior points.
fn bundle_residual(bundle: &FiberBundleMap, section: &SectionGrid, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w0, w1) = section.window();
    let step = bundle.base_map().time_step();
    let dim_base = section.base_dim();
    let mut worst = 0.0f64;
    let mut e = vec![0.0; section.fiber_dim()];
    let mut pulled = vec![0.0; section.fiber_dim()];
    let mut own = vec![0.0; section.fiber_dim()];
    for _ in 0..samples {
        let t = rng.random_range(w0..=(w1 + step));
        let y: Vec<f64> = section
            .base_axes()
            .iter()
            .map(|axis| rng.random_range(axis[0]..=*axis.last().unwrap()))
            .collect();
        let x_src = if dim_base == 0 {
            Vec::new()
        } else {
            match invert_map_step(bundle.base_map(), t, &y, &y, 1e-12, 60) {
                Ok(x) => x,
                Err(_) => continue,
            }
        };
        section.eval(t - step, &x_src, &mut e);
        bundle.eval_fiber(t - step, &x_src, &e, &mut pulled);
        section.eval(t, &y, &mut own);
        for (a, b) in pulled.iter().zip(&own) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
