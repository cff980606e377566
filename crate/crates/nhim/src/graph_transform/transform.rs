//! Graph transform over an expanding base: perturbed unstable and stable
//! manifolds as fixed points of a section iteration.
//!
//! Conventions. A map's spatial coordinates are ordered as
//! `[tangent block, unstable block, stable block]` relative to its
//! stationary splitting. Unstable-manifold sections live over the
//! tangent-plus-unstable chart with stable fiber components;
//! stable-manifold sections live over the tangent-plus-stable chart with
//! unstable fibers and are produced by running the same engine on the
//! inverse map with the two normal blocks exchanged.
//!
//! One transform step writes the section at `(t, y)` by solving for the base
//! preimage `x` with `pi_base f(t_src, (x, sigma(t_src, x))) = y`, where
//! `t_src = t - time_step`, and taking the fiber part of the image; maps
//! that lower `t` therefore consume the valid window from the top, one time
//! step per iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bundle::ConvergenceTracker;
use super::{GraphError, RhoBounds, SectionGrid, Weight};
use crate::dynamics::{
    check_normal_hyperbolicity, inverse_map, time_one_map, DiscreteMap, HyperbolicityRates,
    Splitting, SplittingFrame, VectorField,
};

/// Stationary (autonomous) model near the trapped set: the unperturbed map
/// in chart coordinates together with its invariant splitting and the
/// normal-hyperbolicity order to enforce.
pub struct StationaryModel {
    pub map: DiscreteMap,
    pub splitting: Splitting,
    pub order: usize,
}

/// Knobs shared by the manifold constructions.
#[derive(Debug, Clone)]
pub struct ManifoldSettings {
    /// Cauchy tolerance for the section iteration (sup norm over nodes).
    pub tol: f64,
    /// Seed for residual and consistency sampling.
    pub seed: u64,
    /// Random graph points used for the invariance residual.
    pub residual_samples: usize,
    /// Iteration cap for loops whose window does not shrink.
    pub max_iterations: usize,
}

impl ManifoldSettings {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            seed: 0x6e68_696d,
            residual_samples: 100,
            max_iterations: 500,
        }
    }

    fn base_tol(&self) -> f64 {
        (self.tol * 1e-2).clamp(1e-13, 1e-9)
    }
}

/// Convergence and verification record of a manifold construction.
#[derive(Debug, Clone, Serialize)]
pub struct ManifoldReport {
    pub iterations: usize,
    pub final_increment: f64,
    pub invariance_residual: f64,
    /// Observed contraction factor of the iteration.
    pub theta_estimate: f64,
    /// `nu * max(1, 1/gamma_min)` from the stationary rates.
    pub theta_predicted: f64,
    pub rates: HyperbolicityRates,
    pub rho_bounds: RhoBounds,
    pub window: (f64, f64),
    /// Max field-tangency residual (flow constructions only).
    pub tangency_residual: Option<f64>,
}

fn base_box(grid: &SectionGrid) -> Vec<(f64, f64)> {
    grid.base_axes()
        .iter()
        .map(|axis| (axis[0], *axis.last().unwrap()))
        .collect()
}

/// Newton solve of the base equation at one target node, followed by the
/// fiber evaluation. `sigma` reads the current section at the source time.
#[allow(clippy::too_many_arguments)]
fn pull_graph_value(
    map: &DiscreteMap,
    d_base: usize,
    sigma: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    chart: &[(f64, f64)],
    t_target: f64,
    y_target: &[f64],
    x_warm: &mut [f64],
    base_tol: f64,
    fiber_out: &mut [f64],
) -> Result<(), GraphError> {
    let dim = map.dimension();
    let d_fiber = dim - d_base;
    let t_src = t_target - map.time_step();

    let mut z = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    let mut eval_at = |x: &[f64], residual: &mut [f64], fiber: Option<&mut [f64]>| {
        z[..d_base].copy_from_slice(x);
        sigma(t_src, x, &mut z[d_base..]);
        map.eval(t_src, &z, &mut w);
        for i in 0..d_base {
            residual[i] = w[i] - y_target[i];
        }
        if let Some(f) = fiber {
            f.copy_from_slice(&w[d_base..]);
        }
    };

    let clamp_into = |x: &mut [f64]| {
        for (v, &(lo, hi)) in x.iter_mut().zip(chart) {
            *v = v.clamp(lo, hi);
        }
    };

    let mut x = x_warm.to_vec();
    clamp_into(&mut x);
    let mut r = vec![0.0; d_base];
    let mut r_norm;
    eval_at(&x, &mut r, None);
    r_norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut jac = nalgebra::DMatrix::zeros(d_base, d_base);
    let mut rp = vec![0.0; d_base];
    let mut rm = vec![0.0; d_base];
    let mut iterations = 0;
    const MAX_NEWTON: usize = 40;
    while r_norm >= base_tol {
        if iterations >= MAX_NEWTON {
            return Err(GraphError::BaseSolveFailed {
                t: t_target,
                detail: format!("no convergence after {MAX_NEWTON} Newton steps ({r_norm:.3e})"),
            });
        }
        iterations += 1;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * (1.0 + norm);
        let mut xs = x.clone();
        for j in 0..d_base {
            let orig = xs[j];
            xs[j] = orig + h;
            clamp_into(&mut xs);
            eval_at(&xs, &mut rp, None);
            xs[j] = orig - h;
            clamp_into(&mut xs);
            eval_at(&xs, &mut rm, None);
            xs[j] = orig;
            for i in 0..d_base {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(&r);
        let delta = jac.clone().lu().solve(&rhs).ok_or(GraphError::BaseSolveFailed {
            t: t_target,
            detail: "singular base Jacobian".into(),
        })?;
        let mut alpha = 1.0;
        let mut improved = false;
        let mut x_trial = vec![0.0; d_base];
        for _ in 0..=8 {
            for i in 0..d_base {
                x_trial[i] = x[i] - alpha * delta[i];
            }
            clamp_into(&mut x_trial);
            eval_at(&x_trial, &mut rp, None);
            let trial = rp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if trial < r_norm {
                x.copy_from_slice(&x_trial);
                r.copy_from_slice(&rp);
                r_norm = trial;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            return Err(GraphError::BaseSolveFailed {
                t: t_target,
                detail: format!("Newton stalled at residual {r_norm:.3e}"),
            });
        }
    }

    // Interior solutions certify the chart did not pinch; on-boundary
    // solutions mean the target has no preimage inside.
    for (v, &(lo, hi)) in x.iter().zip(chart) {
        let margin = 1e-8 * (hi - lo);
        if *v <= lo + margin || *v >= hi - margin {
            return Err(GraphError::ChartEscape {
                t: t_target,
                coord: *v,
            });
        }
    }

    let mut fiber = vec![0.0; d_fiber];
    eval_at(&x, &mut r, Some(&mut fiber));
    fiber_out.copy_from_slice(&fiber);
    x_warm.copy_from_slice(&x);
    Ok(())
}

/// One graph-transform step of `map` applied to `section`.
///
/// Writes every node whose source time lies in the current window; for maps
/// that lower `t` the valid window shrinks by `|time_step|` from the top.
/// Nodes without a source (stable-manifold seed slabs) keep their values.
pub fn graph_transform_step(
    map: &DiscreteMap,
    section: &SectionGrid,
    base_tol: f64,
) -> Result<SectionGrid, GraphError> {
    let mut warm = warm_starts(section);
    let (next, _) = transform_once(map, section, &mut warm, base_tol)?;
    Ok(next)
}

fn warm_starts(section: &SectionGrid) -> Vec<f64> {
    let d_base = section.base_dim();
    let mut warm = vec![0.0; section.n_t() * section.n_base() * d_base];
    let mut y = vec![0.0; d_base];
    for it in 0..section.n_t() {
        for ib in 0..section.n_base() {
            section.base_point(ib, &mut y);
            let o = (it * section.n_base() + ib) * d_base;
            warm[o..o + d_base].copy_from_slice(&y);
        }
    }
    warm
}

fn transform_once(
    map: &DiscreteMap,
    section: &SectionGrid,
    warm: &mut [f64],
    base_tol: f64,
) -> Result<(SectionGrid, f64), GraphError> {
    let d_base = section.base_dim();
    let d_fiber = section.fiber_dim();
    assert_eq!(map.dimension(), d_base + d_fiber, "map/section dimension mismatch");
    let step = map.time_step();
    assert!(step != 0.0, "graph transform needs a nonzero time step");
    let (w0, w1) = section.window();
    let chart = base_box(section);

    let mut next = section.clone();
    if step < 0.0 {
        if w1 + step <= w0 {
            return Err(GraphError::WindowExhausted {
                increment: f64::INFINITY,
                tol: f64::NAN,
            });
        }
        next.set_window(w0, w1 + step);
    }

    let n_base = section.n_base();
    let mut y = vec![0.0; d_base];
    let mut fiber = vec![0.0; d_fiber];
    let mut increment = 0.0f64;
    let fuzz = 1e-9 * (w1 - w0).max(1.0);
    for it in next.window_node_range() {
        let t = next.t_nodes()[it];
        let t_src = t - step;
        if t_src < w0 - fuzz || t_src > w1 + fuzz {
            continue;
        }
        for ib in 0..n_base {
            next.base_point(ib, &mut y);
            let o = (it * n_base + ib) * d_base;
            let mut sigma = |ts: f64, x: &[f64], out: &mut [f64]| section.eval(ts, x, out);
            pull_graph_value(
                map,
                d_base,
                &mut sigma,
                &chart,
                t,
                &y,
                &mut warm[o..o + d_base],
                base_tol,
                &mut fiber,
            )?;
            let slot = next.value_mut(it, ib);
            for (k, v) in fiber.iter().enumerate() {
                increment = increment.max((v - slot[k]).abs());
                slot[k] = *v;
            }
        }
    }
    Ok((next, increment))
}

/// Chart half-width used in the `rho(T0) < eps^2` precondition: the largest
/// absolute base-axis endpoint.
fn chart_half_width(grid: &SectionGrid) -> f64 {
    grid.base_axes()
        .iter()
        .flat_map(|a| [a[0].abs(), a.last().unwrap().abs()])
        .fold(0.0, f64::max)
}

/// Builds the perturbed unstable manifold as the fixed point of the graph
/// transform, iterating from the section stored in `initial` (normally
/// zero).
///
/// `initial`'s window must extend above `required_top` by enough time steps
/// to cover the contraction; the result is reported on the consumed window.
pub fn unstable_manifold(
    map: &DiscreteMap,
    stationary: &StationaryModel,
    weight: &Weight,
    initial: SectionGrid,
    required_top: f64,
    settings: &ManifoldSettings,
) -> Result<(SectionGrid, ManifoldReport), GraphError> {
    let splitting = &stationary.splitting;
    assert_eq!(
        splitting.dim_tangent() + splitting.dim_unstable(),
        initial.base_dim(),
        "section base must match tangent + unstable dimensions"
    );
    assert_eq!(
        splitting.dim_stable(),
        initial.fiber_dim(),
        "section fiber must match stable dimension"
    );
    assert!(map.time_step() < 0.0, "unstable manifolds need maps that lower t");

    let (w0, w1) = initial.window();
    weight.check_admissible(w0, w1)?;
    let rates = check_normal_hyperbolicity(
        &stationary.map,
        splitting,
        stationary.order.max(1),
        w1,
    )?;
    let eps = chart_half_width(&initial);
    let rho_t0 = weight.eval(w0);
    if rho_t0 >= eps * eps {
        return Err(GraphError::WindowStartTooEarly {
            rho_t0,
            eps_sq: eps * eps,
        });
    }

    let theta_predicted = rates.nu * 1.0f64.max(1.0 / rates.gamma_min);
    let mut warm = warm_starts(&initial);
    let mut cur = initial;
    let mut tracker = ConvergenceTracker::new();

    loop {
        if cur.window().1 + map.time_step() < required_top {
            return Err(GraphError::WindowExhausted {
                increment: tracker.last(),
                tol: settings.tol,
            });
        }
        let (next, increment) = transform_once(map, &cur, &mut warm, settings.base_tol())?;
        tracker.record(increment);
        cur = next;

        if increment < settings.tol {
            let residual =
                verify_invariance(map, &cur, settings.residual_samples, settings.seed);
            if residual < 10.0 * settings.tol {
                let report = ManifoldReport {
                    iterations: tracker.iterations(),
                    final_increment: increment,
                    invariance_residual: residual,
                    theta_estimate: tracker.theta_estimate(),
                    theta_predicted,
                    rates,
                    rho_bounds: cur.rho_bounds(weight),
                    window: cur.window(),
                    tangency_residual: None,
                };
                return Ok((cur, report));
            }
            if increment < settings.tol * 0.1 {
                return Err(GraphError::ResidualAboveTolerance {
                    residual,
                    bound: 10.0 * settings.tol,
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

/// Stable manifold from a seed slab: the engine runs on the inverse map with
/// the unstable and stable blocks exchanged, while the seed pins the section
/// on the initial slab of width `1.5 * |time_step|`.
///
/// `initial`'s base axes span the stable chart; fiber values are unstable
/// coordinates. The seed must agree with its own image under the inverse map
/// on the overlap of the slab, within `10 * tol`.
pub fn stable_manifold(
    map: &DiscreteMap,
    stationary: &StationaryModel,
    weight: &Weight,
    initial: SectionGrid,
    seed_section: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    settings: &ManifoldSettings,
) -> Result<(SectionGrid, ManifoldReport), GraphError> {
    let splitting = &stationary.splitting;
    let (dt, du, ds) = (
        splitting.dim_tangent(),
        splitting.dim_unstable(),
        splitting.dim_stable(),
    );
    assert_eq!(initial.base_dim(), dt + ds, "stable sections live over tangent + stable");
    assert_eq!(initial.fiber_dim(), du, "stable sections have unstable fibers");
    assert!(map.time_step() < 0.0, "expected a map that lowers t");
    let dim = dt + du + ds;

    // Permutation between map coordinates [T U S] and engine coordinates
    // [T S U].
    let to_map: Vec<usize> = (0..dim)
        .map(|i| {
            if i < dt {
                i
            } else if i < dt + ds {
                i + du
            } else {
                i - ds
            }
        })
        .collect();
    let permute = move |src: &[f64], dst: &mut [f64], perm: &[usize]| {
        for (i, &p) in perm.iter().enumerate() {
            dst[i] = src[p];
        }
    };
    let to_engine: Vec<usize> = {
        let mut inv = vec![0usize; dim];
        for (i, &p) in to_map.iter().enumerate() {
            inv[p] = i;
        }
        inv
    };

    let f_inv = inverse_map(map, settings.base_tol() * 1e-1, 80);
    let engine_map = {
        let to_map = to_map.clone();
        let to_engine = to_engine.clone();
        let f_inv = f_inv.clone();
        DiscreteMap::new(dim, f_inv.time_step(), move |t, x, out| {
            let mut xm = vec![0.0; dim];
            let mut ym = vec![0.0; dim];
            permute(x, &mut xm, &to_map);
            f_inv.eval(t, &xm, &mut ym);
            permute(&ym, out, &to_engine);
        })
    };
    let stationary_inv = inverse_map(&stationary.map, settings.base_tol() * 1e-1, 80);
    let engine_stationary = {
        let to_map = to_map.clone();
        let to_engine = to_engine.clone();
        DiscreteMap::new(dim, stationary_inv.time_step(), move |t, x, out| {
            let mut xm = vec![0.0; dim];
            let mut ym = vec![0.0; dim];
            permute(x, &mut xm, &to_map);
            stationary_inv.eval(t, &xm, &mut ym);
            permute(&ym, out, &to_engine);
        })
    };
    let engine_splitting = Splitting::new(
        splitting
            .frames()
            .iter()
            .map(|fr| {
                let perm_rows = |m: &nalgebra::DMatrix<f64>| {
                    let mut out = nalgebra::DMatrix::zeros(dim, m.ncols());
                    for i in 0..dim {
                        for j in 0..m.ncols() {
                            out[(i, j)] = m[(to_map[i], j)];
                        }
                    }
                    out
                };
                let mut base = vec![0.0; dim];
                for i in 0..dim {
                    base[i] = fr.base_point[to_map[i]];
                }
                SplittingFrame {
                    base_point: base,
                    tangent: perm_rows(&fr.tangent),
                    unstable: perm_rows(&fr.stable),
                    stable: perm_rows(&fr.unstable),
                }
            })
            .collect(),
    )?;

    let (w0, w1) = initial.window();
    weight.check_admissible(w0, w1)?;
    let rates = check_normal_hyperbolicity(
        &engine_stationary,
        &engine_splitting,
        stationary.order.max(1),
        w0,
    )?;
    let theta_predicted = rates.nu * 1.0f64.max(1.0 / rates.gamma_min);

    let step = engine_map.time_step();
    debug_assert!(step > 0.0);
    let slab_end = w0 + 1.5 * step;
    let chart = base_box(&initial);

    // Seed consistency on the overlap: points in [w0 + step, slab_end] must
    // reproduce the seed when pulled through the engine map from the seed.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
        let mut worst = 0.0f64;
        let mut fiber = vec![0.0; du];
        let mut warm = vec![0.0; dt + ds];
        for _ in 0..32 {
            let t = rng.random_range((w0 + step)..=slab_end);
            let y: Vec<f64> = chart.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            warm.copy_from_slice(&y);
            let mut sigma = |ts: f64, x: &[f64], out: &mut [f64]| {
                out.copy_from_slice(&seed_section(ts, x));
            };
            match pull_graph_value(
                &engine_map,
                dt + ds,
                &mut sigma,
                &chart,
                t,
                &y,
                &mut warm,
                settings.base_tol(),
                &mut fiber,
            ) {
                Ok(()) => {
                    let own = seed_section(t, &y);
                    for (a, b) in fiber.iter().zip(&own) {
                        worst = worst.max((a - b).abs());
                    }
                }
                Err(GraphError::ChartEscape { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        if worst > 10.0 * settings.tol {
            return Err(GraphError::SeedInconsistent {
                mismatch: worst,
                bound: 10.0 * settings.tol,
            });
        }
    }

    let mut cur = initial;
    let mut y = vec![0.0; dt + ds];
    for it in 0..cur.n_t() {
        let t = cur.t_nodes()[it];
        if t <= slab_end {
            for ib in 0..cur.n_base() {
                cur.base_point(ib, &mut y);
                let v = seed_section(t, &y);
                cur.value_mut(it, ib).copy_from_slice(&v);
            }
        }
    }

    let mut warm = warm_starts(&cur);
    let mut tracker = ConvergenceTracker::new();
    let mut fiber = vec![0.0; du];
    for _ in 0..settings.max_iterations {
        let mut next = cur.clone();
        let mut increment = 0.0f64;
        for it in 0..cur.n_t() {
            let t = cur.t_nodes()[it];
            if t <= slab_end {
                continue;
            }
            let t_src = t - step;
            if t_src < w0 || t_src > w1 {
                continue;
            }
            for ib in 0..cur.n_base() {
                next.base_point(ib, &mut y);
                let o = (it * cur.n_base() + ib) * (dt + ds);
                let mut sigma = |ts: f64, x: &[f64], out: &mut [f64]| cur.eval(ts, x, out);
                pull_graph_value(
                    &engine_map,
                    dt + ds,
                    &mut sigma,
                    &chart,
                    t,
                    &y,
                    &mut warm[o..o + dt + ds],
                    settings.base_tol(),
                    &mut fiber,
                )?;
                let slot = next.value_mut(it, ib);
                for (k, v) in fiber.iter().enumerate() {
                    increment = increment.max((v - slot[k]).abs());
                    slot[k] = *v;
                }
            }
        }
        tracker.record(increment);
        cur = next;

        if increment < settings.tol {
            let residual = stable_residual(
                &engine_map,
                &cur,
                slab_end,
                settings.residual_samples,
                settings.seed,
            );
            if residual < 10.0 * settings.tol {
                let report = ManifoldReport {
                    iterations: tracker.iterations(),
                    final_increment: increment,
                    invariance_residual: residual,
                    theta_estimate: tracker.theta_estimate(),
                    theta_predicted,
                    rates,
                    rho_bounds: cur.rho_bounds(weight),
                    window: cur.window(),
                    tangency_residual: None,
                };
                return Ok((cur, report));
            }
            if increment < settings.tol * 0.1 {
                return Err(GraphError::ResidualAboveTolerance {
                    residual,
                    bound: 10.0 * settings.tol,
                });
            }
        }
        if tracker.stalled() {
            return Err(GraphError::ContractionStalled {
                theta: tracker.theta_estimate(),
            });
        }
    }
    Err(GraphError::WindowExhausted {
        increment: tracker.last(),
        tol: settings.tol,
    })
}

/// Invariance residual of a stable section, sampled above the seed slab.
fn stable_residual(
    engine_map: &DiscreteMap,
    section: &SectionGrid,
    slab_end: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = engine_map.time_step();
    let (w0, w1) = section.window();
    let d_base = section.base_dim();
    let d_fiber = section.fiber_dim();
    let lo = (slab_end + step).min(w1);
    let mut worst = 0.0f64;
    let mut z = vec![0.0; d_base + d_fiber];
    let mut w = vec![0.0; d_base + d_fiber];
    let mut own = vec![0.0; d_fiber];
    let mut attempts = 0;
    let mut used = 0;
    while used < samples && attempts < samples * 20 {
        attempts += 1;
        let t = rng.random_range(lo.max(w0)..=(w1 - step).min(w1));
        let y: Vec<f64> = section
            .base_axes()
            .iter()
            .map(|a| rng.random_range(a[0]..=*a.last().unwrap()))
            .collect();
        z[..d_base].copy_from_slice(&y);
        section.eval(t, &y, &mut z[d_base..]);
        engine_map.eval(t, &z, &mut w);
        let t_img = t + step;
        if t_img > w1 {
            continue;
        }
        let inside = w[..d_base]
            .iter()
            .zip(section.base_axes())
            .all(|(v, a)| *v >= a[0] && *v <= *a.last().unwrap());
        if !inside {
            continue;
        }
        section.eval(t_img, &w[..d_base], &mut own);
        for (a, b) in w[d_base..].iter().zip(&own) {
            worst = worst.max((a - b).abs());
        }
        used += 1;
    }
    worst
}

/// Unstable manifold of a nonautonomous flow with `V t = -1`: reduces to the
/// time-one map, runs the graph transform, and verifies that the field is
/// tangent to the computed graph.
pub fn flow_unstable_manifold(
    field: &VectorField,
    stationary: &StationaryModel,
    weight: &Weight,
    initial: SectionGrid,
    required_top: f64,
    settings: &ManifoldSettings,
) -> Result<(SectionGrid, ManifoldReport), GraphError> {
    if field.time_component() != -1.0 {
        return Err(GraphError::TimeConvention {
            time_component: field.time_component(),
        });
    }
    // One decade below the base-solve tolerance, so integration error never
    // becomes the floor the Newton solves stall against.
    let ode_tol = (settings.tol * 1e-3).clamp(1e-13, 1e-10);
    let map = time_one_map(field, ode_tol);
    let (section, mut report) =
        unstable_manifold(&map, stationary, weight, initial, required_top, settings)?;

    let tangency = tangency_residual(field, &section, 40, settings.seed ^ 0x7a6);
    if tangency > 10.0 * settings.tol {
        return Err(GraphError::TangencyFailed {
            residual: tangency,
            bound: 10.0 * settings.tol,
        });
    }
    report.tangency_residual = Some(tangency);
    Ok((section, report))
}

/// Max norm of the normal component of the field along the graph, at random
/// sample points: `|V_fiber - Vt d_t sigma - V_base . grad_y sigma|`.
fn tangency_residual(field: &VectorField, section: &SectionGrid, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w0, w1) = section.window();
    let d_base = section.base_dim();
    let d_fiber = section.fiber_dim();
    let mut worst = 0.0f64;
    let mut z = vec![0.0; d_base + d_fiber];
    let mut v = vec![0.0; d_base + d_fiber];
    let mut sp = vec![0.0; d_fiber];
    let mut sm = vec![0.0; d_fiber];

    let span = w1 - w0;
    let h_t = (span * 1e-4).clamp(1e-6, 0.5);
    // FD sample points y +- h_y must stay inside the chart.
    let h_ys: Vec<f64> = section
        .base_axes()
        .iter()
        .map(|a| 0.25 * (a[1] - a[0]))
        .collect();
    for _ in 0..samples {
        let t = rng.random_range((w0 + h_t)..=(w1 - h_t));
        let y: Vec<f64> = section
            .base_axes()
            .iter()
            .zip(&h_ys)
            .map(|(a, h_y)| {
                let (lo, hi) = (a[0], *a.last().unwrap());
                let pad = 0.01 * (hi - lo) + h_y;
                rng.random_range((lo + pad)..=(hi - pad))
            })
            .collect();
        z[..d_base].copy_from_slice(&y);
        section.eval(t, &y, &mut z[d_base..]);
        field.eval(t, &z, &mut v);

        // d sigma / dt.
        section.eval(t + h_t, &y, &mut sp);
        section.eval(t - h_t, &y, &mut sm);
        let mut normal = vec![0.0; d_fiber];
        for k in 0..d_fiber {
            normal[k] = v[d_base + k] - field.time_component() * (sp[k] - sm[k]) / (2.0 * h_t);
        }
        // Base-gradient terms.
        let mut yp = y.clone();
        for d in 0..d_base {
            let h_y = h_ys[d];
            let orig = yp[d];
            yp[d] = orig + h_y;
            section.eval(t, &yp, &mut sp);
            yp[d] = orig - h_y;
            section.eval(t, &yp, &mut sm);
            yp[d] = orig;
            for k in 0..d_fiber {
                normal[k] -= v[d] * (sp[k] - sm[k]) / (2.0 * h_y);
            }
        }
        for n in &normal {
            worst = worst.max(n.abs());
        }
    }
    worst
}

/// Max distance between the pushed-forward graph and the section itself at
/// random graph points: `|pi_fiber f(t, y, sigma(t,y)) - sigma(f_base(t,y))|`.
pub fn verify_invariance(map: &DiscreteMap, section: &SectionGrid, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = map.time_step();
    let (w0, w1) = section.window();
    let d_base = section.base_dim();
    let d_fiber = section.fiber_dim();
    let (t_lo, t_hi) = if step < 0.0 {
        (w0 - step, w1)
    } else {
        (w0, w1 - step)
    };
    let mut worst = 0.0f64;
    let mut z = vec![0.0; d_base + d_fiber];
    let mut w = vec![0.0; d_base + d_fiber];
    let mut own = vec![0.0; d_fiber];
    let mut used = 0;
    let mut attempts = 0;
    while used < samples && attempts < samples * 20 {
        attempts += 1;
        let t = rng.random_range(t_lo..=t_hi);
        let y: Vec<f64> = section
            .base_axes()
            .iter()
            .map(|a| rng.random_range(a[0]..=*a.last().unwrap()))
            .collect();
        z[..d_base].copy_from_slice(&y);
        section.eval(t, &y, &mut z[d_base..]);
        map.eval(t, &z, &mut w);
        let inside = w[..d_base]
            .iter()
            .zip(section.base_axes())
            .all(|(v, a)| *v >= a[0] && *v <= *a.last().unwrap());
        if !inside {
            continue;
        }
        section.eval(t + step, &w[..d_base], &mut own);
        for (a, b) in w[d_base..].iter().zip(&own) {
            worst = worst.max((a - b).abs());
        }
        used += 1;
    }
    worst
}

/// Power-law decay fit of a section's sup norm over time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    /// Exponent from the log-log least-squares slope.
    pub alpha_fit: f64,
    /// Envelope constant `max_t sup|sigma| * t^alpha_fit`.
    pub c_fit: f64,
    pub n_points: usize,
}

/// Fits `sup_y |sigma(t, y)| ~ C t^(-alpha)` over window nodes in
/// `[t_lo, t_hi]` by least squares in log-log coordinates.
pub fn fit_decay_rate(section: &SectionGrid, t_lo: f64, t_hi: f64) -> Result<DecayFit, GraphError> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for it in section.window_node_range() {
        let t = section.t_nodes()[it];
        if t < t_lo || t > t_hi || t <= 0.0 {
            continue;
        }
        let s = section.sup_at_node(it);
        if s > 0.0 {
            pts.push((t, s));
        }
    }
    if pts.is_empty() {
        return Err(GraphError::AllZero);
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, s) in &pts {
        let (x, y) = (t.ln(), s.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let alpha_fit = -slope;
    let c_fit = pts
        .iter()
        .map(|&(t, s)| s * t.powf(alpha_fit))
        .fold(0.0f64, f64::max);
    Ok(DecayFit {
        alpha_fit,
        c_fit,
        n_points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_transform::Interpolation;
    use nalgebra::DMatrix;

    fn rho(t: f64) -> f64 {
        (1.0 + t * t).powf(-0.5)
    }

    /// Shift model: `f(t, (x, s)) = (t - 1, 2x, s/2 + rho(t))`. The fixed
    /// section is the geometric series `sum_j 2^-j rho(t + 1 + j)`, which we
    /// evaluate by brute force.
    fn shift_series(t: f64) -> f64 {
        (0..300).map(|j| 2.0f64.powi(-j) * rho(t + 1.0 + j as f64)).sum()
    }

    fn toy_map() -> DiscreteMap {
        DiscreteMap::new(2, -1.0, |t, x, out| {
            out[0] = 2.0 * x[0];
            out[1] = 0.5 * x[1] + rho(t);
        })
    }

    fn saddle_model() -> StationaryModel {
        let map = DiscreteMap::new(2, -1.0, |_, x, out| {
            out[0] = 2.0 * x[0];
            out[1] = 0.5 * x[1];
        });
        let frame = SplittingFrame {
            base_point: vec![0.0, 0.0],
            tangent: DMatrix::zeros(2, 0),
            unstable: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            stable: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        };
        StationaryModel {
            map,
            splitting: Splitting::new(vec![frame]).unwrap(),
            order: 2,
        }
    }

    fn toy_grid(t0: f64, t1: f64, n_t: usize) -> SectionGrid {
        let t_nodes: Vec<f64> = (0..n_t)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n_t - 1) as f64)
            .collect();
        let axis: Vec<f64> = (0..5).map(|i| -0.5 + 0.25 * i as f64).collect();
        SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap()
    }

    fn run_toy_unstable(initial: SectionGrid) -> (SectionGrid, ManifoldReport) {
        unstable_manifold(
            &toy_map(),
            &saddle_model(),
            &Weight::power_law(1.0),
            initial,
            200.0,
            &ManifoldSettings::new(1e-10),
        )
        .unwrap()
    }

    #[test]
    fn toy_unstable_manifold_matches_series() {
        let (section, report) = run_toy_unstable(toy_grid(100.0, 240.0, 141));
        assert!(report.window.1 >= 200.0);
        assert!(report.invariance_residual < 1e-9);
        assert!((report.theta_estimate - 0.5).abs() < 0.05);
        assert!((report.theta_predicted - 0.5).abs() < 1e-9);
        assert!((report.rates.lambda - 2.0).abs() < 1e-6);
        let mut out = [0.0];
        for it in section.window_node_range() {
            let t = section.t_nodes()[it];
            if t > 200.0 {
                continue;
            }
            for &x in &[-0.5, -0.1, 0.3] {
                section.eval(t, &[x], &mut out);
                assert!(
                    (out[0] - shift_series(t)).abs() < 1e-8,
                    "t = {t}, x = {x}: {} vs {}",
                    out[0],
                    shift_series(t)
                );
            }
        }
    }

    #[test]
    fn toy_unstable_manifold_is_unique() {
        let (a, _) = run_toy_unstable(toy_grid(100.0, 240.0, 141));
        let mut biased = toy_grid(100.0, 240.0, 141);
        biased.fill_with(|t, _| vec![0.04 * (0.1 * t).sin()]);
        let (b, _) = run_toy_unstable(biased);
        let mut va = [0.0];
        let mut vb = [0.0];
        for it in a.window_node_range() {
            let t = a.t_nodes()[it];
            if t > 200.0 {
                continue;
            }
            a.eval(t, &[0.2], &mut va);
            b.eval(t, &[0.2], &mut vb);
            assert!((va[0] - vb[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn single_step_writes_pullback_and_shrinks_window() {
        let section = toy_grid(100.0, 140.0, 41);
        let next = graph_transform_step(&toy_map(), &section, 1e-12).unwrap();
        assert_eq!(next.window(), (100.0, 139.0));
        let mut out = [0.0];
        for it in next.window_node_range() {
            let t = next.t_nodes()[it];
            next.eval(t, &[0.25], &mut out);
            assert!((out[0] - rho(t + 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn early_window_start_is_rejected() {
        let t_nodes: Vec<f64> = (0..41).map(|i| 1.0 + i as f64).collect();
        let axis: Vec<f64> = (0..5).map(|i| -0.5 + 0.25 * i as f64).collect();
        let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap();
        let err = unstable_manifold(
            &toy_map(),
            &saddle_model(),
            &Weight::power_law(1.0),
            grid,
            10.0,
            &ManifoldSettings::new(1e-10),
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::WindowStartTooEarly { .. }));
    }

    /// Inverted shift model in `[unstable, stable]` order:
    /// `f(t, (u, v)) = (t - 1, 2u + rho(t), v/2)`. Pulled through the
    /// inverse map, the stable section over `v` is
    /// `-sum_j 2^-(j+1) rho(t - j)`.
    fn stable_toy_map() -> DiscreteMap {
        DiscreteMap::new(2, -1.0, |t, x, out| {
            out[0] = 2.0 * x[0] + rho(t);
            out[1] = 0.5 * x[1];
        })
    }

    fn stable_series(t: f64) -> f64 {
        -(0..60).map(|j| 2.0f64.powi(-(j + 1)) * rho(t - j as f64)).sum::<f64>()
    }

    #[test]
    fn toy_stable_manifold_matches_orbit_sum() {
        let t_nodes: Vec<f64> = (0..61).map(|i| 100.0 + i as f64).collect();
        let axis: Vec<f64> = (0..5).map(|i| -0.5 + 0.25 * i as f64).collect();
        let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap();
        let (section, report) = stable_manifold(
            &stable_toy_map(),
            &saddle_model(),
            &Weight::power_law(1.0),
            grid,
            &|t, _| vec![stable_series(t)],
            &ManifoldSettings::new(1e-10),
        )
        .unwrap();
        assert!(report.invariance_residual < 1e-9);
        assert!((report.theta_estimate - 0.5).abs() < 0.05);
        let mut out = [0.0];
        for it in section.window_node_range() {
            let t = section.t_nodes()[it];
            for &x in &[-0.4, 0.0, 0.5] {
                section.eval(t, &[x], &mut out);
                assert!(
                    (out[0] - stable_series(t)).abs() < 1e-9,
                    "t = {t}: {} vs {}",
                    out[0],
                    stable_series(t)
                );
            }
        }
    }

    #[test]
    fn inconsistent_seed_is_rejected() {
        let t_nodes: Vec<f64> = (0..61).map(|i| 100.0 + i as f64).collect();
        let axis: Vec<f64> = (0..5).map(|i| -0.5 + 0.25 * i as f64).collect();
        let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap();
        let err = stable_manifold(
            &stable_toy_map(),
            &saddle_model(),
            &Weight::power_law(1.0),
            grid,
            &|_, _| vec![0.0],
            &ManifoldSettings::new(1e-8),
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::SeedInconsistent { .. }));
    }

    /// Linear flow with decaying forcing: `V = -d_t + (x ln 2) d_x +
    /// (-s ln 2 + <t>^-2) d_s`. Along characteristics the invariant section
    /// solves `sigma' = sigma ln 2 - <t>^-2`, whose decaying solution is the
    /// convolution below; Simpson quadrature gives an independent value.
    fn flow_series(t: f64) -> f64 {
        let ln2 = std::f64::consts::LN_2;
        let f = |u: f64| (-ln2 * (u - t)).exp() / (1.0 + u * u);
        let (a, b, n) = (t, t + 60.0, 12_000usize);
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn flow_unstable_manifold_matches_quadrature() {
        let ln2 = std::f64::consts::LN_2;
        let field = VectorField::new(2, -1.0, move |t, x, out| {
            out[0] = ln2 * x[0];
            out[1] = -ln2 * x[1] + 1.0 / (1.0 + t * t);
        });
        let t_nodes: Vec<f64> = (0..37).map(|i| 100.0 + i as f64).collect();
        let axis: Vec<f64> = (0..3).map(|i| -0.5 + 0.5 * i as f64).collect();
        let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap();
        let (section, report) = flow_unstable_manifold(
            &field,
            &saddle_model(),
            &Weight::power_law(2.0),
            grid,
            106.0,
            &ManifoldSettings::new(1e-8),
        )
        .unwrap();
        let tangency = report.tangency_residual.unwrap();
        assert!(tangency < 1e-7, "tangency {tangency}");
        let mut out = [0.0];
        for &t in &[100.0, 101.5, 103.0, 105.0] {
            section.eval(t, &[0.1], &mut out);
            assert!(
                (out[0] - flow_series(t)).abs() < 1e-7,
                "t = {t}: {} vs {}",
                out[0],
                flow_series(t)
            );
        }
    }

    #[test]
    fn flow_requires_unit_negative_time_component() {
        let field = VectorField::new(2, 1.0, |_, x, out| {
            out[0] = x[0];
            out[1] = -x[1];
        });
        let grid = toy_grid(100.0, 140.0, 41);
        let err = flow_unstable_manifold(
            &field,
            &saddle_model(),
            &Weight::power_law(1.0),
            grid,
            110.0,
            &ManifoldSettings::new(1e-8),
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::TimeConvention { .. }));
    }

    #[test]
    fn decay_fit_recovers_power_law() {
        let t_nodes: Vec<f64> = (0..101).map(|i| 100.0 + i as f64).collect();
        let axis = vec![-0.5, 0.0, 0.5];
        let mut grid =
            SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap();
        grid.fill_with(|t, _| vec![3.0 * t.powf(-1.5)]);
        let fit = fit_decay_rate(&grid, 100.0, 200.0).unwrap();
        assert!((fit.alpha_fit - 1.5).abs() < 1e-6);
        assert!((fit.c_fit - 3.0).abs() < 1e-6);
        assert_eq!(fit.n_points, 101);

        let zeros =
            SectionGrid::zeros(vec![1.0, 2.0, 3.0, 4.0], vec![vec![0.0]], 1, Interpolation::Cubic);
        assert!(matches!(
            fit_decay_rate(&zeros.unwrap(), 0.0, 10.0),
            Err(GraphError::AllZero)
        ));
    }
}
