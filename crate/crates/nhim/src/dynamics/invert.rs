//! Local inversion of one map step by damped Newton iteration.

use super::{map_jacobian, DiscreteMap, DynamicsError};

/// Halvings of the Newton step attempted before declaring the iteration
/// non-contracting.
const MAX_HALVINGS: usize = 8;

/// Solves `map(t_source, x) = y_target` for `x`, where the source time is
/// `t_target - map.time_step()` (the unique time from which the map lands at
/// `t_target`).
///
/// Newton steps use finite-difference Jacobians; each step is halved until
/// the residual decreases. Residuals are measured in the max norm and the
/// iteration succeeds once the residual drops below `tol`.
pub fn invert_map_step(
    map: &DiscreteMap,
    t_target: f64,
    y_target: &[f64],
    guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, DynamicsError> {
    let dim = map.dimension();
    assert_eq!(y_target.len(), dim);
    assert_eq!(guess.len(), dim);
    let t_source = t_target - map.time_step();

    let residual = |x: &[f64], out: &mut [f64]| {
        map.eval(t_source, x, out);
        for (o, y) in out.iter_mut().zip(y_target) {
            *o -= y;
        }
    };
    let max_norm = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));

    let mut x = guess.to_vec();
    let mut r = vec![0.0; dim];
    residual(&x, &mut r);
    let mut r_norm = max_norm(&r);

    for _ in 0..max_iter {
        if r_norm < tol {
            return Ok(x);
        }
        let jac = map_jacobian(map, t_source, &x);
        let rhs = nalgebra::DVector::from_column_slice(&r);
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or(DynamicsError::NoContraction { residual: r_norm })?;

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut x_trial = vec![0.0; dim];
        let mut r_trial = vec![0.0; dim];
        for _ in 0..=MAX_HALVINGS {
            for i in 0..dim {
                x_trial[i] = x[i] - alpha * delta[i];
            }
            residual(&x_trial, &mut r_trial);
            let trial_norm = max_norm(&r_trial);
            if trial_norm < r_norm {
                x.copy_from_slice(&x_trial);
                r.copy_from_slice(&r_trial);
                r_norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(DynamicsError::NoContraction { residual: r_norm });
        }
    }
    if r_norm < tol {
        Ok(x)
    } else {
        Err(DynamicsError::MaxIter {
            iterations: max_iter,
            residual: r_norm,
        })
    }
}

/// The inverse of `map` as a `DiscreteMap` with the opposite time step.
/// Every evaluation performs one Newton solve seeded at the input point;
/// it panics when the solve fails, since the callers in this crate only
/// invert maps that are diffeomorphisms on their charts.
pub fn inverse_map(map: &DiscreteMap, tol: f64, max_iter: usize) -> DiscreteMap {
    let map = map.clone();
    let dim = map.dimension();
    DiscreteMap::new(dim, -map.time_step(), move |t, x, out| {
        let solved = invert_map_step(&map, t, x, x, tol, max_iter)
            .unwrap_or_else(|e| panic!("map inversion failed at t = {t}: {e}"));
        out.copy_from_slice(&solved);
    })
}
