//! Graphs of characteristic roots: solving `p0(x0, x') + p_tilde(tau, x0, x') = 0`
//! for `x0` as a function of `(tau, x')` when the perturbation is a decaying
//! contraction relative to `p0`.

use serde::Serialize;

use super::KerrError;

/// Solved characteristic graph on a `taus x xprime_points` grid.
#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicGraph {
    pub taus: Vec<f64>,
    /// `values[i][j]` is the root over `(taus[i], xprime_points[j])`.
    pub values: Vec<Vec<f64>>,
    /// `sup (1 + tau^2)^(alpha/2) |root|` over the grid.
    pub sup_normalized: f64,
    /// `sup |d p_tilde / d x0| / inf |d p0 / d x0|` at the earliest time.
    pub contraction_estimate: f64,
}

const NEWTON_MAX: usize = 50;
const FD_STEP: f64 = 1e-7;

/// Contraction factors at or above this bound do not guarantee a unique
/// nearby root and are rejected.
const CONTRACTION_BOUND: f64 = 0.5;

fn fd_x0(f: &dyn Fn(f64) -> f64, x0: f64) -> f64 {
    let h = FD_STEP * (1.0 + x0.abs());
    (f(x0 + h) - f(x0 - h)) / (2.0 * h)
}

/// Solves the root graph node by node with warm-started Newton iteration.
///
/// `alpha` is the decay exponent of the perturbation, used only for the
/// normalized sup reported back. `tau0` is where the contraction factor is
/// certified; the factor bounds later times as well when the perturbation
/// decays monotonically.
pub fn characteristic_graph(
    p0: &dyn Fn(f64, &[f64]) -> f64,
    p_tilde: &dyn Fn(f64, f64, &[f64]) -> f64,
    xprime_points: &[Vec<f64>],
    taus: &[f64],
    alpha: f64,
    tau0: f64,
    tol: f64,
) -> Result<CharacteristicGraph, KerrError> {
    assert!(!xprime_points.is_empty() && !taus.is_empty());

    let mut num: f64 = 0.0;
    let mut den = f64::INFINITY;
    for xp in xprime_points {
        for &x0 in &[-0.1, 0.0, 0.1] {
            num = num.max(fd_x0(&|v| p_tilde(tau0, v, xp), x0).abs());
            den = den.min(fd_x0(&|v| p0(v, xp), x0).abs());
        }
    }
    let factor = num / den;
    if !(factor < CONTRACTION_BOUND) {
        return Err(KerrError::NoContraction { factor });
    }

    let mut values = vec![vec![0.0; xprime_points.len()]; taus.len()];
    let mut warm = vec![0.0f64; xprime_points.len()];
    let mut sup_normalized: f64 = 0.0;
    for (i, &tau) in taus.iter().enumerate() {
        for (j, xp) in xprime_points.iter().enumerate() {
            let total = |x0: f64| p0(x0, xp) + p_tilde(tau, x0, xp);
            let mut x0 = warm[j];
            let mut residual = total(x0);
            let mut iterations = 0;
            while residual.abs() >= tol {
                if iterations >= NEWTON_MAX {
                    return Err(KerrError::NoConvergence {
                        residual: residual.abs(),
                        iterations,
                    });
                }
                iterations += 1;
                let slope = fd_x0(&total, x0);
                if slope.abs() < 1e-14 {
                    return Err(KerrError::NoConvergence {
                        residual: residual.abs(),
                        iterations,
                    });
                }
                x0 -= residual / slope;
                residual = total(x0);
            }
            warm[j] = x0;
            values[i][j] = x0;
            sup_normalized = sup_normalized.max((1.0 + tau * tau).powf(alpha / 2.0) * x0.abs());
        }
    }

    Ok(CharacteristicGraph {
        taus: taus.to_vec(),
        values,
        sup_normalized,
        contraction_estimate: factor,
    })
}
