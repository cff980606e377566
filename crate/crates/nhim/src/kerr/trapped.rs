//! Trapped photon orbits: the solver for `G = H_G r = H_G^2 r = 0` and the
//! expansion rates of the normal hyperbolic structure at the solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::geometry::{dual_metric_exact, KerrParams, PhasePoint};
use super::hamilton::hamilton_exact;
use super::reduced::{equatorial_trapped_radius, ReducedBranch};
use super::KerrError;

/// Which variables the trapped-set solve treats as unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrappedMode {
    /// Fix `(sigma, xi_phi)` and `theta` from the guess; solve for
    /// `(r, xi_r, xi_theta)`.
    Spherical,
    /// Fix `theta = pi/2`, `xi_theta = 0`, and `sigma`; solve for
    /// `(r, xi_r, xi_phi)`. The guess's `xi_phi` sign selects prograde or
    /// retrograde.
    Equatorial,
}

/// Sign of `sigma`, labelling the two components of the trapped set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrappedComponent {
    Plus,
    Minus,
}

/// A solved trapped point with its residual triple
/// `(|G|, |H_G r|, |H_G^2 r|)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrappedPoint {
    pub point: PhasePoint,
    pub residuals: [f64; 3],
    pub component: TrappedComponent,
}

/// Trapped orbits live strictly between the horizon and this multiple of
/// the mass; solutions outside are rejected as having left the chart.
const TRAPPED_R_MAX_OVER_M: f64 = 10.0;

/// Residual triple `(G, H_G r, H_G^2 r)` from the closed-form gradient.
/// The Newton Jacobian differentiates these again, so they must be smooth
/// to near machine precision; the finite-difference Hamilton path is too
/// noisy for that.
fn residuals(params: &KerrParams, pt: &PhasePoint) -> [f64; 3] {
    let gv = dual_metric_exact(params, pt);
    let field = hamilton_exact(params, pt);
    let hr = field[1];

    // Second derivative along the flow: central difference of H_G r along
    // the field direction, step scaled to the field magnitude.
    let norm = field.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let eps = 1e-5 / norm;
    let c0 = pt.coords();
    let mut cp = c0;
    let mut cm = c0;
    for i in 0..8 {
        cp[i] += eps * field[i];
        cm[i] -= eps * field[i];
    }
    let hrp = hamilton_exact(params, &PhasePoint::from_coords(&cp))[1];
    let hrm = hamilton_exact(params, &PhasePoint::from_coords(&cm))[1];
    let h2r = (hrp - hrm) / (2.0 * eps);
    [gv, hr, h2r]
}

fn apply_unknowns(mode: TrappedMode, guess: &PhasePoint, u: &[f64]) -> PhasePoint {
    let mut pt = *guess;
    match mode {
        TrappedMode::Spherical => {
            pt.r = u[0];
            pt.xi_r = u[1];
            pt.xi_theta = u[2];
        }
        TrappedMode::Equatorial => {
            pt.theta = std::f64::consts::FRAC_PI_2;
            pt.xi_theta = 0.0;
            pt.r = u[0];
            pt.xi_r = u[1];
            pt.xi_phi = u[2];
        }
    }
    pt
}

/// Closed-form guess for the equatorial solve: the circular-orbit radius
/// paired with the critical azimuthal momentum
/// `xi_phi = s sigma (3 sqrt(m r) + s a)`, with `s = -1` prograde and
/// `s = +1` retrograde. The point lies on the trapped set up to rounding
/// for every subextremal spin, so Newton converges from it or from small
/// offsets of it; fixed-momentum guesses lose the basin once the prograde
/// orbit nears the horizon.
pub fn equatorial_orbit_guess(
    params: &KerrParams,
    branch: ReducedBranch,
    sigma: f64,
) -> PhasePoint {
    let r = equatorial_trapped_radius(params, branch);
    let s = match branch {
        ReducedBranch::Prograde => -1.0,
        ReducedBranch::Retrograde => 1.0,
    };
    let xi_phi = s * sigma * (3.0 * (params.m * r).sqrt() + s * params.a);
    PhasePoint::new(
        0.0,
        r,
        std::f64::consts::FRAC_PI_2,
        0.0,
        sigma,
        0.0,
        0.0,
        xi_phi,
    )
}

/// Solves for a trapped point of the exact Kerr flow with the conserved
/// quantities fixed by `mode`, by damped Newton iteration on the residual
/// triple with a finite-difference Jacobian.
pub fn trapped_set_solve(
    params: &KerrParams,
    mode: TrappedMode,
    guess: &PhasePoint,
    tol: f64,
) -> Result<TrappedPoint, KerrError> {
    let mut u = match mode {
        TrappedMode::Spherical => vec![guess.r, guess.xi_r, guess.xi_theta],
        TrappedMode::Equatorial => vec![guess.r, guess.xi_r, guess.xi_phi],
    };
    assert!(guess.sigma != 0.0, "trapped points need sigma != 0");

    let eval = |u: &[f64]| -> Result<[f64; 3], KerrError> {
        let pt = apply_unknowns(mode, guess, u);
        if pt.r <= params.r_plus() {
            return Err(KerrError::LeftChart { r: pt.r });
        }
        Ok(residuals(params, &pt))
    };

    let mut res = eval(&u)?;
    let mut res_norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    const MAX_ITER: usize = 60;
    let mut iterations = 0;
    while res_norm >= tol {
        if iterations >= MAX_ITER {
            return Err(KerrError::NoConvergence {
                residual: res_norm,
                iterations,
            });
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(3, 3);
        for j in 0..3 {
            let h = 1e-6 * (1.0 + u[j].abs());
            let mut up = u.clone();
            up[j] += h;
            let rp = eval(&up)?;
            up[j] = u[j] - h;
            let rm = eval(&up)?;
            for i in 0..3 {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_column_slice(&res);
        let delta = jac.lu().solve(&rhs).ok_or(KerrError::NoConvergence {
            residual: res_norm,
            iterations,
        })?;
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..=8 {
            let trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(v, d)| v - alpha * d).collect();
            if let Ok(r_trial) = eval(&trial) {
                let norm = r_trial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if norm < res_norm {
                    u = trial;
                    res = r_trial;
                    res_norm = norm;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return Err(KerrError::NoConvergence {
                residual: res_norm,
                iterations,
            });
        }
    }

    let point = apply_unknowns(mode, guess, &u);
    if point.r <= params.r_plus() || point.r >= TRAPPED_R_MAX_OVER_M * params.m {
        return Err(KerrError::LeftChart { r: point.r });
    }
    let component = if point.sigma > 0.0 {
        TrappedComponent::Plus
    } else {
        TrappedComponent::Minus
    };
    Ok(TrappedPoint {
        point,
        residuals: [res[0].abs(), res[1].abs(), res[2].abs()],
        component,
    })
}

/// Conformal factor multiplying `rho_hat H_G` before linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalFactor {
    /// The default `Xi = rho^2`, matching the normalization under which the
    /// Schwarzschild minimal rate is `6 sqrt(3) m`.
    RhoSquared,
    Unit,
}

/// Expansion data at a trapped point: the positive/negative eigenvalue pair
/// of the linearized `Xi rho_hat H_G` flow transverse to the trapped set,
/// with the corresponding eigendirections.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionRates {
    pub w_u: f64,
    pub w_s: f64,
    pub nu_min: f64,
    /// Unstable direction in phase coordinates (unit norm).
    pub n_u: Vec<f64>,
    /// Stable direction in phase coordinates (unit norm).
    pub n_s: Vec<f64>,
}

fn rescaled_field(params: &KerrParams, xi: ConformalFactor, c: &[f64]) -> [f64; 8] {
    let pt = PhasePoint::from_coords(c);
    let factor = match xi {
        ConformalFactor::RhoSquared => params.rho_sq(pt.r, pt.theta),
        ConformalFactor::Unit => 1.0,
    } * pt.rho_hat();
    let mut field = hamilton_exact(params, &pt);
    for v in &mut field {
        *v *= factor;
    }
    field
}

/// Real eigenvalue pair and eigenvectors of the linearization at a trapped
/// point. The tangent directions of the trapped set contribute zero and
/// purely imaginary eigenvalues (the polar oscillation); only the real
/// hyperbolic pair is extracted here.
pub fn expansion_rates(
    params: &KerrParams,
    trapped: &TrappedPoint,
    xi: ConformalFactor,
    h: f64,
) -> Result<ExpansionRates, KerrError> {
    let c0 = trapped.point.coords();
    let mut jac = DMatrix::zeros(8, 8);
    for j in 0..8 {
        let step = h * (1.0 + c0[j].abs());
        let mut c = c0;
        c[j] = c0[j] + step;
        let fp = rescaled_field(params, xi, &c);
        c[j] = c0[j] - step;
        let fm = rescaled_field(params, xi, &c);
        for i in 0..8 {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }

    let eigenvalues = jac.clone().complex_eigenvalues();
    let scale = eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let mut lambda_max = eigenvalues[0];
    let mut lambda_min = eigenvalues[0];
    for e in eigenvalues.iter() {
        if e.re > lambda_max.re {
            lambda_max = *e;
        }
        if e.re < lambda_min.re {
            lambda_min = *e;
        }
    }
    for lambda in [lambda_max, lambda_min] {
        if lambda.im.abs() > 1e-6 * scale.max(1.0) || lambda.re.abs() < 1e-10 * scale.max(1.0) {
            return Err(KerrError::ComplexEigenvalues {
                re: lambda.re,
                im: lambda.im,
            });
        }
    }

    let eigvec = |lambda: f64| -> Vec<f64> {
        let shifted = &jac - DMatrix::identity(8, 8) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("svd of shifted jacobian");
        let row = v_t.row(v_t.nrows() - 1);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter().map(|v| v / norm).collect()
    };

    Ok(ExpansionRates {
        w_u: lambda_max.re,
        w_s: -lambda_min.re,
        nu_min: lambda_max.re.min(-lambda_min.re),
        n_u: eigvec(lambda_max.re),
        n_s: eigvec(lambda_min.re),
    })
}
