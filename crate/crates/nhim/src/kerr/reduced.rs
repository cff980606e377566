//! Equatorial reduced dynamics: the two-dimensional flow in `(r, xi_r/sigma)`
//! on the null cone, with the angular momentum re-solved pointwise from the
//! dual form. The returned field is time reversed so that the pullback
//! engine's unstable construction yields the future-trapped graph.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::geometry::{dual_gradient_exact, dual_metric_exact, metric, KerrParams, PhasePoint};
use super::perturb::MetricPerturbation;
use crate::dynamics::VectorField;

/// Angular-momentum branch of the equatorial null cone. Prograde orbits
/// carry `xi_phi` of the opposite sign to `sigma` in these conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedBranch {
    Prograde,
    Retrograde,
}

/// Closed-form radius of the equatorial circular photon orbit.
pub fn equatorial_trapped_radius(params: &KerrParams, branch: ReducedBranch) -> f64 {
    let sign = match branch {
        ReducedBranch::Prograde => -1.0,
        ReducedBranch::Retrograde => 1.0,
    };
    2.0 * params.m * (1.0 + ((2.0 / 3.0) * (sign * params.a / params.m).acos()).cos())
}

/// Residual bound for the pointwise angular-momentum solve. The seed from
/// the stationary quadratic is already within the perturbation size, so two
/// Newton corrections reach this.
const XI_PHI_TOL: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Partials {
    value: f64,
    d_t: f64,
    d_r: f64,
    d_sigma: f64,
    d_xi_r: f64,
    d_xi_phi: f64,
}

#[derive(Clone)]
struct EquatorialForm {
    params: KerrParams,
    pert: Option<MetricPerturbation>,
    branch: ReducedBranch,
}

impl EquatorialForm {
    /// Difference of dual matrices `(g + h)^-1 - g^-1` at the equator.
    fn m_matrix(&self, t: f64, r: f64) -> Option<Matrix4<f64>> {
        let pert = self.pert.as_ref()?;
        let theta = std::f64::consts::FRAC_PI_2;
        let g_cov = metric(&self.params, r, theta).ok()?;
        let exact_dual = g_cov.try_inverse()?;
        let total_dual = (g_cov + pert.tensor(t, r, theta)).try_inverse()?;
        Some(total_dual - exact_dual)
    }

    /// Value and the partials of the dual form needed by the reduced field,
    /// at `sigma = 1`, `theta = pi/2`, `xi_theta = 0`. The stationary part
    /// is closed form; the perturbation contributes analytic fiber partials
    /// `2 (M zeta)` and finite-difference base partials.
    fn partials(&self, t: f64, r: f64, x: f64, xi_phi: f64) -> Option<Partials> {
        let pt = PhasePoint::new(t, r, std::f64::consts::FRAC_PI_2, 0.0, 1.0, x, 0.0, xi_phi);
        let grad = dual_gradient_exact(&self.params, &pt);
        let mut p = Partials {
            value: dual_metric_exact(&self.params, &pt),
            d_t: grad[0],
            d_r: grad[1],
            d_sigma: grad[4],
            d_xi_r: grad[5],
            d_xi_phi: grad[7],
        };
        if self.pert.is_some() {
            let zeta = Vector4::new(1.0, x, 0.0, xi_phi);
            let quad = |mm: Matrix4<f64>| (mm * zeta).dot(&zeta);
            let m0 = self.m_matrix(t, r)?;
            let mz = m0 * zeta;
            p.value += mz.dot(&zeta);
            p.d_sigma += 2.0 * mz[0];
            p.d_xi_r += 2.0 * mz[1];
            p.d_xi_phi += 2.0 * mz[3];
            let ht = 1e-6 * (1.0 + t.abs());
            p.d_t += (quad(self.m_matrix(t + ht, r)?) - quad(self.m_matrix(t - ht, r)?))
                / (2.0 * ht);
            let hr = 1e-6 * (1.0 + r.abs());
            p.d_r += (quad(self.m_matrix(t, r + hr)?) - quad(self.m_matrix(t, r - hr)?))
                / (2.0 * hr);
        }
        Some(p)
    }

    /// Root of the stationary null condition in `xi_phi` at `sigma = 1`.
    fn xi_phi_quadratic(&self, r: f64, x: f64) -> Option<f64> {
        let (m, a) = (self.params.m, self.params.a);
        let delta = self.params.delta(r);
        if delta <= 0.0 {
            return None;
        }
        let qa = -r * (r - 2.0 * m) / delta;
        let qb = 4.0 * a * m * r / delta;
        let r2a2 = r * r + a * a;
        let qc = r2a2 * r2a2 / delta - a * a - delta * x * x;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 || qa == 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        Some(match self.branch {
            ReducedBranch::Prograde => (-qb + sq) / (2.0 * qa),
            ReducedBranch::Retrograde => (-qb - sq) / (2.0 * qa),
        })
    }

    fn solve_xi_phi(&self, t: f64, r: f64, x: f64) -> Option<f64> {
        let mut xi = self.xi_phi_quadratic(r, x)?;
        if self.pert.is_none() {
            return Some(xi);
        }
        for _ in 0..12 {
            let p = self.partials(t, r, x, xi)?;
            if p.value.abs() < XI_PHI_TOL {
                return Some(xi);
            }
            if p.d_xi_phi.abs() < 1e-12 {
                return None;
            }
            xi -= p.value / p.d_xi_phi;
        }
        let p = self.partials(t, r, x, xi)?;
        (p.value.abs() < XI_PHI_TOL).then_some(xi)
    }

    /// Forward reduced field `d(r, x)/dt` along increasing coordinate time.
    fn forward(&self, t: f64, r: f64, x: f64) -> Option<[f64; 2]> {
        if r <= self.params.r_plus() {
            return None;
        }
        let xi = self.solve_xi_phi(t, r, x)?;
        let p = self.partials(t, r, x, xi)?;
        if !p.d_sigma.is_finite() || p.d_sigma.abs() < 1e-10 {
            return None;
        }
        Some([
            p.d_xi_r / p.d_sigma,
            (-p.d_r + x * p.d_t) / p.d_sigma,
        ])
    }
}

/// Time-reversed reduced field on `(r, x) = (r, xi_r/sigma)`: one unit of
/// flow parameter lowers coordinate time by one, following physical orbits
/// backwards. Evaluations off the null cone's branch or behind the horizon
/// yield NaN, which integration reports as a step failure.
pub fn equatorial_reduced_field(
    params: &KerrParams,
    pert: Option<&MetricPerturbation>,
    branch: ReducedBranch,
) -> VectorField {
    let form = EquatorialForm {
        params: *params,
        pert: pert.copied(),
        branch,
    };
    VectorField::new(2, -1.0, move |t, state, out| {
        match form.forward(t, state[0], state[1]) {
            Some([fr, fx]) => {
                out[0] = -fr;
                out[1] = -fx;
            }
            None => {
                out[0] = f64::NAN;
                out[1] = f64::NAN;
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{field_jacobian, integrate};
    use crate::kerr::hamilton::hamilton_vector_field;
    use crate::kerr::perturb::{perturbed_dual_metric, ChartBox, PerturbationShape};

    #[test]
    fn closed_form_radii_bracket_the_photon_sphere() {
        let params = KerrParams::new(1.0, 0.5);
        let pro = equatorial_trapped_radius(&params, ReducedBranch::Prograde);
        let retro = equatorial_trapped_radius(&params, ReducedBranch::Retrograde);
        assert!((pro - 2.34730).abs() < 1e-4);
        assert!((retro - 3.53209).abs() < 1e-4);

        let schw = KerrParams::new(1.0, 0.0);
        for branch in [ReducedBranch::Prograde, ReducedBranch::Retrograde] {
            assert!((equatorial_trapped_radius(&schw, branch) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_field_vanishes_at_the_trapped_radius() {
        for &a in &[0.0, 0.5] {
            let params = KerrParams::new(1.0, a);
            for branch in [ReducedBranch::Prograde, ReducedBranch::Retrograde] {
                let field = equatorial_reduced_field(&params, None, branch);
                let r_star = equatorial_trapped_radius(&params, branch);
                let v = field.eval_vec(0.0, &[r_star, 0.0]);
                assert!(v[0].abs() < 1e-10 && v[1].abs() < 1e-10, "a = {a}");
            }
        }
    }

    #[test]
    fn schwarzschild_linearization_has_the_analytic_rates() {
        let params = KerrParams::new(1.0, 0.0);
        let field = equatorial_reduced_field(&params, None, ReducedBranch::Prograde);
        let jac = field_jacobian(&field, 0.0, &[3.0, 0.0]);
        // Reversed field: J = -[[0, -1/9], [-1/3, 0]], eigenvalues
        // are +-(sqrt 3)/9 either way.
        assert!((jac[(0, 1)] - 1.0 / 9.0).abs() < 1e-7);
        assert!((jac[(1, 0)] - 1.0 / 3.0).abs() < 1e-7);
        assert!(jac[(0, 0)].abs() < 1e-7 && jac[(1, 1)].abs() < 1e-7);
        let eigen = jac.complex_eigenvalues();
        let expected = 3.0f64.sqrt() / 9.0;
        let mut rates: Vec<f64> = eigen.iter().map(|e| e.re).collect();
        rates.sort_by(f64::total_cmp);
        assert!((rates[0] + expected).abs() < 1e-6);
        assert!((rates[1] - expected).abs() < 1e-6);
    }

    #[test]
    fn pointwise_momentum_solve_agrees_with_the_matrix_dual() {
        let params = KerrParams::new(1.0, 0.3);
        let pert = MetricPerturbation {
            alpha: 1.0,
            amplitude: 1e-3,
            shape: PerturbationShape::DtDtSinR,
        };
        let form = EquatorialForm {
            params,
            pert: Some(pert),
            branch: ReducedBranch::Prograde,
        };
        let g = perturbed_dual_metric(&params, &pert, &ChartBox::default()).unwrap();
        for &(t, r, x) in &[(50.0, 2.8, 0.0), (120.0, 3.2, 0.1), (300.0, 2.6, -0.15)] {
            let xi = form.solve_xi_phi(t, r, x).unwrap();
            let pt =
                PhasePoint::new(t, r, std::f64::consts::FRAC_PI_2, 0.0, 1.0, x, 0.0, xi);
            assert!(g.value(&pt).abs() < 1e-10, "residual through matrix path");
            let stationary = form.xi_phi_quadratic(r, x).unwrap();
            assert!((xi - stationary).abs() < 1e-4);
        }
    }

    #[test]
    fn perturbed_field_difference_decays_at_the_metric_rate() {
        let params = KerrParams::new(1.0, 0.0);
        let pert = MetricPerturbation {
            alpha: 1.0,
            amplitude: 1e-3,
            shape: PerturbationShape::DtDtSinR,
        };
        let stationary = equatorial_reduced_field(&params, None, ReducedBranch::Prograde);
        let perturbed =
            equatorial_reduced_field(&params, Some(&pert), ReducedBranch::Prograde);
        let probe = [3.05, 0.02];

        let mut sum_x = 0.0;
        let mut sum_y = 0.0;
        let mut sum_xx = 0.0;
        let mut sum_xy = 0.0;
        let n = 25;
        for k in 0..n {
            let t = 1e2 * (1e4f64 / 1e2).powf(k as f64 / (n - 1) as f64);
            let v0 = stationary.eval_vec(t, &probe);
            let v1 = perturbed.eval_vec(t, &probe);
            let diff = ((v1[0] - v0[0]).powi(2) + (v1[1] - v0[1]).powi(2)).sqrt();
            assert!(diff > 0.0);
            let (lx, ly) = (t.ln(), diff.ln());
            sum_x += lx;
            sum_y += ly;
            sum_xx += lx * lx;
            sum_xy += lx * ly;
        }
        let nf = n as f64;
        let slope = (nf * sum_xy - sum_x * sum_y) / (nf * sum_xx - sum_x * sum_x);
        assert!((slope + pert.alpha).abs() < 0.1, "slope = {slope}");
    }

    /// The reduced flow must shadow the full eight-dimensional Hamilton flow
    /// of the perturbed form, including the sigma drift absorbed into
    /// `x = xi_r / sigma`.
    #[test]
    fn reduced_orbit_matches_the_full_phase_flow() {
        let params = KerrParams::new(1.0, 0.0);
        let pert = MetricPerturbation {
            alpha: 1.0,
            amplitude: 1e-3,
            shape: PerturbationShape::DtDtSinR,
        };
        let form = EquatorialForm {
            params,
            pert: Some(pert),
            branch: ReducedBranch::Prograde,
        };
        let (t0, r0, x0) = (50.0, 3.1, 0.05);
        let xi0 = form.solve_xi_phi(t0, r0, x0).unwrap();

        let g = perturbed_dual_metric(&params, &pert, &ChartBox::default()).unwrap();
        let full_field = hamilton_vector_field(&g, 1e-6);
        let start = PhasePoint::new(
            t0,
            r0,
            std::f64::consts::FRAC_PI_2,
            0.0,
            1.0,
            x0,
            0.0,
            xi0,
        );
        let traj = integrate(&full_field, 0.0, &start.coords(), 0.5, 1e-11, &[]).unwrap();
        let end = PhasePoint::from_coords(&traj.final_state);
        assert!(end.t > t0 + 1.0, "flow advances coordinate time");

        let reversed = equatorial_reduced_field(&params, Some(&pert), ReducedBranch::Prograde);
        let forward = {
            let rev = reversed.clone();
            VectorField::new(2, 1.0, move |t, state, out| {
                rev.eval(t, state, out);
                out[0] = -out[0];
                out[1] = -out[1];
            })
        };
        let span = end.t - t0;
        let red = integrate(&forward, t0, &[r0, x0], span, 1e-11, &[]).unwrap();
        assert!((red.final_state[0] - end.r).abs() < 1e-7);
        assert!((red.final_state[1] - end.xi_r / end.sigma).abs() < 1e-7);
    }
}
