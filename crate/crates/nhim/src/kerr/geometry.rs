//! Boyer-Lindquist metric and dual metric in closed form.
//!
//! The dual metric is kept as an explicit rational expression rather than a
//! matrix inverse: it is the hot path of every Hamilton-field evaluation,
//! and its hand-differentiated gradient serves as the oracle for the
//! generic finite-difference path.

use std::sync::Arc;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::KerrError;

/// Polar chart margin: `theta` is kept in `[0.1, pi - 0.1]`, away from the
/// Boyer-Lindquist axis degeneracy. The trapped sets studied here lie well
/// inside.
pub const THETA_MARGIN: f64 = 0.1;

/// Subextremal Kerr parameters: mass `m > 0` and angular momentum
/// `|a| < m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub m: f64,
    pub a: f64,
}

impl KerrParams {
    pub fn new(m: f64, a: f64) -> Self {
        assert!(m > 0.0, "mass must be positive");
        assert!(a.abs() < m, "parameters must be subextremal: |a| < m");
        Self { m, a }
    }

    /// Outer horizon radius `m + sqrt(m^2 - a^2)`.
    pub fn r_plus(&self) -> f64 {
        self.m + (self.m * self.m - self.a * self.a).sqrt()
    }

    /// Horizon function `Delta = r^2 - 2 m r + a^2`, positive in the chart.
    pub fn delta(&self, r: f64) -> f64 {
        r * r - 2.0 * self.m * r + self.a * self.a
    }

    /// `rho^2 = r^2 + a^2 cos^2(theta)`.
    pub fn rho_sq(&self, r: f64, theta: f64) -> f64 {
        let c = theta.cos();
        r * r + self.a * self.a * c * c
    }

    pub fn chart_contains(&self, r: f64, theta: f64) -> bool {
        r > self.r_plus()
            && theta > THETA_MARGIN
            && theta < std::f64::consts::PI - THETA_MARGIN
    }
}

/// Point of phase space: base coordinates `(t, r, theta, phi)` and the
/// covector `sigma dt + xi_r dr + xi_theta dtheta + xi_phi dphi`.
///
/// `rho_hat = |sigma|^-1` rescales the fiber near the trapped set, where
/// `sigma != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub sigma: f64,
    pub xi_r: f64,
    pub xi_theta: f64,
    pub xi_phi: f64,
}

impl PhasePoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t: f64,
        r: f64,
        theta: f64,
        phi: f64,
        sigma: f64,
        xi_r: f64,
        xi_theta: f64,
        xi_phi: f64,
    ) -> Self {
        Self {
            t,
            r,
            theta,
            phi,
            sigma,
            xi_r,
            xi_theta,
            xi_phi,
        }
    }

    pub fn rho_hat(&self) -> f64 {
        1.0 / self.sigma.abs()
    }

    pub fn coords(&self) -> [f64; 8] {
        [
            self.t,
            self.r,
            self.theta,
            self.phi,
            self.sigma,
            self.xi_r,
            self.xi_theta,
            self.xi_phi,
        ]
    }

    pub fn from_coords(c: &[f64]) -> Self {
        Self {
            t: c[0],
            r: c[1],
            theta: c[2],
            phi: c[3],
            sigma: c[4],
            xi_r: c[5],
            xi_theta: c[6],
            xi_phi: c[7],
        }
    }

    pub fn covector(&self) -> [f64; 4] {
        [self.sigma, self.xi_r, self.xi_theta, self.xi_phi]
    }
}

/// Metric components in the coordinate frame `(t, r, theta, phi)`,
/// signature `(+,-,-,-)`:
/// `g = Delta/rho^2 (dt - a sin^2(theta) dphi)^2
///    - sin^2(theta)/rho^2 ((r^2+a^2) dphi - a dt)^2
///    - rho^2/Delta dr^2 - rho^2 dtheta^2`.
pub fn metric(params: &KerrParams, r: f64, theta: f64) -> Result<Matrix4<f64>, KerrError> {
    if !params.chart_contains(r, theta) {
        return Err(KerrError::OutsideChart { r, theta });
    }
    let (a, delta) = (params.a, params.delta(r));
    let rho2 = params.rho_sq(r, theta);
    let s2 = theta.sin() * theta.sin();
    let r2a2 = r * r + a * a;

    let mut g = Matrix4::zeros();
    g[(0, 0)] = (delta - a * a * s2) / rho2;
    g[(1, 1)] = -rho2 / delta;
    g[(2, 2)] = -rho2;
    g[(3, 3)] = -s2 * (r2a2 * r2a2 - delta * a * a * s2) / rho2;
    let g_tphi = a * s2 * (r2a2 - delta) / rho2;
    g[(0, 3)] = g_tphi;
    g[(3, 0)] = g_tphi;

    // Lorentzian in the chart: exactly one positive eigenvalue.
    let positives = g
        .symmetric_eigenvalues()
        .iter()
        .filter(|&&e| e > 0.0)
        .count();
    assert_eq!(positives, 1, "Kerr metric lost signature inside the chart");
    Ok(g)
}

/// Dual metric `G(zeta) = |zeta|^2` with respect to `g^-1`, in closed form:
/// `rho^2 G = ((r^2+a^2) sigma + a xi_phi)^2 / Delta - Delta xi_r^2
///           - xi_theta^2 - (xi_phi + a sin^2 sigma)^2 / sin^2`.
pub fn dual_metric_exact(params: &KerrParams, pt: &PhasePoint) -> f64 {
    let (a, delta) = (params.a, params.delta(pt.r));
    let rho2 = params.rho_sq(pt.r, pt.theta);
    let s = pt.theta.sin();
    let r_lin = (pt.r * pt.r + a * a) * pt.sigma + a * pt.xi_phi;
    let p = pt.xi_phi + a * s * s * pt.sigma;
    (r_lin * r_lin / delta - delta * pt.xi_r * pt.xi_r - pt.xi_theta * pt.xi_theta
        - p * p / (s * s))
        / rho2
}

/// Hand-differentiated gradient of the exact dual metric with respect to
/// all eight phase coordinates, ordered as `PhasePoint::coords`. The `t`
/// and `phi` slots vanish (stationarity and axisymmetry).
pub fn dual_gradient_exact(params: &KerrParams, pt: &PhasePoint) -> [f64; 8] {
    let (a, m) = (params.a, params.m);
    let delta = params.delta(pt.r);
    let ddelta = 2.0 * pt.r - 2.0 * m;
    let rho2 = params.rho_sq(pt.r, pt.theta);
    let (s, c) = pt.theta.sin_cos();
    let s2 = s * s;
    let r2a2 = pt.r * pt.r + a * a;
    let r_lin = r2a2 * pt.sigma + a * pt.xi_phi;
    let p = pt.xi_phi + a * s2 * pt.sigma;

    let s_val = r_lin * r_lin / delta
        - delta * pt.xi_r * pt.xi_r
        - pt.xi_theta * pt.xi_theta
        - p * p / s2;

    let ds_dr = (2.0 * r_lin * 2.0 * pt.r * pt.sigma * delta - r_lin * r_lin * ddelta)
        / (delta * delta)
        - ddelta * pt.xi_r * pt.xi_r;
    let drho2_dr = 2.0 * pt.r;
    let dg_dr = ds_dr / rho2 - s_val * drho2_dr / (rho2 * rho2);

    let dp_dtheta = 2.0 * a * s * c * pt.sigma;
    let ds_dtheta = -(2.0 * p * dp_dtheta / s2 - 2.0 * p * p * c / (s2 * s));
    let drho2_dtheta = -2.0 * a * a * s * c;
    let dg_dtheta = ds_dtheta / rho2 - s_val * drho2_dtheta / (rho2 * rho2);

    let dg_dsigma = (2.0 * r2a2 * r_lin / delta - 2.0 * a * p) / rho2;
    let dg_dxir = -2.0 * delta * pt.xi_r / rho2;
    let dg_dxitheta = -2.0 * pt.xi_theta / rho2;
    let dg_dxiphi = (2.0 * a * r_lin / delta - 2.0 * p / s2) / rho2;

    [
        0.0, dg_dr, dg_dtheta, 0.0, dg_dsigma, dg_dxir, dg_dxitheta, dg_dxiphi,
    ]
}

type GFn = dyn Fn(&PhasePoint) -> f64 + Send + Sync;

/// Dual metric function, either exact Kerr or a perturbed evaluator.
#[derive(Clone)]
pub struct DualMetric {
    label: String,
    eval: Arc<GFn>,
}

impl DualMetric {
    pub fn exact(params: KerrParams) -> Self {
        Self {
            label: format!("kerr(m={}, a={})", params.m, params.a),
            eval: Arc::new(move |pt| dual_metric_exact(&params, pt)),
        }
    }

    pub fn from_fn(
        label: impl Into<String>,
        eval: impl Fn(&PhasePoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn value(&self, pt: &PhasePoint) -> f64 {
        (self.eval)(pt)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl std::fmt::Debug for DualMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DualMetric").field("label", &self.label).finish()
    }
}

/// Quadratic-form value of the dual metric at a point.
pub fn dual_metric_value(g: &DualMetric, pt: &PhasePoint) -> f64 {
    g.value(pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schwarzschild_components_at_r_four() {
        let params = KerrParams::new(1.0, 0.0);
        let g = metric(&params, 4.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((g[(1, 1)] + 2.0).abs() < 1e-14);
        assert!((g[(2, 2)] + 16.0).abs() < 1e-14);
        assert!((g[(3, 3)] + 16.0).abs() < 1e-14);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(g[(i, j)], 0.0, "a = 0 must be diagonal");
                }
            }
        }
    }

    #[test]
    fn cross_term_matches_expansion() {
        // From the squares in the line element, g_tphi =
        // a sin^2 ((r^2+a^2) - Delta)/rho^2 = 2 m r a sin^2 / rho^2.
        let params = KerrParams::new(1.0, 0.9);
        let (r, theta) = (3.0, std::f64::consts::FRAC_PI_2);
        let g = metric(&params, r, theta).unwrap();
        let expected = 2.0 * params.m * r * params.a / params.rho_sq(r, theta);
        assert!((g[(0, 3)] - expected).abs() < 1e-14);
    }

    #[test]
    fn chart_violations_are_rejected() {
        let params = KerrParams::new(1.0, 0.5);
        assert!(matches!(
            metric(&params, 1.5, 1.0),
            Err(KerrError::OutsideChart { .. })
        ));
        assert!(matches!(
            metric(&params, 4.0, 0.05),
            Err(KerrError::OutsideChart { .. })
        ));
    }

    #[test]
    fn dual_metric_inverts_the_metric() {
        let params = KerrParams::new(1.0, 0.7);
        let g = DualMetric::exact(params);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let r = rng.random_range(2.5..8.0);
            let theta = rng.random_range(0.4..(std::f64::consts::PI - 0.4));
            let inv = metric(&params, r, theta)
                .unwrap()
                .try_inverse()
                .expect("metric invertible in chart");
            let zeta = nalgebra::Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let pt = PhasePoint::new(0.0, r, theta, 0.0, zeta[0], zeta[1], zeta[2], zeta[3]);
            let direct = (zeta.transpose() * inv * zeta)[(0, 0)];
            assert!(
                (dual_metric_value(&g, &pt) - direct).abs() < 1e-10,
                "r = {r}, theta = {theta}"
            );
        }
    }

    #[test]
    fn dual_metric_examples_and_homogeneity() {
        let params = KerrParams::new(1.0, 0.0);
        let g = DualMetric::exact(params);
        // Covector dt at r = 4: g^tt = 1/(1 - 2m/r) = 2.
        let dt = PhasePoint::new(0.0, 4.0, std::f64::consts::FRAC_PI_2, 0.0, 1.0, 0.0, 0.0, 0.0);
        assert!((g.value(&dt) - 2.0).abs() < 1e-14);

        let zero = PhasePoint::new(0.0, 4.0, 1.2, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(g.value(&zero), 0.0);

        let params = KerrParams::new(1.0, 0.6);
        let g = DualMetric::exact(params);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut pt = PhasePoint::new(
                0.0,
                rng.random_range(2.5..9.0),
                rng.random_range(0.5..2.6),
                0.0,
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let base = g.value(&pt);
            pt.sigma *= 2.0;
            pt.xi_r *= 2.0;
            pt.xi_theta *= 2.0;
            pt.xi_phi *= 2.0;
            assert!((g.value(&pt) - 4.0 * base).abs() < 1e-10 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let params = KerrParams::new(1.0, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let pt = PhasePoint::new(
                0.0,
                rng.random_range(2.6..7.0),
                rng.random_range(0.5..2.6),
                1.0,
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-1.0..1.0),
            );
            let grad = dual_gradient_exact(&params, &pt);
            let h = 1e-6;
            let c0 = pt.coords();
            for i in 0..8 {
                let mut cp = c0;
                cp[i] += h;
                let fp = dual_metric_exact(&params, &PhasePoint::from_coords(&cp));
                cp[i] = c0[i] - h;
                let fm = dual_metric_exact(&params, &PhasePoint::from_coords(&cp));
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (grad[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                    "coordinate {i}: {} vs {fd}",
                    grad[i]
                );
            }
        }
    }
}
