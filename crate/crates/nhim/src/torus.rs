//! Analytic testbed on the three-torus: the degree-one symbol
//! `p = eta + (sin x) xi` whose bicharacteristic flow has a normally
//! hyperbolic trapped circle at `x = 0, xi = 0, eta = 0`.
//!
//! Everything here is closed form. The trapped set has defining functions
//! `phi_u = |zeta|^-1 xi` and `phi_s = x` with unit expansion rates and unit
//! normalized Poisson bracket, which `torus_verify` recomputes by finite
//! differences. Since the flow moves `y` at unit speed, the reduced
//! dynamics in `(x, phi_u)` with `t = -y` feeds the graph-transform engine
//! directly; `torus_perturbed_field` adds a weight-class decaying term to
//! exercise the perturbed constructions end to end.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DiscreteMap, Splitting, SplittingFrame, VectorField};
use crate::graph_transform::StationaryModel;

/// Point of the cotangent bundle of the three-torus, covectors written as
/// `xi dx + eta dy + zeta dz`.
///
/// The covector must be nonzero; near the trapped set `zeta != 0`, so the
/// fiber scaling `rho_hat = |zeta|^-1` is well defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPhasePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

impl TorusPhasePoint {
    pub fn new(x: f64, y: f64, z: f64, xi: f64, eta: f64, zeta: f64) -> Self {
        assert!(
            xi != 0.0 || eta != 0.0 || zeta != 0.0,
            "covector must be nonzero"
        );
        Self {
            x,
            y,
            z,
            xi,
            eta,
            zeta,
        }
    }

    /// Fiber scaling `|zeta|^-1`.
    pub fn rho_hat(&self) -> f64 {
        1.0 / self.zeta.abs()
    }

    /// Unstable defining function `|zeta|^-1 xi`.
    pub fn phi_u(&self) -> f64 {
        self.xi / self.zeta.abs()
    }

    /// Stable defining function `x`.
    pub fn phi_s(&self) -> f64 {
        self.x
    }

    fn coords(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.xi, self.eta, self.zeta]
    }

    fn from_coords(c: &[f64]) -> Self {
        Self {
            x: c[0],
            y: c[1],
            z: c[2],
            xi: c[3],
            eta: c[4],
            zeta: c[5],
        }
    }
}

/// Principal symbol `p = eta + (sin x) xi`, homogeneous of degree one in the
/// fiber.
pub fn torus_symbol(pt: &TorusPhasePoint) -> f64 {
    pt.eta + pt.x.sin() * pt.xi
}

/// Hamilton vector field of the symbol in coordinates
/// `(x, y, z, xi, eta, zeta)`: `H_p = (sin x) d_x + d_y - (cos x) xi d_xi`.
///
/// `p`, `eta`, and `zeta` are exact first integrals.
pub fn torus_field(pt: &TorusPhasePoint) -> [f64; 6] {
    [pt.x.sin(), 1.0, 0.0, -pt.x.cos() * pt.xi, 0.0, 0.0]
}

/// The Hamilton field as an integrable six-dimensional autonomous field
/// (flow parameter only, no external time dependence).
pub fn torus_hamilton_field() -> VectorField {
    VectorField::new(6, 0.0, |_, c, out| {
        let v = torus_field(&TorusPhasePoint::from_coords(c));
        out.copy_from_slice(&v);
    })
}

/// Finite-difference check of the trapping hypotheses at the invariant
/// circle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TorusHypothesisReport {
    /// Contraction rate of `phi_u`: `H_p phi_u / (-phi_u)` near the circle.
    pub w_u_at_gamma: f64,
    /// Expansion rate of `phi_s`: `H_p phi_s / phi_s` near the circle.
    pub w_s_at_gamma: f64,
    /// Normalized Poisson bracket `rho_hat^-1 {phi_u, phi_s}` at the circle.
    pub bracket_at_gamma: f64,
}

/// Central-difference step for the hypothesis checks. The defining
/// functions are low-degree polynomials in each coordinate, so truncation
/// and rounding are both far below the 1e-6 acceptance band at this step.
const HYPOTHESIS_FD_STEP: f64 = 1e-5;

fn fd_gradient(f: &dyn Fn(&TorusPhasePoint) -> f64, pt: &TorusPhasePoint, h: f64) -> [f64; 6] {
    let c = pt.coords();
    let mut grad = [0.0; 6];
    for i in 0..6 {
        let mut cp = c;
        cp[i] += h;
        let fp = f(&TorusPhasePoint::from_coords(&cp));
        cp[i] = c[i] - h;
        let fm = f(&TorusPhasePoint::from_coords(&cp));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

fn directional_derivative(f: &dyn Fn(&TorusPhasePoint) -> f64, pt: &TorusPhasePoint, h: f64) -> f64 {
    let grad = fd_gradient(f, pt, h);
    let v = torus_field(pt);
    grad.iter().zip(&v).map(|(g, vi)| g * vi).sum()
}

/// Verifies the trapping hypotheses by finite differences of the closed
/// forms: `H_p phi_u = -w_u phi_u`, `H_p phi_s = w_s phi_s`, and
/// `rho_hat^-1 {phi_u, phi_s} = 1`, each evaluated at (or next to) the
/// trapped circle.
pub fn torus_verify(fd_step: f64) -> TorusHypothesisReport {
    let h = if fd_step > 0.0 { fd_step } else { HYPOTHESIS_FD_STEP };
    let phi_u = |p: &TorusPhasePoint| p.phi_u();
    let phi_s = |p: &TorusPhasePoint| p.phi_s();

    // The rates come from quotients, so the sample point sits slightly off
    // the circle in the relevant direction; quadratic corrections are of
    // the order of the offset squared.
    let off = 1e-4;
    let pt_u = TorusPhasePoint::new(0.0, 0.3, 0.7, off, 0.0, 1.0);
    let w_u = directional_derivative(&phi_u, &pt_u, h) / (-pt_u.phi_u());
    let pt_s = TorusPhasePoint::new(off, 0.3, 0.7, 0.0, 0.0, 1.0);
    let w_s = directional_derivative(&phi_s, &pt_s, h) / pt_s.phi_s();

    // {f, g} = sum_q d_xi_q f d_q g - d_q f d_xi_q g over position and
    // momentum pairs, the convention with H_p f = {p, f}.
    let gamma = TorusPhasePoint::new(0.0, 0.3, 0.7, 0.0, 0.0, 1.0);
    let gu = fd_gradient(&phi_u, &gamma, h);
    let gs = fd_gradient(&phi_s, &gamma, h);
    let mut bracket = 0.0;
    for q in 0..3 {
        bracket += gu[q + 3] * gs[q] - gu[q] * gs[q + 3];
    }
    TorusHypothesisReport {
        w_u_at_gamma: w_u,
        w_s_at_gamma: w_s,
        bracket_at_gamma: bracket / gamma.rho_hat(),
    }
}

/// Decaying perturbation shapes for the reduced field, multiplying the
/// weight `<t>^-alpha` in the fiber equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationProfile {
    Constant,
    SinX,
    SinXCosT,
}

impl PerturbationProfile {
    fn eval(self, t: f64, x: f64) -> f64 {
        match self {
            PerturbationProfile::Constant => 1.0,
            PerturbationProfile::SinX => x.sin(),
            PerturbationProfile::SinXCosT => x.sin() * t.cos(),
        }
    }
}

/// Reduced time-dependent field on `(x, phi_u)`.
///
/// The flow moves `y` at unit speed, so `t = -y` makes the reduced system
/// autonomous-plus-decay with the framework's `V t = -1` convention:
/// `dx/ds = sin x`, `d phi_u/ds = -(cos x) phi_u + amplitude <t>^-alpha g`.
/// With zero amplitude this is the stationary field whose unstable manifold
/// is the zero section over the `x` chart.
pub fn torus_perturbed_field(alpha: f64, amplitude: f64, profile: PerturbationProfile) -> VectorField {
    VectorField::new(2, -1.0, move |t, u, out| {
        let decay = (1.0 + t * t).powf(-alpha / 2.0);
        out[0] = u[0].sin();
        out[1] = -u[0].cos() * u[1] + amplitude * decay * profile.eval(t, u[0]);
    })
}

/// Time-one map of the stationary reduced flow, in closed form.
///
/// `ln tan(x/2)` moves at unit speed and `phi_u sin x` is invariant, so
/// `x_1 = 2 atan(e tan(x_0 / 2))` and `phi_1 = phi_0 sin x_0 / sin x_1`,
/// with the ratio continued by `1/e` on the invariant line `x = 0`.
pub fn torus_stationary_map() -> DiscreteMap {
    DiscreteMap::new(2, -1.0, |_, u, out| {
        let e = std::f64::consts::E;
        let x1 = 2.0 * (e * (u[0] / 2.0).tan()).atan();
        let ratio = if u[0] == 0.0 {
            1.0 / e
        } else {
            u[0].sin() / x1.sin()
        };
        out[0] = x1;
        out[1] = u[1] * ratio;
    })
}

/// Stationary model for the reduced dynamics: closed-form time-one map with
/// the saddle splitting at the origin (`x` unstable, `phi_u` stable).
pub fn torus_stationary_model(order: usize) -> StationaryModel {
    let frame = SplittingFrame {
        base_point: vec![0.0, 0.0],
        tangent: nalgebra::DMatrix::zeros(2, 0),
        unstable: nalgebra::DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        stable: nalgebra::DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
    };
    StationaryModel {
        map: torus_stationary_map(),
        splitting: Splitting::new(vec![frame]).expect("origin saddle frame is orthonormal"),
        order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{field_jacobian, integrate, time_one_map};
    use crate::graph_transform::{
        flow_unstable_manifold, Interpolation, ManifoldSettings, SectionGrid, Weight,
    };

    #[test]
    fn symbol_matches_closed_form_and_homogeneity() {
        let on_sigma = TorusPhasePoint::new(0.0, 1.0, 2.0, 5.0, 0.0, 1.0);
        assert_eq!(torus_symbol(&on_sigma), 0.0);

        let pt = TorusPhasePoint::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0, 2.0, 1.0, 1.0);
        assert!((torus_symbol(&pt) - 3.0).abs() < 1e-15);

        for &(x, xi, eta, zeta) in &[(0.3, 1.2, -0.7, 2.0), (-1.1, 0.4, 0.9, -3.0)] {
            let p1 = torus_symbol(&TorusPhasePoint::new(x, 0.0, 0.0, xi, eta, zeta));
            let p2 = torus_symbol(&TorusPhasePoint::new(
                x,
                0.0,
                0.0,
                2.0 * xi,
                2.0 * eta,
                2.0 * zeta,
            ));
            assert!((p2 - 2.0 * p1).abs() < 1e-14);
        }
    }

    #[test]
    fn field_is_pure_y_translation_on_trapped_circle() {
        let gamma = TorusPhasePoint::new(0.0, 0.4, 1.9, 0.0, 0.0, 1.0);
        assert_eq!(torus_field(&gamma), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn flow_conserves_symbol_and_matches_separable_oracle() {
        let field = torus_hamilton_field();
        let start = TorusPhasePoint::new(0.3, 0.0, 0.0, 0.7, -0.5, 2.0);
        let p0 = torus_symbol(&start);
        let traj = integrate(&field, 0.0, &start.coords(), 10.0, 1e-10, &[2.5, 7.0]).unwrap();
        let end = TorusPhasePoint::from_coords(&traj.final_state);
        assert!((torus_symbol(&end) - p0).abs() < 1e-9);
        assert!((end.zeta - start.zeta).abs() < 1e-12);
        assert!((end.rho_hat() - start.rho_hat()).abs() < 1e-12);

        // x decouples: ln tan(x/2) moves at unit speed.
        for (s, state) in traj.sample_params.iter().zip(&traj.sample_states) {
            let expected = 2.0 * (s.exp() * (start.x / 2.0).tan()).atan();
            assert!((state[0] - expected).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn conic_invariant_line_advances_y_only() {
        let field = torus_hamilton_field();
        let traj = integrate(&field, 0.0, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 5.0, 1e-10, &[])
            .unwrap();
        let end = traj.final_state;
        assert!(end[0].abs() < 1e-12);
        assert!(end[3].abs() < 1e-12);
        assert!((end[1] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn stable_and_unstable_cones_are_invariant() {
        let field = torus_hamilton_field();
        // On the unstable cone xi = eta = 0; phi_u stays zero.
        let traj = integrate(&field, 0.0, &[0.5, 0.0, 0.0, 0.0, 0.0, 1.0], 10.0, 1e-10, &[])
            .unwrap();
        let end = TorusPhasePoint::from_coords(&traj.final_state);
        assert!(end.phi_u().abs() < 1e-8);
        assert!(end.eta.abs() < 1e-12);

        // On the stable cone x = eta = 0; phi_s stays zero.
        let traj = integrate(&field, 0.0, &[0.0, 0.0, 0.0, 0.8, 0.0, 1.0], 10.0, 1e-10, &[])
            .unwrap();
        assert!(traj.final_state[0].abs() < 1e-8);
    }

    #[test]
    fn hypothesis_rates_and_bracket_are_unity() {
        let report = torus_verify(HYPOTHESIS_FD_STEP);
        assert!((report.w_u_at_gamma - 1.0).abs() < 1e-6, "{report:?}");
        assert!((report.w_s_at_gamma - 1.0).abs() < 1e-6, "{report:?}");
        assert!((report.bracket_at_gamma - 1.0).abs() < 1e-6, "{report:?}");
    }

    #[test]
    fn reduced_linearization_is_unit_saddle() {
        let field = torus_perturbed_field(1.0, 0.0, PerturbationProfile::Constant);
        let jac = field_jacobian(&field, 50.0, &[0.0, 0.0]);
        assert!((jac[(0, 0)] - 1.0).abs() < 1e-6);
        assert!((jac[(1, 1)] + 1.0).abs() < 1e-6);
        assert!(jac[(0, 1)].abs() < 1e-9);
        assert!(jac[(1, 0)].abs() < 1e-9);
    }

    #[test]
    fn closed_form_time_one_map_matches_integration() {
        let map = torus_stationary_map();
        let numeric = time_one_map(
            &torus_perturbed_field(1.0, 0.0, PerturbationProfile::Constant),
            1e-12,
        );
        for &(x, phi) in &[(0.0, 0.3), (0.4, -0.2), (-0.6, 0.05)] {
            let a = map.eval_vec(200.0, &[x, phi]);
            let b = numeric.eval_vec(200.0, &[x, phi]);
            assert!((a[0] - b[0]).abs() < 1e-9, "x = {x}");
            assert!((a[1] - b[1]).abs() < 1e-9, "x = {x}");
        }
    }

    /// The fiber response varies on a unit e-folding scale in `t`, so the
    /// node spacing must be well below 1 for cubic interpolation to stay
    /// under the invariance-residual bound at tol 1e-8.
    fn reduced_grid() -> SectionGrid {
        let t_nodes: Vec<f64> = (0..121).map(|i| 100.0 + 0.25 * i as f64).collect();
        let axis: Vec<f64> = (0..5).map(|i| -0.25 + 0.125 * i as f64).collect();
        SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap()
    }

    #[test]
    fn zero_amplitude_returns_zero_section() {
        let field = torus_perturbed_field(1.0, 0.0, PerturbationProfile::Constant);
        let (section, report) = flow_unstable_manifold(
            &field,
            &torus_stationary_model(2),
            &Weight::power_law(1.0),
            reduced_grid(),
            110.0,
            &ManifoldSettings::new(1e-8),
        )
        .unwrap();
        for it in section.window_node_range() {
            assert!(section.sup_at_node(it) < 1e-10);
        }
        assert!(report.invariance_residual < 1e-10);
    }

    /// On the invariant line `x = 0` the fiber equation closes:
    /// `sigma' = sigma - a <t>^-1`, whose decaying solution is the
    /// convolution integral below, evaluated by Simpson quadrature.
    fn center_line_series(t: f64, amplitude: f64) -> f64 {
        let f = |u: f64| (-(u - t)).exp() * (1.0 + u * u).powf(-0.5);
        let (a, b, n) = (t, t + 45.0, 9000usize);
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        amplitude * acc * h / 3.0
    }

    #[test]
    fn constant_profile_matches_center_line_quadrature() {
        let amplitude = 0.05;
        let field = torus_perturbed_field(1.0, amplitude, PerturbationProfile::Constant);
        let (section, report) = flow_unstable_manifold(
            &field,
            &torus_stationary_model(2),
            &Weight::power_law(1.0),
            reduced_grid(),
            110.0,
            &ManifoldSettings::new(1e-8),
        )
        .unwrap();
        assert!(report.tangency_residual.unwrap() < 1e-6);
        let mut out = [0.0];
        for &t in &[100.0, 104.0, 109.0] {
            section.eval(t, &[0.0], &mut out);
            let oracle = center_line_series(t, amplitude);
            assert!(
                (out[0] - oracle).abs() < 1e-6,
                "t = {t}: {} vs {oracle}",
                out[0]
            );
        }
    }
}
