//! Future-trapped graph near the equatorial photon orbit: conjugates the
//! time-reversed reduced flow into the eigen chart of the circular orbit and
//! hands it to the pullback engine.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::perturb::{perturbed_dual_metric, ChartBox, MetricPerturbation};
use super::reduced::{equatorial_reduced_field, equatorial_trapped_radius, ReducedBranch};
use super::{KerrError, KerrParams};
use crate::dynamics::{field_jacobian, time_one_map, Splitting, SplittingFrame, VectorField};
use crate::graph_transform::{
    flow_unstable_manifold, DecayFit, GraphError, Interpolation, ManifoldReport,
    ManifoldSettings, SectionGrid, StationaryModel, Weight,
};

/// Run parameters for the trapped-graph construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KerrManifoldSettings {
    pub branch: ReducedBranch,
    /// Chart half-width in the scaled eigen coordinates of the orbit.
    pub epsilon: f64,
    /// First time node carrying the section.
    pub t_start: f64,
    /// The converged window must still cover up to this time.
    pub required_top: f64,
    /// Extra window above `required_top`, consumed one unit per iteration.
    pub iteration_buffer: usize,
    /// Log-spaced time nodes over the full window.
    pub n_t: usize,
    /// Uniform base nodes across the chart (odd keeps the center line on
    /// the grid).
    pub n_base: usize,
    pub tol: f64,
    pub seed: u64,
    /// Differentiation order demanded of the rate inequalities.
    pub order: usize,
}

impl Default for KerrManifoldSettings {
    fn default() -> Self {
        Self {
            branch: ReducedBranch::Prograde,
            epsilon: 0.05,
            t_start: 100.0,
            required_top: 1e3,
            iteration_buffer: 150,
            n_t: 110,
            n_base: 9,
            tol: 1e-6,
            seed: 0x6e68_696d,
            order: 1,
        }
    }
}

/// Output of the construction: the section lives in chart coordinates
/// `(u, s)` anchored at the circular-orbit radius, with the axes expressed
/// in the reduced variables `(r, x)`.
#[derive(Debug)]
pub struct KerrManifold {
    pub section: SectionGrid,
    pub r_star: f64,
    /// Expanding direction of the reversed stationary field, unit norm.
    pub e_base: [f64; 2],
    /// Contracting direction of the reversed stationary field, unit norm.
    pub e_fiber: [f64; 2],
    /// Eigenvalue along `e_base` (positive).
    pub rate_base: f64,
    /// Eigenvalue along `e_fiber` (negative).
    pub rate_fiber: f64,
    pub report: ManifoldReport,
}

/// Eigenvalue pair of a 2x2 Jacobian, demanded real with opposite signs.
fn saddle_eigen(jac: &Matrix2<f64>) -> Result<(f64, f64), KerrError> {
    let eigen = jac.complex_eigenvalues();
    let scale = eigen[0].norm().max(eigen[1].norm()).max(1e-300);
    for e in eigen.iter() {
        if e.im.abs() > 1e-7 * scale {
            return Err(KerrError::ComplexEigenvalues { re: e.re, im: e.im });
        }
    }
    let (a, b) = (eigen[0].re, eigen[1].re);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if !(lo < 0.0 && hi > 0.0) {
        return Err(KerrError::ComplexEigenvalues { re: lo, im: 0.0 });
    }
    Ok((hi, lo))
}

fn eigenvector(jac: &Matrix2<f64>, lambda: f64) -> [f64; 2] {
    // Rows of (J - lambda I) are both orthogonal to the eigenvector; take
    // the better-conditioned one.
    let r0 = [jac[(0, 0)] - lambda, jac[(0, 1)]];
    let r1 = [jac[(1, 0)], jac[(1, 1)] - lambda];
    let n0 = r0[0].hypot(r0[1]);
    let n1 = r1[0].hypot(r1[1]);
    let row = if n0 >= n1 { r0 } else { r1 };
    let mut v = [-row[1], row[0]];
    let n = v[0].hypot(v[1]);
    v[0] /= n;
    v[1] /= n;
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v[0] = -v[0];
        v[1] = -v[1];
    }
    v
}

fn conjugated(field: &VectorField, origin: [f64; 2], e: Matrix2<f64>) -> VectorField {
    let e_inv = e.try_inverse().expect("chart axes are independent");
    let field = field.clone();
    VectorField::new(2, -1.0, move |t, uv, out| {
        let z = [
            origin[0] + e[(0, 0)] * uv[0] + e[(0, 1)] * uv[1],
            origin[1] + e[(1, 0)] * uv[0] + e[(1, 1)] * uv[1],
        ];
        let mut v = [0.0; 2];
        field.eval(t, &z, &mut v);
        out[0] = e_inv[(0, 0)] * v[0] + e_inv[(0, 1)] * v[1];
        out[1] = e_inv[(1, 0)] * v[0] + e_inv[(1, 1)] * v[1];
    })
}

/// Builds the future-trapped graph over the expanding chart axis. With no
/// perturbation this is the curved invariant manifold of the circular
/// orbit itself; with a decaying perturbation the graph inherits the decay
/// toward the stationary manifold.
pub fn kerr_stable_manifold(
    params: &KerrParams,
    pert: Option<&MetricPerturbation>,
    settings: &KerrManifoldSettings,
) -> Result<KerrManifold, KerrError> {
    let r_star = equatorial_trapped_radius(params, settings.branch);
    let top = settings.required_top + settings.iteration_buffer as f64;

    if let Some(p) = pert {
        // Signature scan over the region the run can touch; the evaluator
        // itself is not needed here.
        let chart = ChartBox {
            t: [settings.t_start.min(0.0), top],
            r: [
                (r_star - 0.5).max(params.r_plus() * 1.01),
                r_star + 0.5,
            ],
            theta: [1.2, std::f64::consts::PI - 1.2],
        };
        perturbed_dual_metric(params, p, &chart)?;
    }

    let stationary_field = equatorial_reduced_field(params, None, settings.branch);
    let jac = {
        let m = field_jacobian(&stationary_field, 0.0, &[r_star, 0.0]);
        Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    };
    let (rate_base, rate_fiber) = saddle_eigen(&jac)?;
    let e_base = eigenvector(&jac, rate_base);
    let e_fiber = eigenvector(&jac, rate_fiber);
    let e = Matrix2::new(e_base[0], e_fiber[0], e_base[1], e_fiber[1]);
    if e.determinant().abs() < 1e-8 {
        return Err(KerrError::ComplexEigenvalues {
            re: rate_base,
            im: 0.0,
        });
    }

    let chart_stationary = conjugated(&stationary_field, [r_star, 0.0], e);
    let perturbed_field = equatorial_reduced_field(params, pert, settings.branch);
    let chart_field = conjugated(&perturbed_field, [r_star, 0.0], e);

    let frame = SplittingFrame {
        base_point: vec![0.0, 0.0],
        tangent: nalgebra::DMatrix::zeros(2, 0),
        unstable: nalgebra::DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        stable: nalgebra::DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
    };
    let ode_tol = (settings.tol * 1e-3).clamp(1e-13, 1e-10);
    let model = StationaryModel {
        map: time_one_map(&chart_stationary, ode_tol),
        splitting: Splitting::new(vec![frame])?,
        order: settings.order,
    };

    assert!(settings.n_t >= 4 && settings.n_base >= 4 || settings.n_base % 2 == 1);
    let t_nodes: Vec<f64> = (0..settings.n_t)
        .map(|i| {
            settings.t_start
                * (top / settings.t_start).powf(i as f64 / (settings.n_t - 1) as f64)
        })
        .collect();
    let axis: Vec<f64> = (0..settings.n_base)
        .map(|i| {
            -settings.epsilon
                + 2.0 * settings.epsilon * i as f64 / (settings.n_base - 1) as f64
        })
        .collect();
    let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic)?;

    // The weight is the decay envelope of the perturbation itself, so the
    // window-start admissibility check compares the actual forcing size
    // against the chart area.
    let (alpha, amplitude) = pert
        .map(|p| (p.alpha, p.amplitude.abs().max(1e-12)))
        .unwrap_or((1.0, 1e-12));
    let weight = Weight::custom(
        format!("envelope(alpha={alpha})"),
        alpha / 2.0,
        move |t: f64| amplitude * (1.0 + t * t).powf(-alpha / 2.0),
    );

    let mut mset = ManifoldSettings::new(settings.tol);
    mset.seed = settings.seed;
    mset.max_iterations = settings.iteration_buffer;

    let (section, report) =
        flow_unstable_manifold(&chart_field, &model, &weight, grid, settings.required_top, &mset)?;

    Ok(KerrManifold {
        section,
        r_star,
        e_base,
        e_fiber,
        rate_base,
        rate_fiber,
        report,
    })
}

/// Power-law fit of the section's center-line values `|sigma(t, 0)|` over
/// window nodes in `[t_lo, t_hi]`.
///
/// The stationary manifold is curved, so its graph contributes a
/// time-independent offset of order `epsilon^2` away from the chart origin;
/// on the center line that offset vanishes and only the decaying response
/// remains.
pub fn center_line_decay(
    section: &SectionGrid,
    t_lo: f64,
    t_hi: f64,
) -> Result<DecayFit, GraphError> {
    let center = section.n_base() / 2;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for it in section.window_node_range() {
        let t = section.t_nodes()[it];
        if t < t_lo || t > t_hi || t <= 0.0 {
            continue;
        }
        let s = section.value(it, center)[0].abs();
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
    use crate::kerr::perturb::PerturbationShape;

    fn small_settings(epsilon: f64) -> KerrManifoldSettings {
        KerrManifoldSettings {
            epsilon,
            t_start: 100.0,
            required_top: 110.0,
            iteration_buffer: 60,
            n_t: 28,
            n_base: 5,
            tol: 1e-9,
            ..KerrManifoldSettings::default()
        }
    }

    #[test]
    fn chart_rates_match_the_reduced_linearization() {
        let params = KerrParams::new(1.0, 0.0);
        let manifold =
            kerr_stable_manifold(&params, None, &small_settings(0.02)).unwrap();
        let expected = 3.0f64.sqrt() / 9.0;
        assert!((manifold.r_star - 3.0).abs() < 1e-12);
        assert!((manifold.rate_base - expected).abs() < 1e-6);
        assert!((manifold.rate_fiber + expected).abs() < 1e-6);
        // Eigen directions of [[0, 1/9], [1/3, 0]] are (1, +-sqrt 3),
        // normalized.
        let s3 = 3.0f64.sqrt();
        assert!((manifold.e_base[1] / manifold.e_base[0] - s3).abs() < 1e-5);
        assert!((manifold.e_fiber[1] / manifold.e_fiber[0] + s3).abs() < 1e-5);
    }

    /// With no perturbation the section is the stationary invariant curve
    /// in chart coordinates: tangent to the base axis at the origin, so its
    /// sup shrinks quadratically with the chart size.
    #[test]
    fn stationary_section_is_quadratically_tangent() {
        let params = KerrParams::new(1.0, 0.0);
        let sup = |eps: f64| {
            let manifold =
                kerr_stable_manifold(&params, None, &small_settings(eps)).unwrap();
            let grid = &manifold.section;
            let mut sup = 0.0f64;
            for it in grid.window_node_range() {
                for ib in 0..grid.n_base() {
                    sup = sup.max(grid.value(it, ib)[0].abs());
                }
            }
            assert!(
                manifold.report.tangency_residual.unwrap() < 1e-8,
                "graph moves with the flow"
            );
            sup
        };
        let s1 = sup(0.01);
        let s2 = sup(0.02);
        assert!(s1 > 0.0 && s1 < 5e-3);
        let ratio = s2 / s1;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio = {ratio}");
    }

    #[test]
    fn perturbed_center_line_decays_at_the_forcing_rate() {
        let params = KerrParams::new(1.0, 0.0);
        let pert = MetricPerturbation {
            alpha: 1.0,
            amplitude: 1e-4,
            shape: PerturbationShape::DtDtSinR,
        };
        let settings = KerrManifoldSettings {
            epsilon: 0.03,
            t_start: 100.0,
            required_top: 140.0,
            iteration_buffer: 40,
            n_t: 32,
            n_base: 5,
            tol: 1e-9,
            ..KerrManifoldSettings::default()
        };
        let manifold = kerr_stable_manifold(&params, Some(&pert), &settings).unwrap();
        assert!(manifold.report.invariance_residual < 1e-8);
        let fit = center_line_decay(&manifold.section, 100.0, 140.0).unwrap();
        assert!(
            (fit.alpha_fit - pert.alpha).abs() < 0.15,
            "alpha_fit = {}",
            fit.alpha_fit
        );
        assert!(fit.c_fit > 0.0);
    }
}
