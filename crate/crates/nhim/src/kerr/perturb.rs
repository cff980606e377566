//! Time-decaying perturbations of the stationary metric and the dual
//! quadratic form they induce.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::geometry::{metric, DualMetric, KerrParams, THETA_MARGIN};
use super::KerrError;

/// Spatial profile of the covariant perturbation tensor. The full tensor is
/// `amplitude * (1 + t^2)^(-alpha/2) * shape(r, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationShape {
    /// `h_tt = sin r`, all other components zero.
    DtDtSinR,
    /// `h_tt = 1`.
    DtDtUnit,
    /// `h_tr = h_rt = sin r`.
    SymTRSinR,
}

/// A decaying metric perturbation `h(t, r, theta)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricPerturbation {
    /// Decay exponent of `(1 + t^2)^(-alpha/2)`.
    pub alpha: f64,
    pub amplitude: f64,
    pub shape: PerturbationShape,
}

impl MetricPerturbation {
    /// Covariant perturbation tensor at `(t, r, theta)`, in coordinate
    /// order `(t, r, theta, phi)`.
    pub fn tensor(&self, t: f64, r: f64, _theta: f64) -> Matrix4<f64> {
        let decay = (1.0 + t * t).powf(-self.alpha / 2.0);
        let mut h = Matrix4::zeros();
        match self.shape {
            PerturbationShape::DtDtSinR => h[(0, 0)] = r.sin(),
            PerturbationShape::DtDtUnit => h[(0, 0)] = 1.0,
            PerturbationShape::SymTRSinR => {
                h[(0, 1)] = r.sin();
                h[(1, 0)] = r.sin();
            }
        }
        h * (self.amplitude * decay)
    }
}

/// Coordinate box on which a perturbed metric is validated and used.
/// Signature is only guaranteed inside the box.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChartBox {
    pub t: [f64; 2],
    pub r: [f64; 2],
    pub theta: [f64; 2],
}

impl Default for ChartBox {
    /// Covers the trapped region for unit mass and moderate spin
    /// (`|a| <= 0.5` keeps the horizon below r = 2.2). The polar range
    /// stays strictly inside the coordinate chart margin.
    fn default() -> Self {
        ChartBox {
            t: [0.0, 1e9],
            r: [2.2, 8.0],
            theta: [
                THETA_MARGIN + 0.1,
                std::f64::consts::PI - THETA_MARGIN - 0.1,
            ],
        }
    }
}

/// Number of sample nodes per spatial axis in the signature scan.
const SIGNATURE_GRID: usize = 24;

/// Builds the dual quadratic form of `g + h` as an evaluator. Fails with
/// `SignatureLost` if the perturbed metric stops being Lorentzian anywhere
/// on a sample grid over the chart box. The evaluator returns NaN outside
/// the stationary chart or where the matrix is numerically singular, which
/// downstream field evaluations surface as `NonFinite`.
pub fn perturbed_dual_metric(
    params: &KerrParams,
    pert: &MetricPerturbation,
    chart: &ChartBox,
) -> Result<DualMetric, KerrError> {
    // The decay factor is monotone nonincreasing in |t|, so the earliest
    // time in the box has the largest perturbation; later samples guard
    // against non-monotone caller extensions.
    let t_samples = [chart.t[0], chart.t[0] + 1.0, 0.5 * (chart.t[0] + chart.t[1])];
    for &t in &t_samples {
        for i in 0..SIGNATURE_GRID {
            let r = chart.r[0]
                + (chart.r[1] - chart.r[0]) * (i as f64) / ((SIGNATURE_GRID - 1) as f64);
            for j in 0..SIGNATURE_GRID {
                let theta = chart.theta[0]
                    + (chart.theta[1] - chart.theta[0]) * (j as f64)
                        / ((SIGNATURE_GRID - 1) as f64);
                let g_cov = metric(params, r, theta)? + pert.tensor(t, r, theta);
                let eigen = g_cov.symmetric_eigenvalues();
                let positives = eigen.iter().filter(|&&e| e > 0.0).count();
                if positives != 1 || eigen.iter().any(|&e| e == 0.0) {
                    return Err(KerrError::SignatureLost {
                        t,
                        r,
                        theta,
                        amplitude: pert.amplitude,
                    });
                }
            }
        }
    }

    let params = *params;
    let pert = *pert;
    let eval = move |pt: &crate::kerr::geometry::PhasePoint| -> f64 {
        let Ok(g_cov) = metric(&params, pt.r, pt.theta) else {
            return f64::NAN;
        };
        let total = g_cov + pert.tensor(pt.t, pt.r, pt.theta);
        let Some(dual) = total.try_inverse() else {
            return f64::NAN;
        };
        let zeta = nalgebra::Vector4::from_column_slice(&pt.covector());
        (dual * zeta).dot(&zeta)
    };
    Ok(DualMetric::from_fn("perturbed", eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kerr::geometry::{dual_metric_exact, PhasePoint};
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_amplitude_reproduces_the_exact_form() {
        let params = KerrParams::new(1.0, 0.4);
        let pert = MetricPerturbation {
            alpha: 1.0,
            amplitude: 0.0,
            shape: PerturbationShape::DtDtSinR,
        };
        let g = perturbed_dual_metric(&params, &pert, &ChartBox::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let pt = PhasePoint::new(
                rng.random_range(0.0..100.0),
                rng.random_range(2.3..7.5),
                rng.random_range(0.3..2.8),
                rng.random_range(0.0..6.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.5..2.0),
            );
            let exact = dual_metric_exact(&params, &pt);
            assert!((g.value(&pt) - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn dual_form_difference_decays_at_the_prescribed_rate() {
        let params = KerrParams::new(1.0, 0.0);
        let pert = MetricPerturbation {
            alpha: 1.0,
            amplitude: 1e-3,
            shape: PerturbationShape::DtDtSinR,
        };
        let g = perturbed_dual_metric(&params, &pert, &ChartBox::default()).unwrap();
        let base = PhasePoint::new(0.0, 3.0, std::f64::consts::FRAC_PI_2, 0.0, 1.0, 0.3, 0.7, 1.1);

        let mut sum_x = 0.0;
        let mut sum_y = 0.0;
        let mut sum_xx = 0.0;
        let mut sum_xy = 0.0;
        let n = 25;
        for k in 0..n {
            let t = 1e2 * (1e4f64 / 1e2).powf(k as f64 / (n - 1) as f64);
            let mut pt = base;
            pt.t = t;
            let diff = (g.value(&pt) - dual_metric_exact(&params, &pt)).abs();
            assert!(diff > 0.0);
            let (x, y) = (t.ln(), diff.ln());
            sum_x += x;
            sum_y += y;
            sum_xx += x * x;
            sum_xy += x * y;
        }
        let nf = n as f64;
        let slope = (nf * sum_xy - sum_x * sum_y) / (nf * sum_xx - sum_x * sum_x);
        assert!((slope + pert.alpha).abs() < 0.05, "slope = {slope}");
    }

    #[test]
    fn signature_loss_threshold_is_detected() {
        let params = KerrParams::new(1.0, 0.0);
        let chart = ChartBox::default();
        let build = |amplitude: f64| {
            perturbed_dual_metric(
                &params,
                &MetricPerturbation {
                    alpha: 0.0,
                    amplitude,
                    shape: PerturbationShape::DtDtUnit,
                },
                &chart,
            )
        };
        assert!(build(-0.02).is_ok());
        match build(-0.5) {
            Err(KerrError::SignatureLost { amplitude, .. }) => {
                assert!((amplitude + 0.5).abs() < 1e-15)
            }
            other => panic!("expected signature loss, got {:?}", other.map(|_| ())),
        }

        // Bisect for the smallest rejected magnitude; g_tt = 1 - 2/r on the
        // box floor r = 2.2 gives a threshold near 1 - 2/2.2.
        let (mut ok, mut bad) = (0.02, 0.5);
        for _ in 0..40 {
            let mid = 0.5 * (ok + bad);
            if build(-mid).is_ok() {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        let threshold = 1.0 - 2.0 / 2.2;
        assert!((bad - threshold).abs() < 5e-3, "threshold = {bad}");
    }
}
