//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! The integrator advances the flow parameter `s` of a [`VectorField`]; the
//! time coordinate moves affinely as `t = t0 + s * time_component` and is
//! never integrated numerically. Dense output uses the standard fifth-order
//! interpolant of the pair, so requested sample states carry the same order
//! of accuracy as the accepted steps themselves.

use super::{DynamicsError, DiscreteMap, VectorField};

// Nodes and stage coefficients of the Dormand-Prince 5(4) pair. The last row
// of `A` equals the fifth-order weights (first-same-as-last).
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the fifth- and embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the fifth-order interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const MAX_STEPS: usize = 4_000_000;
/// Step sizes below this fraction of the span indicate a loss of
/// resolvability (stiffness or finite-time blowup) and abort the run.
const UNDERFLOW_FRACTION: f64 = 1e-14;

/// Result of [`integrate`]: dense samples plus endpoint data and step counts.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Flow-parameter values at which dense output was requested.
    pub sample_params: Vec<f64>,
    /// Time coordinate at each sample.
    pub sample_times: Vec<f64>,
    /// Spatial state at each sample.
    pub sample_states: Vec<Vec<f64>>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub field_evals: usize,
}

struct DenseSegment {
    s_start: f64,
    h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, s: f64, out: &mut [f64]) {
        let theta = (s - self.s_start) / self.h;
        let omt = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + omt
                            * (self.cont[2][i]
                                + theta * (self.cont[3][i] + omt * self.cont[4][i])));
        }
    }
}

/// Integrates `field` from `(t0, x0)` over the flow-parameter span
/// `[0, span]` (signed), returning dense output at the requested
/// flow-parameter values.
///
/// `samples` must be sorted in the direction of integration and lie within
/// the span. The local error per step is controlled to
/// `tol + tol * |state|` componentwise.
pub fn integrate(
    field: &VectorField,
    t0: f64,
    x0: &[f64],
    span: f64,
    tol: f64,
    samples: &[f64],
) -> Result<Trajectory, DynamicsError> {
    let dim = field.dimension();
    assert_eq!(x0.len(), dim, "initial state dimension mismatch");
    assert!(tol > 0.0, "tolerance must be positive");
    let dir = if span < 0.0 { -1.0 } else { 1.0 };
    for w in samples.windows(2) {
        assert!(
            (w[1] - w[0]) * dir >= 0.0,
            "samples must be sorted in the direction of integration"
        );
    }
    for &s in samples {
        assert!(
            s * dir >= -1e-12 && (s - span) * dir <= 1e-12,
            "sample {s} outside integration span [0, {span}]"
        );
    }

    let time_of = |s: f64| t0 + s * field.time_component();

    let mut traj = Trajectory {
        sample_params: samples.to_vec(),
        sample_times: samples.iter().map(|&s| time_of(s)).collect(),
        sample_states: Vec::with_capacity(samples.len()),
        final_time: time_of(span),
        final_state: x0.to_vec(),
        steps_accepted: 0,
        steps_rejected: 0,
        field_evals: 0,
    };

    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] * dir <= 0.0 {
        traj.sample_states.push(x0.to_vec());
        next_sample += 1;
    }
    if span == 0.0 {
        assert!(next_sample == samples.len());
        return Ok(traj);
    }

    let mut s = 0.0_f64;
    let mut y = x0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    field.eval(time_of(s), &y, &mut k[0]);
    traj.field_evals += 1;

    let mut h = initial_step(field, &mut traj.field_evals, time_of(0.0), &y, &k[0], span, tol);

    while (span - s) * dir > 0.0 {
        if traj.steps_accepted + traj.steps_rejected >= MAX_STEPS {
            return Err(DynamicsError::MaxSteps { limit: MAX_STEPS });
        }
        if h.abs() < UNDERFLOW_FRACTION * span.abs() {
            return Err(DynamicsError::StepUnderflow { t: time_of(s), step: h });
        }
        if (s + h - span) * dir > 0.0 {
            h = span - s;
        }

        for stage in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = A[stage - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            if stage == 6 {
                y_new.copy_from_slice(&y_stage);
            }
            let k_stage = &mut k.split_at_mut(stage).1[0];
            field.eval(time_of(s + C[stage] * h), &y_stage, k_stage);
            traj.field_evals += 1;
        }

        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            e *= h;
            let scale = tol + tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            let segment_needed =
                next_sample < samples.len() && (samples[next_sample] - (s + h)) * dir <= 0.0;
            if segment_needed {
                let seg = dense_segment(s, h, &y, &y_new, &k);
                while next_sample < samples.len()
                    && (samples[next_sample] - (s + h)) * dir <= 1e-12 * span.abs()
                {
                    let mut out = vec![0.0; dim];
                    seg.eval(samples[next_sample].clamp(
                        (s).min(s + h),
                        (s).max(s + h),
                    ), &mut out);
                    traj.sample_states.push(out);
                    next_sample += 1;
                }
            }
            s += h;
            y.copy_from_slice(&y_new);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            traj.steps_accepted += 1;
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h *= factor;
        } else {
            traj.steps_rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0).min(1.0);
        }
    }

    while next_sample < samples.len() {
        // Remaining samples sit at the endpoint up to roundoff.
        traj.sample_states.push(y.clone());
        next_sample += 1;
    }
    traj.final_state = y;
    Ok(traj)
}

fn dense_segment(s: f64, h: f64, y: &[f64], y_new: &[f64], k: &[Vec<f64>; 7]) -> DenseSegment {
    let dim = y.len();
    let mut cont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
    for i in 0..dim {
        let ydiff = y_new[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k[6][i] - bspl;
        let mut acc = 0.0;
        for (j, kj) in k.iter().enumerate() {
            if D[j] != 0.0 {
                acc += D[j] * kj[i];
            }
        }
        cont[4][i] = h * acc;
    }
    DenseSegment { s_start: s, h, cont }
}

fn initial_step(
    field: &VectorField,
    evals: &mut usize,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    tol: f64,
) -> f64 {
    let dim = y0.len();
    let dir = if span < 0.0 { -1.0 } else { 1.0 };
    let sc: Vec<f64> = y0.iter().map(|&v| tol + tol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        let s: f64 = v.iter().zip(&sc).map(|(a, b)| (a / b) * (a / b)).sum();
        (s / dim as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span.abs());
    let h0s = h0 * dir;

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0s * f).collect();
    let mut f1 = vec![0.0; dim];
    field.eval(t0 + h0s * field.time_component(), &y1, &mut f1);
    *evals += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs()) * dir
}

/// Time-one map of the field: the flow over one unit of flow parameter.
/// The returned map's `time_step` equals `field.time_component()`.
///
/// The map panics on integrator failure (step underflow inside the unit
/// interval), which for the fields handled here signals an escape from the
/// chart rather than a recoverable condition.
pub fn time_one_map(field: &VectorField, tol: f64) -> DiscreteMap {
    let field = field.clone();
    let dim = field.dimension();
    DiscreteMap::new(dim, field.time_component(), move |t, x, out| {
        let traj = integrate(&field, t, x, 1.0, tol, &[])
            .unwrap_or_else(|e| panic!("time-one map integration failed at t = {t}: {e}"));
        out.copy_from_slice(&traj.final_state);
    })
}
