//! Quantitative verification battery: eleven end-to-end criteria, each
//! pinning one published number or invariant of the library against an
//! independent oracle at a fixed tolerance.
//!
//! The criteria share expensive fixtures (the toy fixed-point run, the
//! decay-transfer sweep, the two-start uniqueness runs) through process-wide
//! caches, so running the full battery costs one solve per distinct
//! configuration no matter how results are grouped. Each criterion returns a
//! [`CriterionResult`] with a pass flag and a human-readable detail line;
//! the `acceptance` integration test asserts each flag, and the command-line
//! `verify` subcommand renders the same results as a table.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;
use std::time::Instant;

use crate::dynamics::{integrate, DiscreteMap, Splitting, SplittingFrame, VectorField};
use crate::graph_transform::{
    fit_decay_rate, flow_unstable_manifold, unstable_manifold, Interpolation, ManifoldReport,
    ManifoldSettings, SectionGrid, StationaryModel, Weight,
};
use crate::kerr::{
    characteristic_graph, dual_metric_exact, equatorial_trapped_radius, expansion_rates,
    hamilton_exact, kerr_stable_manifold, trapped_set_solve, ConformalFactor,
    KerrManifoldSettings, KerrParams, MetricPerturbation, PerturbationShape, PhasePoint,
    ReducedBranch, TrappedMode, TrappedPoint,
};
use crate::torus::{torus_perturbed_field, torus_stationary_model, torus_verify,
    PerturbationProfile};
use nalgebra::DMatrix;

/// Outcome of one criterion run.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    /// One-based criterion number.
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantities and the thresholds they were held to.
    pub detail: String,
    /// Wall time of this call; shared fixtures bill their solve time to the
    /// first criterion that touches them.
    pub seconds: f64,
}

/// Criterion numbers and names, in battery order.
pub const CRITERIA: [(usize, &'static str); 11] = [
    (1, "toy-fixed-point"),
    (2, "schwarzschild-radius"),
    (3, "minimal-rate"),
    (4, "kerr-equatorial-radius"),
    (5, "torus-hypotheses"),
    (6, "decay-transfer"),
    (7, "invariance"),
    (8, "uniqueness"),
    (9, "contraction"),
    (10, "characteristic-graph"),
    (11, "conservation"),
];

/// Environment variable read by the minimal-rate criterion: when set to a
/// number, the measured rate is multiplied by it before the comparison.
/// This is a fault-injection hook for exercising the failure path of the
/// battery from the outside; leave it unset for real runs.
pub const FAULT_RATE_SCALE_VAR: &str = "NHIM_FAULT_RATE_SCALE";

fn fault_rate_scale() -> f64 {
    std::env::var(FAULT_RATE_SCALE_VAR)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1.0)
}

/// Runs one criterion by number. Panics on an unknown number; the valid set
/// is [`CRITERIA`].
pub fn run_criterion(id: usize) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|(n, _)| *n == id)
        .unwrap_or_else(|| panic!("unknown criterion number {id}"))
        .1;
    let clock = Instant::now();
    let (passed, detail) = match id {
        1 => toy_oracle_criterion(),
        2 => schwarzschild_radius_criterion(),
        3 => minimal_rate_criterion(),
        4 => kerr_equatorial_radius_criterion(),
        5 => torus_hypotheses_criterion(),
        6 => decay_transfer_criterion(),
        7 => invariance_criterion(),
        8 => uniqueness_criterion(),
        9 => contraction_criterion(),
        10 => characteristic_graph_criterion(),
        11 => conservation_criterion(),
        _ => unreachable!(),
    };
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds: clock.elapsed().as_secs_f64(),
    }
}

/// Runs every criterion whose name contains `only` (all of them when
/// `only` is `None`), in battery order.
pub fn run_all(only: Option<&str>) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|(_, name)| only.is_none_or(|pat| name.contains(pat)))
        .map(|(id, _)| run_criterion(*id))
        .collect()
}

// ---------------------------------------------------------------------------
// Shared fixtures.

struct ToyFixture {
    oracle_error: f64,
    report: ManifoldReport,
    second_invariance: f64,
    uniqueness_gap: f64,
    solve_seconds: f64,
}

struct DecayCase {
    label: String,
    alpha: f64,
    alpha_fit: f64,
    invariance: f64,
    seconds: f64,
}

struct TorusUniqueness {
    gap: f64,
    invariance: [f64; 2],
}

static TOY: OnceLock<Result<ToyFixture, String>> = OnceLock::new();
static DECAY: OnceLock<Result<Vec<DecayCase>, String>> = OnceLock::new();
static TORUS_UNIQ: OnceLock<Result<TorusUniqueness, String>> = OnceLock::new();

/// Pure power decay `t^-1`, the envelope named by the toy criterion. Its
/// logarithmic derivative is `1/t <= 0.01` on windows starting at `t = 100`.
fn toy_rho(t: f64) -> f64 {
    1.0 / t
}

fn toy_series(t: f64) -> f64 {
    shift_series(toy_rho, t)
}

fn toy_map() -> DiscreteMap {
    shift_map(toy_rho)
}

/// Shift model `f(t, (x, s)) = (2x, s/2 + rho(t))` with time step `-1`:
/// the exactly solvable fixed-point example the battery checks. Public so
/// the command-line front end runs the identical model.
pub fn shift_map(rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> DiscreteMap {
    DiscreteMap::new(2, -1.0, move |t, x, out| {
        out[0] = 2.0 * x[0];
        out[1] = 0.5 * x[1] + rho(t);
    })
}

/// Stationary part of the shift model with its saddle splitting.
pub fn shift_model() -> StationaryModel {
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

/// Exact fixed-point section of the shift model by brute-force summation
/// of `sum_j 2^-j rho(t + 1 + j)`; 300 terms put the truncation tail far
/// below every comparison tolerance for any nonincreasing profile.
pub fn shift_series(rho: impl Fn(f64) -> f64, t: f64) -> f64 {
    (0..300).map(|j| 2.0f64.powi(-j) * rho(t + 1.0 + j as f64)).sum()
}

fn toy_grid() -> SectionGrid {
    let t_nodes: Vec<f64> = (0..141).map(|i| 100.0 + i as f64).collect();
    let axis: Vec<f64> = (0..5).map(|i| -0.5 + 0.25 * i as f64).collect();
    SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic).unwrap()
}

fn toy_fixture() -> &'static Result<ToyFixture, String> {
    TOY.get_or_init(|| {
        let weight = Weight::custom("power:1 (exact)", 0.01, toy_rho);
        let settings = ManifoldSettings::new(1e-10);
        let clock = Instant::now();
        let (section, report) =
            unstable_manifold(&toy_map(), &shift_model(), &weight, toy_grid(), 200.0, &settings)
                .map_err(|e| format!("toy solve: {e}"))?;
        let solve_seconds = clock.elapsed().as_secs_f64();

        let mut oracle_error = 0.0f64;
        let mut out = [0.0];
        for it in section.window_node_range() {
            let t = section.t_nodes()[it];
            if t > 200.0 {
                continue;
            }
            for &x in &[-0.5, -0.2, 0.0, 0.3, 0.5] {
                section.eval(t, &[x], &mut out);
                oracle_error = oracle_error.max((out[0] - toy_series(t)).abs());
            }
        }

        // A second start inside the weighted ball (|bias| stays under
        // rho(t) times an order-one constant on the grid) probes uniqueness.
        let mut biased = toy_grid();
        biased.fill_with(|t, _| vec![0.004 * (0.1 * t).sin()]);
        let (other, second_report) =
            unstable_manifold(&toy_map(), &shift_model(), &weight, biased, 200.0, &settings)
                .map_err(|e| format!("toy biased solve: {e}"))?;
        let uniqueness_gap = section_gap(&section, &other);

        Ok(ToyFixture {
            oracle_error,
            report,
            second_invariance: second_report.invariance_residual,
            uniqueness_gap,
            solve_seconds,
        })
    })
}

/// Sup over all nodes lying in both windows of the value difference. The
/// grids must share their node layout.
fn section_gap(a: &SectionGrid, b: &SectionGrid) -> f64 {
    assert_eq!(a.n_t(), b.n_t());
    assert_eq!(a.n_base(), b.n_base());
    let lo = a.window().0.max(b.window().0);
    let hi = a.window().1.min(b.window().1);
    let mut gap = 0.0f64;
    for it in 0..a.n_t() {
        let t = a.t_nodes()[it];
        if t < lo || t > hi {
            continue;
        }
        for ib in 0..a.n_base() {
            for (va, vb) in a.value(it, ib).iter().zip(b.value(it, ib)) {
                gap = gap.max((va - vb).abs());
            }
        }
    }
    gap
}

/// Decay envelope `|amplitude| <t>^-alpha`. Scaling the weight by the
/// forcing amplitude keeps the start-time admissibility check meaningful:
/// sections are then order one in units of the weight. A tiny floor keeps
/// the weight positive for amplitude zero.
pub fn decay_envelope_weight(alpha: f64, amplitude: f64) -> Weight {
    let amp = amplitude.abs().max(1e-12);
    Weight::custom(
        format!("envelope(alpha={alpha})"),
        alpha / 2.0,
        move |t: f64| amp * (1.0 + t * t).powf(-alpha / 2.0),
    )
}

fn log_t_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn uniform_axis(half_width: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect()
}

const DECAY_EXPONENTS: [f64; 3] = [0.5, 1.0, 2.0];
const DECAY_FIT_RANGE: (f64, f64) = (1.0e2, 1.0e4);

fn torus_decay_case(alpha: f64) -> Result<DecayCase, String> {
    let clock = Instant::now();
    let amplitude = 0.05;
    let field = torus_perturbed_field(alpha, amplitude, PerturbationProfile::Constant);
    // Node density sets the post-convergence residual checks through the
    // cubic interpolation error. In time, the invariance residual sees the
    // value error at the sparse top of the log grid; 400 nodes keep it an
    // order of magnitude under the engine bound for the slowest-decaying
    // case. In the base, the section is amplitude * <t>^-alpha * x / sin x,
    // and the tangency check differentiates the interpolant across the
    // axis, so the axis spacing enters cubed; 17 nodes over the half-width
    // 0.25 chart keep that term near 1e-9 at alpha = 1/2.
    let grid = SectionGrid::zeros(
        log_t_nodes(100.0, 1.004e4, 400),
        vec![uniform_axis(0.25, 17)],
        1,
        Interpolation::Cubic,
    )
    .map_err(|e| e.to_string())?;
    let (section, report) = flow_unstable_manifold(
        &field,
        &torus_stationary_model(2),
        &decay_envelope_weight(alpha, amplitude),
        grid,
        DECAY_FIT_RANGE.1,
        &ManifoldSettings::new(1e-9),
    )
    .map_err(|e| format!("torus alpha={alpha}: {e}"))?;
    let fit = fit_decay_rate(&section, DECAY_FIT_RANGE.0, DECAY_FIT_RANGE.1)
        .map_err(|e| format!("torus alpha={alpha} fit: {e}"))?;
    Ok(DecayCase {
        label: format!("torus alpha={alpha}"),
        alpha,
        alpha_fit: fit.alpha_fit,
        invariance: report.invariance_residual,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Restriction of a section to the chart origin, as a grid with a single
/// base node. On the trapped orbit the stationary manifold passes through
/// zero, so this line carries the decaying response alone; away from the
/// origin the time-independent curvature of the stationary manifold
/// dominates the sup norm and hides the decay.
fn center_line_grid(section: &SectionGrid) -> Result<SectionGrid, String> {
    assert_eq!(section.base_dim(), 1, "center line needs a one-axis base");
    assert!(section.n_base() % 2 == 1, "center line needs an origin node");
    let center = section.n_base() / 2;
    let mut line = SectionGrid::zeros(
        section.t_nodes().to_vec(),
        vec![vec![0.0]],
        section.fiber_dim(),
        Interpolation::Cubic,
    )
    .map_err(|e| e.to_string())?;
    let (lo, hi) = section.window();
    line.set_window(lo, hi);
    for it in 0..section.n_t() {
        let src = section.value(it, center);
        line.value_mut(it, 0).copy_from_slice(src);
    }
    Ok(line)
}

fn kerr_decay_case(alpha: f64) -> Result<DecayCase, String> {
    let clock = Instant::now();
    let params = KerrParams::new(1.0, 0.5);
    let pert = MetricPerturbation {
        alpha,
        amplitude: 0.01,
        shape: PerturbationShape::DtDtSinR,
    };
    let settings = KerrManifoldSettings {
        epsilon: 0.05,
        t_start: 100.0,
        required_top: DECAY_FIT_RANGE.1,
        iteration_buffer: 120,
        n_t: 72,
        n_base: 5,
        tol: 1e-7,
        ..KerrManifoldSettings::default()
    };
    let manifold = kerr_stable_manifold(&params, Some(&pert), &settings)
        .map_err(|e| format!("kerr alpha={alpha}: {e}"))?;
    let line = center_line_grid(&manifold.section)?;
    let fit = fit_decay_rate(&line, DECAY_FIT_RANGE.0, DECAY_FIT_RANGE.1)
        .map_err(|e| format!("kerr alpha={alpha} fit: {e}"))?;
    Ok(DecayCase {
        label: format!("kerr alpha={alpha}"),
        alpha,
        alpha_fit: fit.alpha_fit,
        invariance: manifold.report.invariance_residual,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

fn decay_fixture() -> &'static Result<Vec<DecayCase>, String> {
    DECAY.get_or_init(|| {
        let mut cases = Vec::with_capacity(2 * DECAY_EXPONENTS.len());
        for &alpha in &DECAY_EXPONENTS {
            cases.push(torus_decay_case(alpha)?);
        }
        for &alpha in &DECAY_EXPONENTS {
            cases.push(kerr_decay_case(alpha)?);
        }
        Ok(cases)
    })
}

fn torus_uniqueness_fixture() -> &'static Result<TorusUniqueness, String> {
    TORUS_UNIQ.get_or_init(|| {
        let (alpha, amplitude) = (1.0, 0.05);
        let field = torus_perturbed_field(alpha, amplitude, PerturbationProfile::SinX);
        let weight = decay_envelope_weight(alpha, amplitude);
        let settings = ManifoldSettings::new(1e-9);
        let model = torus_stationary_model(2);
        let grid = || {
            SectionGrid::zeros(
                (0..241).map(|i| 100.0 + 0.25 * i as f64).collect(),
                vec![uniform_axis(0.25, 5)],
                1,
                Interpolation::Cubic,
            )
            .unwrap()
        };
        let (a, ra) = flow_unstable_manifold(&field, &model, &weight, grid(), 110.0, &settings)
            .map_err(|e| format!("torus uniqueness run 1: {e}"))?;
        let mut biased = grid();
        // Stays within the weighted ball: rho(t) is about 5e-4 across the
        // grid, so a 2e-4 bias is admissible with an order-one constant.
        biased.fill_with(|t, _| vec![2e-4 * (0.07 * t).sin()]);
        let (b, rb) = flow_unstable_manifold(&field, &model, &weight, biased, 110.0, &settings)
            .map_err(|e| format!("torus uniqueness run 2: {e}"))?;
        Ok(TorusUniqueness {
            gap: section_gap(&a, &b),
            invariance: [ra.invariance_residual, rb.invariance_residual],
        })
    })
}

// ---------------------------------------------------------------------------
// Criteria 1-11.

fn toy_oracle_criterion() -> (bool, String) {
    match toy_fixture() {
        Ok(fix) => {
            let passed = fix.oracle_error < 1e-8 && fix.solve_seconds < 10.0;
            (
                passed,
                format!(
                    "sup |section - series| = {:.2e} on t in [100, 200] (need < 1e-8), \
                     solve {:.2} s (need < 10 s)",
                    fix.oracle_error, fix.solve_seconds
                ),
            )
        }
        Err(e) => (false, e.clone()),
    }
}

fn schwarzschild_guess() -> PhasePoint {
    PhasePoint::new(0.0, 3.4, FRAC_PI_2, 0.0, 1.0, 0.05, 0.0, -4.5)
}

/// Bisection root of the derivative of the equatorial radial potential
/// `r^4 / Delta`, which has a single interior minimum between the horizon
/// (where the potential diverges) and large radius (where it grows).
fn radial_potential_minimum(m: f64) -> f64 {
    let dpot = |r: f64| {
        let delta = r * r - 2.0 * m * r;
        4.0 * r.powi(3) * delta - r.powi(4) * (2.0 * r - 2.0 * m)
    };
    let (mut lo, mut hi) = (2.2 * m, 8.0 * m);
    assert!(dpot(lo) < 0.0 && dpot(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dpot(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn schwarzschild_radius_criterion() -> (bool, String) {
    let clock = Instant::now();
    let params = KerrParams::new(1.0, 0.0);
    match trapped_set_solve(&params, TrappedMode::Equatorial, &schwarzschild_guess(), 1e-12) {
        Ok(tp) => {
            let seconds = clock.elapsed().as_secs_f64();
            let oracle = radial_potential_minimum(1.0);
            let dr = (tp.point.r - oracle).abs();
            let worst = tp.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            let passed = dr < 1e-10 && worst < 1e-9 && seconds < 1.0;
            (
                passed,
                format!(
                    "r = {:.12}, |r - oracle| = {dr:.2e} (need < 1e-10), max residual \
                     {worst:.2e} (need < 1e-9), {seconds:.3} s (need < 1 s)",
                    tp.point.r
                ),
            )
        }
        Err(e) => (false, format!("solve failed: {e}")),
    }
}

fn solved_schwarzschild() -> Result<TrappedPoint, String> {
    trapped_set_solve(
        &KerrParams::new(1.0, 0.0),
        TrappedMode::Equatorial,
        &schwarzschild_guess(),
        1e-12,
    )
    .map_err(|e| format!("solve failed: {e}"))
}

fn minimal_rate_criterion() -> (bool, String) {
    let clock = Instant::now();
    let params = KerrParams::new(1.0, 0.0);
    let tp = match solved_schwarzschild() {
        Ok(tp) => tp,
        Err(e) => return (false, e),
    };
    let rates = match expansion_rates(&params, &tp, ConformalFactor::RhoSquared, 1e-5) {
        Ok(r) => r,
        Err(e) => return (false, format!("rates failed: {e}")),
    };
    let seconds = clock.elapsed().as_secs_f64();

    let scale = fault_rate_scale();
    let nu = rates.nu_min * scale;
    let target = 6.0 * 3.0f64.sqrt();
    let rel = (nu - target).abs() / target;
    // The time function grows at rate sigma^-1 H t = 6 on the trapped set,
    // which fixes the normalization the minimal rate is quoted in.
    let cross = hamilton_exact(&params, &tp.point)[0] / tp.point.sigma;
    let cross_err = (cross - 6.0).abs();
    let passed = rel < 1e-4 && cross_err < 1e-6 && seconds < 1.0;
    let mut detail = format!(
        "nu_min = {nu:.8} vs 6 sqrt(3) = {target:.8}, rel err {rel:.2e} (need < 1e-4); \
         sigma^-1 H t = {cross:.9}, err {cross_err:.2e} (need < 1e-6); {seconds:.3} s",
    );
    if scale != 1.0 {
        detail.push_str(&format!(" [rate scaled by {scale} via {FAULT_RATE_SCALE_VAR}]"));
    }
    (passed, detail)
}

fn kerr_equatorial_radius_criterion() -> (bool, String) {
    let params = KerrParams::new(1.0, 0.5);
    let guess = PhasePoint::new(0.0, 2.4, FRAC_PI_2, 0.0, 1.0, 0.05, 0.0, -4.0);
    match trapped_set_solve(&params, TrappedMode::Equatorial, &guess, 1e-12) {
        Ok(tp) => {
            let closed = equatorial_trapped_radius(&params, ReducedBranch::Prograde);
            let dr = (tp.point.r - closed).abs();
            (
                dr < 1e-8,
                format!(
                    "solver r = {:.12}, closed form {closed:.12}, |diff| = {dr:.2e} \
                     (need < 1e-8)",
                    tp.point.r
                ),
            )
        }
        Err(e) => (false, format!("solve failed: {e}")),
    }
}

fn torus_hypotheses_criterion() -> (bool, String) {
    let report = torus_verify(0.0);
    let errs = [
        (report.w_u_at_gamma - 1.0).abs(),
        (report.w_s_at_gamma - 1.0).abs(),
        (report.bracket_at_gamma - 1.0).abs(),
    ];
    let worst = errs.iter().fold(0.0f64, |m, e| m.max(*e));
    (
        worst < 1e-6,
        format!(
            "w_u = {:.9}, w_s = {:.9}, normalized bracket = {:.9}; max deviation from 1 \
             is {worst:.2e} (need < 1e-6)",
            report.w_u_at_gamma, report.w_s_at_gamma, report.bracket_at_gamma
        ),
    )
}

fn decay_transfer_criterion() -> (bool, String) {
    match decay_fixture() {
        Ok(cases) => {
            let mut passed = true;
            let mut parts = Vec::new();
            for case in cases {
                let err = (case.alpha_fit - case.alpha).abs();
                let ok = err <= 0.1 && case.seconds < 300.0;
                passed &= ok;
                parts.push(format!(
                    "{}: fit {:.3} (err {:.3}, {:.0} s)",
                    case.label, case.alpha_fit, err, case.seconds
                ));
            }
            (
                passed,
                format!("{} (need |fit - alpha| <= 0.1, < 300 s each)", parts.join("; ")),
            )
        }
        Err(e) => (false, e.clone()),
    }
}

fn invariance_criterion() -> (bool, String) {
    let mut residuals: Vec<(String, f64)> = Vec::new();
    match toy_fixture() {
        Ok(fix) => {
            residuals.push(("toy".into(), fix.report.invariance_residual));
            residuals.push(("toy biased".into(), fix.second_invariance));
        }
        Err(e) => return (false, e.clone()),
    }
    match decay_fixture() {
        Ok(cases) => {
            for case in cases {
                residuals.push((case.label.clone(), case.invariance));
            }
        }
        Err(e) => return (false, e.clone()),
    }
    match torus_uniqueness_fixture() {
        Ok(fix) => {
            residuals.push(("torus uniqueness 1".into(), fix.invariance[0]));
            residuals.push(("torus uniqueness 2".into(), fix.invariance[1]));
        }
        Err(e) => return (false, e.clone()),
    }
    let (worst_label, worst) = residuals
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(l, r)| (l.clone(), *r))
        .unwrap();
    (
        worst < 1e-6,
        format!(
            "max invariance residual {worst:.2e} ({worst_label}) across {} converged \
             sections at 100 random samples each (need < 1e-6)",
            residuals.len()
        ),
    )
}

fn uniqueness_criterion() -> (bool, String) {
    let toy_gap = match toy_fixture() {
        Ok(fix) => fix.uniqueness_gap,
        Err(e) => return (false, e.clone()),
    };
    let torus_gap = match torus_uniqueness_fixture() {
        Ok(fix) => fix.gap,
        Err(e) => return (false, e.clone()),
    };
    (
        toy_gap < 1e-6 && torus_gap < 1e-6,
        format!(
            "two-start sup gaps: toy {toy_gap:.2e}, torus {torus_gap:.2e} (need < 1e-6)"
        ),
    )
}

fn contraction_criterion() -> (bool, String) {
    match toy_fixture() {
        Ok(fix) => {
            let theta = fix.report.theta_estimate;
            let bound = fix.report.theta_predicted;
            let passed = theta < 1.0 && (theta - bound).abs() <= 0.1 && (bound - 0.5).abs() < 1e-9;
            (
                passed,
                format!(
                    "measured theta = {theta:.4} (need < 1), predicted bound {bound:.4} \
                     (toy value 1/2), |measured - predicted| = {:.3} (need <= 0.1)",
                    (theta - bound).abs()
                ),
            )
        }
        Err(e) => (false, e.clone()),
    }
}

fn characteristic_graph_criterion() -> (bool, String) {
    // Generic example: unit principal part plus a decaying sinusoidal
    // perturbation, solved on a product grid in (tau, x').
    let alpha = 1.0;
    let p0 = |x0: f64, _xp: &[f64]| x0;
    let p_tilde = move |tau: f64, x0: f64, xp: &[f64]| {
        0.4 * (1.0 + tau * tau).powf(-alpha / 2.0) * (x0 + xp[0]).sin()
    };
    let points: Vec<Vec<f64>> = (0..9).map(|k| vec![-1.0 + 0.25 * k as f64]).collect();
    let taus: Vec<f64> = (0..40).map(|k| 2.0 + k as f64).collect();
    let graph = match characteristic_graph(&p0, &p_tilde, &points, &taus, alpha, 2.0, 1e-13) {
        Ok(g) => g,
        Err(e) => return (false, format!("graph solve failed: {e}")),
    };

    // Independent oracle: 50 fixed-point iterations of x -> -p_tilde, which
    // converge geometrically at the contraction factor and land far below
    // the comparison tolerance.
    let mut worst_residual = 0.0f64;
    let mut worst_diff = 0.0f64;
    let mut oracle_sup = 0.0f64;
    for (i, &tau) in taus.iter().enumerate() {
        for (j, xp) in points.iter().enumerate() {
            let x = graph.values[i][j];
            worst_residual = worst_residual.max((p0(x, xp) + p_tilde(tau, x, xp)).abs());
            let mut y = 0.0;
            for _ in 0..50 {
                y = -p_tilde(tau, y, xp);
            }
            worst_diff = worst_diff.max((x - y).abs());
            oracle_sup = oracle_sup.max((1.0 + tau * tau).powf(alpha / 2.0) * y.abs());
        }
    }
    let sup_diff = (graph.sup_normalized - oracle_sup).abs();
    let passed = worst_residual < 1e-12 && worst_diff < 1e-10 && sup_diff < 1e-10;
    (
        passed,
        format!(
            "max |p| at graph = {worst_residual:.2e} (need < 1e-12); max pointwise gap to \
             the fixed-point oracle = {worst_diff:.2e}, weighted sup gap = {sup_diff:.2e} \
             (need < 1e-10); contraction estimate {:.3}",
            graph.contraction_estimate
        ),
    )
}

/// Null starts for the conservation battery: base position plus the radial
/// and angular momenta; `xi_theta` is then solved from the null constraint.
const CONSERVATION_STARTS: [(f64, f64, f64, f64, f64); 3] = [
    (5.0, 1.3, 1.0, 0.1, 1.2),
    (4.0, FRAC_PI_2, 1.0, -0.2, 2.0),
    (6.0, 1.1, -1.0, 0.15, -1.5),
];

fn conservation_criterion() -> (bool, String) {
    let params = KerrParams::new(1.0, 0.7);
    let field = VectorField::new(8, 0.0, move |_t, c, out| {
        let pt = PhasePoint::from_coords(c);
        out.copy_from_slice(&hamilton_exact(&params, &pt));
    });

    let mut worst = 0.0f64;
    for &(r, theta, sigma, xi_r, xi_phi) in &CONSERVATION_STARTS {
        let mut pt = PhasePoint::new(0.0, r, theta, 0.0, sigma, xi_r, 0.0, xi_phi);
        let rest = dual_metric_exact(&params, &pt);
        if rest <= 0.0 {
            return (
                false,
                format!("start r = {r} is not null-completable (residual form {rest:.3e})"),
            );
        }
        pt.xi_theta = (rest * params.rho_sq(pt.r, pt.theta)).sqrt();
        let g0 = dual_metric_exact(&params, &pt);

        let traj = match integrate(&field, 0.0, &pt.coords(), 50.0, 1e-11, &[]) {
            Ok(t) => t,
            Err(e) => return (false, format!("flow from r = {r} failed: {e}")),
        };
        let end = PhasePoint::from_coords(&traj.final_state);
        let drifts = [
            (dual_metric_exact(&params, &end) - g0).abs(),
            (end.sigma - pt.sigma).abs(),
            (end.xi_phi - pt.xi_phi).abs(),
        ];
        for d in drifts {
            worst = worst.max(d);
        }
    }
    (
        worst < 1e-8,
        format!(
            "max drift of (G, sigma, xi_phi) over {} null flows of 50 units: {worst:.2e} \
             (need < 1e-8)",
            CONSERVATION_STARTS.len()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_table_is_dense_and_ordered() {
        for (i, (id, name)) in CRITERIA.iter().enumerate() {
            assert_eq!(*id, i + 1);
            assert!(!name.is_empty());
        }
    }

    #[test]
    fn filter_selects_by_substring() {
        let names: Vec<&str> = CRITERIA
            .iter()
            .filter(|(_, n)| n.contains("radius"))
            .map(|(_, n)| *n)
            .collect();
        assert_eq!(names, vec!["schwarzschild-radius", "kerr-equatorial-radius"]);
    }

    #[test]
    fn radial_potential_oracle_sits_at_three_m() {
        assert!((radial_potential_minimum(1.0) - 3.0).abs() < 1e-12);
        assert!((radial_potential_minimum(2.0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn fault_scale_defaults_to_identity() {
        assert_eq!(fault_rate_scale(), 1.0);
    }
}
