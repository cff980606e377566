//! Command implementations. Each builds its model from the merged
//! parameters, runs the library, writes CSV artifacts with explicit
//! headers, and returns the constants the manifest records. Section values
//! depend only on the configuration, never on the seed or the clock.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::BufWriter;

use serde_json::{json, Value};

use nhim::graph_transform::{
    fit_decay_rate, flow_unstable_manifold, unstable_manifold, Interpolation, ManifoldReport,
    ManifoldSettings, SectionGrid, Weight,
};
use nhim::kerr::{
    center_line_decay, equatorial_orbit_guess, equatorial_trapped_radius, expansion_rates,
    kerr_stable_manifold, trapped_set_solve, KerrManifoldSettings, KerrParams, MetricPerturbation,
    PhasePoint, ReducedBranch, TrappedMode, TrappedPoint,
};
use nhim::suite;
use nhim::torus::torus_stationary_model;

use crate::artifacts::{
    fmt_f64, graph_error, kerr_error, write_csv_row, CommandOutcome, NumericalError, RunContext,
};
use crate::config::{
    branch, conformal, perturbation_shape, torus_profile, trapped_mode, CommandName,
    KerrManifoldParams, KerrRatesParams, KerrTrappedParams, RhoSpec, RunConfig, TorusParams,
    ToyParams, VerifyParams,
};

pub fn execute(
    command: CommandName,
    config: &RunConfig,
    ctx: &RunContext,
) -> Result<CommandOutcome, NumericalError> {
    match command {
        CommandName::Toy => toy(&config.toy.clone().unwrap_or_default(), ctx),
        CommandName::Torus => torus(&config.torus.clone().unwrap_or_default(), ctx),
        CommandName::KerrTrapped => {
            kerr_trapped(&config.kerr_trapped.clone().unwrap_or_default(), ctx)
        }
        CommandName::KerrRates => kerr_rates(&config.kerr_rates.clone().unwrap_or_default(), ctx),
        CommandName::KerrManifold => {
            kerr_manifold(&config.kerr_manifold.clone().unwrap_or_default(), ctx)
        }
        CommandName::Verify => verify(&config.verify.clone().unwrap_or_default(), ctx),
    }
}

fn io_error(e: impl std::fmt::Display) -> NumericalError {
    NumericalError {
        name: "Io".into(),
        detail: e.to_string(),
    }
}

fn uniform_axis(half_width: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect()
}

fn write_section_csv(
    section: &SectionGrid,
    ctx: &RunContext,
    file_name: &str,
) -> Result<(), NumericalError> {
    let file = File::create(ctx.path(file_name)).map_err(io_error)?;
    section
        .write_csv(BufWriter::new(file))
        .map_err(|e| graph_error(&e))
}

/// Report fields every manifold-producing command echoes: the contraction
/// data, the section-space constant, and the residuals.
fn report_json(report: &ManifoldReport) -> Value {
    json!({
        "iterations": report.iterations,
        "final_increment": report.final_increment,
        "invariance_residual": report.invariance_residual,
        "tangency_residual": report.tangency_residual,
        "theta": report.theta_estimate,
        "theta_predicted": report.theta_predicted,
        "rates": report.rates,
        "c_sigma": report.rho_bounds.c_sigma(),
        "rho_bounds": report.rho_bounds,
        "window": { "lo": report.window.0, "hi": report.window.1 },
    })
}

fn toy(params: &ToyParams, ctx: &RunContext) -> Result<CommandOutcome, NumericalError> {
    let spec = RhoSpec::parse(&params.rho).expect("profile validated before dispatch");
    let weight = Weight::custom(
        params.rho.clone(),
        spec.log_derivative_bound(params.t_start),
        move |t| spec.eval(t),
    );
    let map = suite::shift_map(move |t| spec.eval(t));
    let model = suite::shift_model();

    let n_t = ((params.t_end + params.grid_buffer - params.t_start) / params.grid_step).round()
        as usize
        + 1;
    let t_nodes: Vec<f64> = (0..n_t)
        .map(|i| params.t_start + i as f64 * params.grid_step)
        .collect();
    let axis = uniform_axis(params.base_half_width, params.base_nodes);
    let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic)
        .map_err(|e| graph_error(&e))?;

    let mut settings = ManifoldSettings::new(params.tol);
    settings.seed = ctx.seed;
    let (section, report) =
        unstable_manifold(&map, &model, &weight, grid, params.t_end, &settings)
            .map_err(|e| graph_error(&e))?;

    let mut oracle_error = 0.0f64;
    let mut out = [0.0];
    for it in section.window_node_range() {
        let t = section.t_nodes()[it];
        if t > params.t_end {
            continue;
        }
        let exact = suite::shift_series(|u| spec.eval(u), t);
        for &x in &[-params.base_half_width, 0.0, params.base_half_width] {
            section.eval(t, &[x], &mut out);
            oracle_error = oracle_error.max((out[0] - exact).abs());
        }
    }

    write_section_csv(&section, ctx, "toy_section.csv")?;
    Ok(CommandOutcome {
        results: json!({
            "oracle_error": oracle_error,
            "oracle": "geometric series sum_j 2^-j rho(t + 1 + j), 300 terms",
            "report": report_json(&report),
        }),
        outputs: vec!["toy_section.csv".into()],
        failure: None,
    })
}

fn torus(params: &TorusParams, ctx: &RunContext) -> Result<CommandOutcome, NumericalError> {
    let profile = torus_profile(&params.profile).expect("profile validated before dispatch");
    let field = nhim::torus::torus_perturbed_field(params.alpha, params.amplitude, profile);
    let weight = suite::decay_envelope_weight(params.alpha, params.amplitude);

    let n_t = ((params.t_top - params.t_start) / params.grid_step).round() as usize + 1;
    let t_nodes: Vec<f64> = (0..n_t)
        .map(|i| params.t_start + i as f64 * params.grid_step)
        .collect();
    let axis = uniform_axis(params.base_half_width, params.base_nodes);
    let grid = SectionGrid::zeros(t_nodes, vec![axis], 1, Interpolation::Cubic)
        .map_err(|e| graph_error(&e))?;

    let mut settings = ManifoldSettings::new(params.tol);
    settings.seed = ctx.seed;
    let (section, report) = flow_unstable_manifold(
        &field,
        &torus_stationary_model(2),
        &weight,
        grid,
        params.required_top,
        &settings,
    )
    .map_err(|e| graph_error(&e))?;

    // The section is identically zero at amplitude zero; the fit is then
    // undefined and reported as null rather than an error.
    let fit = fit_decay_rate(&section, params.t_start, params.required_top).ok();

    write_section_csv(&section, ctx, "torus_section.csv")?;
    Ok(CommandOutcome {
        results: json!({
            "decay_fit": fit,
            "report": report_json(&report),
        }),
        outputs: vec!["torus_section.csv".into()],
        failure: None,
    })
}

/// Newton seed for a trapped-point solve. The equatorial seed is the
/// closed-form orbit with its critical azimuthal momentum, which keeps the
/// solve inside the Newton basin for every subextremal spin; the spherical
/// seed starts near the polar orbit with the angular momentum left at zero.
fn trapped_guess(
    params: &KerrParams,
    mode: TrappedMode,
    br: ReducedBranch,
    sigma: f64,
    theta: f64,
) -> PhasePoint {
    match mode {
        TrappedMode::Equatorial => equatorial_orbit_guess(params, br, sigma),
        TrappedMode::Spherical => {
            PhasePoint::new(0.0, 3.0 * params.m, theta, 0.0, sigma, 0.05, 5.0 * sigma * params.m, 0.0)
        }
    }
}

fn solve_trapped(
    m: f64,
    a: f64,
    mode: TrappedMode,
    br: ReducedBranch,
    sigma: f64,
    theta: f64,
    tol: f64,
) -> Result<TrappedPoint, NumericalError> {
    let params = KerrParams::new(m, a);
    let guess = trapped_guess(&params, mode, br, sigma, theta);
    trapped_set_solve(&params, mode, &guess, tol).map_err(|e| kerr_error(&e))
}

fn trapped_point_json(tp: &TrappedPoint) -> Value {
    json!({
        "point": {
            "r": tp.point.r,
            "theta": tp.point.theta,
            "sigma": tp.point.sigma,
            "xi_r": tp.point.xi_r,
            "xi_theta": tp.point.xi_theta,
            "xi_phi": tp.point.xi_phi,
        },
        "residuals": {
            "symbol": tp.residuals[0],
            "radial_derivative": tp.residuals[1],
            "radial_second_derivative": tp.residuals[2],
        },
        "component": format!("{:?}", tp.component),
    })
}

fn kerr_trapped(
    params: &KerrTrappedParams,
    ctx: &RunContext,
) -> Result<CommandOutcome, NumericalError> {
    let mode = trapped_mode(&params.mode).expect("mode validated before dispatch");
    let br = branch(&params.branch).expect("branch validated before dispatch");
    let tp = solve_trapped(
        params.m,
        params.a,
        mode,
        br,
        params.sigma,
        params.theta,
        params.tol,
    )?;

    let kp = KerrParams::new(params.m, params.a);
    let closed_form = matches!(mode, TrappedMode::Equatorial)
        .then(|| equatorial_trapped_radius(&kp, br));
    let headers = [
        "m", "a", "mode", "branch", "component", "r", "theta", "sigma", "xi_r", "xi_theta",
        "xi_phi", "residual_symbol", "residual_radial", "residual_radial_second",
        "closed_form_r", "closed_form_gap",
    ];
    let row = vec![
        fmt_f64(params.m),
        fmt_f64(params.a),
        params.mode.clone(),
        params.branch.clone(),
        format!("{:?}", tp.component),
        fmt_f64(tp.point.r),
        fmt_f64(tp.point.theta),
        fmt_f64(tp.point.sigma),
        fmt_f64(tp.point.xi_r),
        fmt_f64(tp.point.xi_theta),
        fmt_f64(tp.point.xi_phi),
        fmt_f64(tp.residuals[0]),
        fmt_f64(tp.residuals[1]),
        fmt_f64(tp.residuals[2]),
        closed_form.map(fmt_f64).unwrap_or_default(),
        closed_form
            .map(|r0| fmt_f64((tp.point.r - r0).abs()))
            .unwrap_or_default(),
    ];
    write_csv_row(&ctx.path("kerr_trapped.csv"), &headers, &row).map_err(io_error)?;

    Ok(CommandOutcome {
        results: json!({
            "trapped": trapped_point_json(&tp),
            "closed_form_r": closed_form,
        }),
        outputs: vec!["kerr_trapped.csv".into()],
        failure: None,
    })
}

fn kerr_rates(
    params: &KerrRatesParams,
    ctx: &RunContext,
) -> Result<CommandOutcome, NumericalError> {
    let br = branch(&params.branch).expect("branch validated before dispatch");
    let xi = conformal(&params.conformal).expect("conformal validated before dispatch");
    let tp = solve_trapped(
        params.m,
        params.a,
        TrappedMode::Equatorial,
        br,
        1.0,
        FRAC_PI_2,
        params.tol,
    )?;
    let kp = KerrParams::new(params.m, params.a);
    let rates = expansion_rates(&kp, &tp, xi, params.fd_step).map_err(|e| kerr_error(&e))?;

    let headers = ["m", "a", "branch", "conformal", "r", "w_u", "w_s", "nu_min"];
    let row = vec![
        fmt_f64(params.m),
        fmt_f64(params.a),
        params.branch.clone(),
        params.conformal.clone(),
        fmt_f64(tp.point.r),
        fmt_f64(rates.w_u),
        fmt_f64(rates.w_s),
        fmt_f64(rates.nu_min),
    ];
    write_csv_row(&ctx.path("kerr_rates.csv"), &headers, &row).map_err(io_error)?;

    Ok(CommandOutcome {
        results: json!({
            "trapped": trapped_point_json(&tp),
            "rates": rates,
        }),
        outputs: vec!["kerr_rates.csv".into()],
        failure: None,
    })
}

fn kerr_manifold(
    params: &KerrManifoldParams,
    ctx: &RunContext,
) -> Result<CommandOutcome, NumericalError> {
    let br = branch(&params.branch).expect("branch validated before dispatch");
    let pert = (params.amplitude != 0.0).then(|| MetricPerturbation {
        alpha: params.alpha,
        amplitude: params.amplitude,
        shape: perturbation_shape(&params.shape).expect("shape validated before dispatch"),
    });
    let settings = KerrManifoldSettings {
        branch: br,
        epsilon: params.epsilon,
        t_start: params.t_start,
        required_top: params.required_top,
        iteration_buffer: params.iteration_buffer,
        n_t: params.n_t,
        n_base: params.n_base,
        tol: params.tol,
        seed: ctx.seed,
        ..KerrManifoldSettings::default()
    };
    let kp = KerrParams::new(params.m, params.a);
    let manifold =
        kerr_stable_manifold(&kp, pert.as_ref(), &settings).map_err(|e| kerr_error(&e))?;

    write_section_csv(&manifold.section, ctx, "kerr_manifold_section.csv")?;

    // Values along the trapped-orbit line, where the stationary part of the
    // section vanishes and the decaying response is visible directly.
    let center = manifold.section.n_base() / 2;
    {
        let mut w = csv::Writer::from_path(ctx.path("kerr_manifold_center_line.csv"))
            .map_err(io_error)?;
        w.write_record(["t", "sigma_center"]).map_err(io_error)?;
        for it in manifold.section.window_node_range() {
            let t = manifold.section.t_nodes()[it];
            let v = manifold.section.value(it, center)[0];
            w.write_record([fmt_f64(t), fmt_f64(v)]).map_err(io_error)?;
        }
        w.flush().map_err(io_error)?;
    }

    // Undefined (and reported null) for the stationary background, whose
    // center line is zero.
    let center_fit = pert
        .is_some()
        .then(|| center_line_decay(&manifold.section, params.t_start, params.required_top).ok())
        .flatten();

    Ok(CommandOutcome {
        results: json!({
            "trapped_radius": manifold.r_star,
            "chart": {
                "e_base": manifold.e_base,
                "e_fiber": manifold.e_fiber,
                "rate_base": manifold.rate_base,
                "rate_fiber": manifold.rate_fiber,
            },
            "center_line_decay": center_fit,
            "report": report_json(&manifold.report),
        }),
        outputs: vec![
            "kerr_manifold_section.csv".into(),
            "kerr_manifold_center_line.csv".into(),
        ],
        failure: None,
    })
}

fn verify(params: &VerifyParams, ctx: &RunContext) -> Result<CommandOutcome, NumericalError> {
    let results = suite::run_all(params.only.as_deref());

    println!("{:<4} {:<24} {:<6} {:>9}", "id", "criterion", "result", "seconds");
    for r in &results {
        println!(
            "{:<4} {:<24} {:<6} {:>9.2}",
            format!("{:02}", r.id),
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
        );
        println!("     {}", r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("summary: {} passed, {} failed", results.len() - failed, failed);

    let mut w = csv::Writer::from_path(ctx.path("verify_results.csv")).map_err(io_error)?;
    w.write_record(["id", "name", "passed", "seconds", "detail"])
        .map_err(io_error)?;
    for r in &results {
        w.write_record([
            r.id.to_string(),
            r.name.to_string(),
            r.passed.to_string(),
            format!("{:.3}", r.seconds),
            r.detail.clone(),
        ])
        .map_err(io_error)?;
    }
    w.flush().map_err(io_error)?;

    let table: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "name": r.name,
                "passed": r.passed,
                "seconds": r.seconds,
                "detail": r.detail,
            })
        })
        .collect();
    Ok(CommandOutcome {
        results: json!({
            "criteria": table,
            "passed": results.len() - failed,
            "failed": failed,
        }),
        outputs: vec!["verify_results.csv".into()],
        failure: (failed > 0).then(|| NumericalError {
            name: "CriteriaFailed".into(),
            detail: format!("{failed} of {} criteria failed", results.len()),
        }),
    })
}
