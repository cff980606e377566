//! Command-line front end for the invariant-manifold library. A run is
//! described by one configuration document (TOML primary, JSON accepted);
//! subcommand flags override individual fields. Every run writes a manifest
//! JSON next to its CSV artifacts. Exit codes: 0 on success, 1 for
//! configuration errors, 2 for numerical failures, with the failing module
//! error named in the manifest.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use artifacts::RunContext;
use config::{validate, CommandName, RunConfig};

/// Environment variable overriding the output directory (flag wins).
const OUTPUT_DIR_VAR: &str = "NHIM_OUTPUT_DIR";

/// Default seed for randomized residual sampling, shared with the library
/// settings types.
const DEFAULT_SEED: u64 = 0x6e68_696d;

#[derive(Debug, Parser)]
#[command(
    name = "nhim",
    version,
    about = "Time-dependent invariant manifolds: toy, torus, and black-hole runs"
)]
struct Cli {
    /// Configuration file applied before subcommand flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for the manifest and CSV artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Seed for residual sampling; section values never depend on it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the command named inside a configuration file.
    Run {
        /// Configuration file naming the command and its parameters.
        path: PathBuf,
    },
    /// Shift-model section compared against its series oracle.
    Toy(ToyArgs),
    /// Perturbed unstable section over the invariant circle.
    Torus(TorusArgs),
    /// Trapped-point solve on a rotating black-hole background.
    KerrTrapped(KerrTrappedArgs),
    /// Expansion rates at the equatorial trapped point.
    KerrRates(KerrRatesArgs),
    /// Stable manifold for a decaying metric perturbation.
    KerrManifold(KerrManifoldArgs),
    /// Run the verification battery and print a pass/fail table.
    Verify(VerifyArgs),
}

/// Copies flag values over the corresponding config fields, so flags win
/// over the file and the file wins over defaults.
macro_rules! apply_opt {
    ($params:expr, $args:expr, $($field:ident),+ $(,)?) => {
        $(
            if let Some(v) = $args.$field.clone() {
                $params.$field = v;
            }
        )+
    };
}

#[derive(Debug, Args, Default)]
struct ToyArgs {
    /// Decay profile, `power:k` or `exp:eta`.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Grid allocated above t_end, consumed one node per iteration.
    #[arg(long)]
    grid_buffer: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    base_half_width: Option<f64>,
    #[arg(long)]
    base_nodes: Option<usize>,
}

impl ToyArgs {
    fn apply(&self, p: &mut config::ToyParams) {
        apply_opt!(
            p, self, rho, tol, t_start, t_end, grid_buffer, grid_step, base_half_width,
            base_nodes
        );
    }
}

#[derive(Debug, Args, Default)]
struct TorusArgs {
    /// Decay exponent of the forcing envelope.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Forcing profile: constant, sin-x, or sin-x-cos-t.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t_start: Option<f64>,
    /// The converged window must still cover up to this time.
    #[arg(long)]
    required_top: Option<f64>,
    /// Top of the allocated grid.
    #[arg(long)]
    t_top: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    base_half_width: Option<f64>,
    #[arg(long)]
    base_nodes: Option<usize>,
}

impl TorusArgs {
    fn apply(&self, p: &mut config::TorusParams) {
        apply_opt!(
            p, self, alpha, amplitude, profile, tol, t_start, required_top, t_top, grid_step,
            base_half_width, base_nodes
        );
    }
}

#[derive(Debug, Args, Default)]
struct KerrTrappedArgs {
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    /// equatorial or spherical.
    #[arg(long)]
    mode: Option<String>,
    /// prograde or retrograde.
    #[arg(long)]
    branch: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Polar angle of the spherical-mode seed.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

impl KerrTrappedArgs {
    fn apply(&self, p: &mut config::KerrTrappedParams) {
        apply_opt!(p, self, m, a, mode, branch, sigma, theta, tol);
    }
}

#[derive(Debug, Args, Default)]
struct KerrRatesArgs {
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    /// prograde or retrograde.
    #[arg(long)]
    branch: Option<String>,
    /// rho-squared or unit.
    #[arg(long)]
    conformal: Option<String>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

impl KerrRatesArgs {
    fn apply(&self, p: &mut config::KerrRatesParams) {
        apply_opt!(p, self, m, a, branch, conformal, fd_step, tol);
    }
}

#[derive(Debug, Args, Default)]
struct KerrManifoldArgs {
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    /// prograde or retrograde.
    #[arg(long)]
    branch: Option<String>,
    /// Decay exponent of the metric perturbation.
    #[arg(long)]
    alpha: Option<f64>,
    /// Zero runs the stationary background instead.
    #[arg(long)]
    amplitude: Option<f64>,
    /// dt-dt-sin-r, dt-dt-unit, or sym-t-r-sin-r.
    #[arg(long)]
    shape: Option<String>,
    /// Chart half-width around the trapped orbit.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    required_top: Option<f64>,
    /// Extra grid nodes consumed by the iteration.
    #[arg(long)]
    iteration_buffer: Option<usize>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_base: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

impl KerrManifoldArgs {
    fn apply(&self, p: &mut config::KerrManifoldParams) {
        apply_opt!(
            p, self, m, a, branch, alpha, amplitude, shape, epsilon, t_start, required_top,
            iteration_buffer, n_t, n_base, tol
        );
    }
}

#[derive(Debug, Args, Default)]
struct VerifyArgs {
    /// Run only criteria whose name contains this substring.
    #[arg(long)]
    only: Option<String>,
}

impl VerifyArgs {
    fn apply(&self, p: &mut config::VerifyParams) {
        if let Some(v) = self.only.clone() {
            p.only = Some(v);
        }
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    let (command, cfg) = match prepare(&cli) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            eprintln!("usage: nhim <run FILE | toy | torus | kerr-trapped | kerr-rates | kerr-manifold | verify> [--help]");
            return 1;
        }
    };

    let out_dir = cli
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("nhim-out"));
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let ctx = match RunContext::new(out_dir, seed, cfg.clone()) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return 1;
        }
    };

    let outcome = commands::execute(command, &cfg, &ctx);
    if let Err(e) = ctx.write_manifest(&command.to_string(), &outcome) {
        eprintln!("error writing manifest: {e:#}");
        return 2;
    }
    match outcome {
        Ok(out) => match out.failure {
            None => 0,
            Some(f) => {
                eprintln!("{command} failed: {f}");
                2
            }
        },
        Err(f) => {
            eprintln!("{command} failed: {f}");
            2
        }
    }
}

/// Builds the effective configuration: file, then subcommand flags, then
/// global flag overrides. Also materializes the chosen command's parameter
/// block so the manifest echoes the values actually used.
fn prepare(cli: &Cli) -> Result<(CommandName, RunConfig)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };

    match &cli.command {
        None => bail!("no command given"),
        Some(Command::Run { path }) => {
            cfg = RunConfig::load(path)?;
        }
        Some(Command::Toy(args)) => {
            cfg.command = Some(CommandName::Toy);
            let mut p = cfg.toy.take().unwrap_or_default();
            args.apply(&mut p);
            cfg.toy = Some(p);
        }
        Some(Command::Torus(args)) => {
            cfg.command = Some(CommandName::Torus);
            let mut p = cfg.torus.take().unwrap_or_default();
            args.apply(&mut p);
            cfg.torus = Some(p);
        }
        Some(Command::KerrTrapped(args)) => {
            cfg.command = Some(CommandName::KerrTrapped);
            let mut p = cfg.kerr_trapped.take().unwrap_or_default();
            args.apply(&mut p);
            cfg.kerr_trapped = Some(p);
        }
        Some(Command::KerrRates(args)) => {
            cfg.command = Some(CommandName::KerrRates);
            let mut p = cfg.kerr_rates.take().unwrap_or_default();
            args.apply(&mut p);
            cfg.kerr_rates = Some(p);
        }
        Some(Command::KerrManifold(args)) => {
            cfg.command = Some(CommandName::KerrManifold);
            let mut p = cfg.kerr_manifold.take().unwrap_or_default();
            args.apply(&mut p);
            cfg.kerr_manifold = Some(p);
        }
        Some(Command::Verify(args)) => {
            cfg.command = Some(CommandName::Verify);
            let mut p = cfg.verify.take().unwrap_or_default();
            args.apply(&mut p);
            cfg.verify = Some(p);
        }
    }

    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = Some(dir.clone());
    }

    let Some(command) = cfg.command else {
        bail!("configuration names no command");
    };

    // Materialize the active block so defaults show up in the manifest echo.
    match command {
        CommandName::Toy => {
            cfg.toy.get_or_insert_with(Default::default);
        }
        CommandName::Torus => {
            cfg.torus.get_or_insert_with(Default::default);
        }
        CommandName::KerrTrapped => {
            cfg.kerr_trapped.get_or_insert_with(Default::default);
        }
        CommandName::KerrRates => {
            cfg.kerr_rates.get_or_insert_with(Default::default);
        }
        CommandName::KerrManifold => {
            cfg.kerr_manifold.get_or_insert_with(Default::default);
        }
        CommandName::Verify => {
            let p = cfg.verify.get_or_insert_with(Default::default);
            if let Some(only) = &p.only {
                if !nhim::suite::CRITERIA
                    .iter()
                    .any(|(_, name)| name.contains(only.as_str()))
                {
                    bail!("--only `{only}` matches no criterion name");
                }
            }
        }
    }

    validate(&cfg)?;
    Ok((command, cfg))
}
