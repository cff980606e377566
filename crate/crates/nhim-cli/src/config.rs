//! Run configuration: one document (TOML primary, JSON accepted) naming a
//! command and carrying a parameter block per command. Unknown keys are
//! rejected everywhere so a typo cannot silently fall back to a default.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Toy,
    Torus,
    KerrTrapped,
    KerrRates,
    KerrManifold,
    Verify,
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CommandName::Toy => "toy",
            CommandName::Torus => "torus",
            CommandName::KerrTrapped => "kerr-trapped",
            CommandName::KerrRates => "kerr-rates",
            CommandName::KerrManifold => "kerr-manifold",
            CommandName::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// Full run document. Every block is optional in the file; the command's
/// block is filled with defaults when absent.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<CommandName>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Seed for randomized residual sampling; section values never depend
    /// on it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub toy: Option<ToyParams>,
    #[serde(default)]
    pub torus: Option<TorusParams>,
    #[serde(default)]
    pub kerr_trapped: Option<KerrTrappedParams>,
    #[serde(default)]
    pub kerr_rates: Option<KerrRatesParams>,
    #[serde(default)]
    pub kerr_manifold: Option<KerrManifoldParams>,
    #[serde(default)]
    pub verify: Option<VerifyParams>,
}

impl RunConfig {
    /// Parses a config file. `.json` files are parsed as JSON; anything
    /// else is tried as TOML first and as JSON second.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            return serde_json::from_str(&text)
                .with_context(|| format!("parsing {} as JSON", path.display()));
        }
        match toml::from_str::<RunConfig>(&text) {
            Ok(cfg) => Ok(cfg),
            Err(toml_err) => match serde_json::from_str(&text) {
                Ok(cfg) => Ok(cfg),
                Err(_) => Err(toml_err)
                    .with_context(|| format!("parsing {} as TOML", path.display())),
            },
        }
    }
}

fn d_tol_manifold() -> f64 {
    1e-9
}

fn d_one() -> f64 {
    1.0
}

fn d_t_start() -> f64 {
    100.0
}

fn d_base_nodes() -> usize {
    5
}

/// Toy shift-model run: unstable section against the geometric-series
/// oracle built from the same decay profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyParams {
    /// Decay profile: `power:k` for `t^-k` or `exp:eta` for `e^(-eta t)`.
    #[serde(default = "ToyParams::d_rho")]
    pub rho: String,
    #[serde(default = "ToyParams::d_tol")]
    pub tol: f64,
    /// First time node; the window never shrinks from below.
    #[serde(default = "d_t_start")]
    pub t_start: f64,
    /// The converged window must still cover `[t_start, t_end]`.
    #[serde(default = "ToyParams::d_t_end")]
    pub t_end: f64,
    /// Grid allocated above `t_end`, consumed one node per iteration.
    #[serde(default = "ToyParams::d_grid_buffer")]
    pub grid_buffer: f64,
    #[serde(default = "d_one")]
    pub grid_step: f64,
    #[serde(default = "ToyParams::d_half_width")]
    pub base_half_width: f64,
    #[serde(default = "d_base_nodes")]
    pub base_nodes: usize,
}

impl ToyParams {
    fn d_rho() -> String {
        "power:1".into()
    }
    fn d_tol() -> f64 {
        1e-10
    }
    fn d_t_end() -> f64 {
        200.0
    }
    fn d_grid_buffer() -> f64 {
        40.0
    }
    fn d_half_width() -> f64 {
        0.5
    }
}

impl Default for ToyParams {
    fn default() -> Self {
        toml::from_str("").expect("empty table fills toy defaults")
    }
}

/// Parsed decay profile for the toy run.
#[derive(Debug, Clone, Copy)]
pub enum RhoSpec {
    /// `t^-k`; the logarithmic derivative on `[t_start, inf)` is `k / t`.
    Power(f64),
    /// `e^(-eta t)` with logarithmic derivative `eta`.
    Exponential(f64),
}

impl RhoSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .with_context(|| format!("decay profile `{s}` is not `kind:value`"))?;
        let v: f64 = value
            .parse()
            .with_context(|| format!("decay profile value `{value}` is not a number"))?;
        match kind {
            "power" if v > 0.0 => Ok(RhoSpec::Power(v)),
            "exp" if v > 0.0 => Ok(RhoSpec::Exponential(v)),
            "power" | "exp" => bail!("decay profile `{s}` needs a positive value"),
            _ => bail!("unknown decay profile kind `{kind}` (expected power or exp)"),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            RhoSpec::Power(k) => t.powf(-k),
            RhoSpec::Exponential(eta) => (-eta * t).exp(),
        }
    }

    /// Bound on `|rho'| / rho` over `[t_start, inf)`.
    pub fn log_derivative_bound(&self, t_start: f64) -> f64 {
        match *self {
            RhoSpec::Power(k) => k / t_start,
            RhoSpec::Exponential(eta) => eta,
        }
    }
}

/// Torus-model run: perturbed unstable section over the invariant circle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusParams {
    #[serde(default = "d_one")]
    pub alpha: f64,
    #[serde(default = "TorusParams::d_amplitude")]
    pub amplitude: f64,
    /// Forcing profile: `constant`, `sin-x`, or `sin-x-cos-t`.
    #[serde(default = "TorusParams::d_profile")]
    pub profile: String,
    #[serde(default = "d_tol_manifold")]
    pub tol: f64,
    #[serde(default = "d_t_start")]
    pub t_start: f64,
    /// The converged window must still cover up to this time.
    #[serde(default = "TorusParams::d_required_top")]
    pub required_top: f64,
    /// Top of the allocated grid; the part above `required_top` is the
    /// iteration budget.
    #[serde(default = "TorusParams::d_t_top")]
    pub t_top: f64,
    #[serde(default = "TorusParams::d_grid_step")]
    pub grid_step: f64,
    #[serde(default = "TorusParams::d_half_width")]
    pub base_half_width: f64,
    #[serde(default = "d_base_nodes")]
    pub base_nodes: usize,
}

impl TorusParams {
    fn d_amplitude() -> f64 {
        0.05
    }
    fn d_profile() -> String {
        "constant".into()
    }
    fn d_required_top() -> f64 {
        110.0
    }
    fn d_t_top() -> f64 {
        160.0
    }
    fn d_grid_step() -> f64 {
        0.25
    }
    fn d_half_width() -> f64 {
        0.25
    }
}

impl Default for TorusParams {
    fn default() -> Self {
        toml::from_str("").expect("empty table fills torus defaults")
    }
}

/// Trapped-point solve on a rotating black hole background.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KerrTrappedParams {
    #[serde(default = "d_one")]
    pub m: f64,
    #[serde(default)]
    pub a: f64,
    /// `equatorial` or `spherical`.
    #[serde(default = "KerrTrappedParams::d_mode")]
    pub mode: String,
    /// `prograde` or `retrograde`; picks the sign of the angular-momentum
    /// seed in equatorial mode.
    #[serde(default = "KerrTrappedParams::d_branch")]
    pub branch: String,
    #[serde(default = "d_one")]
    pub sigma: f64,
    /// Polar angle of the spherical-mode seed.
    #[serde(default = "KerrTrappedParams::d_theta")]
    pub theta: f64,
    #[serde(default = "KerrTrappedParams::d_tol")]
    pub tol: f64,
}

impl KerrTrappedParams {
    fn d_mode() -> String {
        "equatorial".into()
    }
    fn d_branch() -> String {
        "prograde".into()
    }
    fn d_theta() -> f64 {
        FRAC_PI_2
    }
    fn d_tol() -> f64 {
        1e-12
    }
}

impl Default for KerrTrappedParams {
    fn default() -> Self {
        toml::from_str("").expect("empty table fills kerr-trapped defaults")
    }
}

/// Expansion rates at a trapped point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KerrRatesParams {
    #[serde(default = "d_one")]
    pub m: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "KerrTrappedParams::d_branch")]
    pub branch: String,
    /// Conformal normalization: `rho-squared` or `unit`.
    #[serde(default = "KerrRatesParams::d_conformal")]
    pub conformal: String,
    #[serde(default = "KerrRatesParams::d_fd_step")]
    pub fd_step: f64,
    #[serde(default = "KerrTrappedParams::d_tol")]
    pub tol: f64,
}

impl KerrRatesParams {
    fn d_conformal() -> String {
        "rho-squared".into()
    }
    fn d_fd_step() -> f64 {
        1e-5
    }
}

impl Default for KerrRatesParams {
    fn default() -> Self {
        toml::from_str("").expect("empty table fills kerr-rates defaults")
    }
}

/// Stable-manifold run for a decaying metric perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KerrManifoldParams {
    #[serde(default = "d_one")]
    pub m: f64,
    #[serde(default = "KerrManifoldParams::d_a")]
    pub a: f64,
    #[serde(default = "KerrTrappedParams::d_branch")]
    pub branch: String,
    #[serde(default = "d_one")]
    pub alpha: f64,
    /// Zero amplitude runs the stationary background instead.
    #[serde(default = "KerrManifoldParams::d_amplitude")]
    pub amplitude: f64,
    /// Perturbation shape: `dt-dt-sin-r`, `dt-dt-unit`, or `sym-t-r-sin-r`.
    #[serde(default = "KerrManifoldParams::d_shape")]
    pub shape: String,
    #[serde(default = "KerrManifoldParams::d_epsilon")]
    pub epsilon: f64,
    #[serde(default = "d_t_start")]
    pub t_start: f64,
    #[serde(default = "KerrManifoldParams::d_required_top")]
    pub required_top: f64,
    #[serde(default = "KerrManifoldParams::d_iteration_buffer")]
    pub iteration_buffer: usize,
    #[serde(default = "KerrManifoldParams::d_n_t")]
    pub n_t: usize,
    #[serde(default = "d_base_nodes")]
    pub n_base: usize,
    #[serde(default = "KerrManifoldParams::d_tol")]
    pub tol: f64,
}

impl KerrManifoldParams {
    fn d_a() -> f64 {
        0.5
    }
    fn d_amplitude() -> f64 {
        0.01
    }
    fn d_shape() -> String {
        "dt-dt-sin-r".into()
    }
    fn d_epsilon() -> f64 {
        0.05
    }
    fn d_required_top() -> f64 {
        300.0
    }
    fn d_iteration_buffer() -> usize {
        80
    }
    fn d_n_t() -> usize {
        48
    }
    fn d_tol() -> f64 {
        1e-8
    }
}

impl Default for KerrManifoldParams {
    fn default() -> Self {
        toml::from_str("").expect("empty table fills kerr-manifold defaults")
    }
}

/// Verification battery selection.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    /// Run only criteria whose name contains this substring.
    #[serde(default)]
    pub only: Option<String>,
}

/// Range checks shared by file- and flag-sourced parameters. Every rejected
/// value is a config error (exit 1), not a numerical failure.
pub fn validate(config: &RunConfig) -> Result<()> {
    if let Some(p) = &config.toy {
        RhoSpec::parse(&p.rho)?;
        positive("toy.tol", p.tol)?;
        positive("toy.grid_step", p.grid_step)?;
        positive("toy.base_half_width", p.base_half_width)?;
        if p.t_start <= 0.0 || p.t_end <= p.t_start {
            bail!("toy needs 0 < t_start < t_end");
        }
        if p.grid_buffer < 0.0 {
            bail!("toy.grid_buffer must be nonnegative");
        }
        grid_nodes("toy.base_nodes", p.base_nodes)?;
    }
    if let Some(p) = &config.torus {
        torus_profile(&p.profile)?;
        positive("torus.alpha", p.alpha)?;
        positive("torus.tol", p.tol)?;
        positive("torus.grid_step", p.grid_step)?;
        positive("torus.base_half_width", p.base_half_width)?;
        if !p.amplitude.is_finite() {
            bail!("torus.amplitude must be finite");
        }
        if !(p.t_start < p.required_top && p.required_top < p.t_top) {
            bail!("torus needs t_start < required_top < t_top");
        }
        grid_nodes("torus.base_nodes", p.base_nodes)?;
    }
    if let Some(p) = &config.kerr_trapped {
        subextremal(p.m, p.a)?;
        trapped_mode(&p.mode)?;
        branch(&p.branch)?;
        positive("kerr_trapped.tol", p.tol)?;
        if p.sigma == 0.0 {
            bail!("kerr_trapped.sigma must be nonzero");
        }
        if !(0.0 < p.theta && p.theta < std::f64::consts::PI) {
            bail!("kerr_trapped.theta must lie in (0, pi)");
        }
    }
    if let Some(p) = &config.kerr_rates {
        subextremal(p.m, p.a)?;
        branch(&p.branch)?;
        conformal(&p.conformal)?;
        positive("kerr_rates.fd_step", p.fd_step)?;
        positive("kerr_rates.tol", p.tol)?;
    }
    if let Some(p) = &config.kerr_manifold {
        subextremal(p.m, p.a)?;
        branch(&p.branch)?;
        perturbation_shape(&p.shape)?;
        positive("kerr_manifold.alpha", p.alpha)?;
        positive("kerr_manifold.epsilon", p.epsilon)?;
        positive("kerr_manifold.tol", p.tol)?;
        if !p.amplitude.is_finite() {
            bail!("kerr_manifold.amplitude must be finite");
        }
        if !(p.t_start > 0.0 && p.required_top > p.t_start) {
            bail!("kerr_manifold needs 0 < t_start < required_top");
        }
        if p.n_t < 2 {
            bail!("kerr_manifold.n_t must be at least 2");
        }
        grid_nodes("kerr_manifold.n_base", p.n_base)?;
        if p.n_base % 2 == 0 {
            bail!("kerr_manifold.n_base must be odd so the orbit line is a grid node");
        }
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        bail!("{name} must be positive and finite (got {v})")
    }
}

fn grid_nodes(name: &str, n: usize) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        bail!("{name} must be at least 2 (got {n})")
    }
}

fn subextremal(m: f64, a: f64) -> Result<()> {
    if m > 0.0 && a.abs() < m {
        Ok(())
    } else {
        bail!("need a subextremal pair: m > 0 and |a| < m (got m = {m}, a = {a})")
    }
}

pub fn torus_profile(s: &str) -> Result<nhim::torus::PerturbationProfile> {
    use nhim::torus::PerturbationProfile::*;
    match s {
        "constant" => Ok(Constant),
        "sin-x" => Ok(SinX),
        "sin-x-cos-t" => Ok(SinXCosT),
        _ => bail!("unknown torus profile `{s}` (expected constant, sin-x, or sin-x-cos-t)"),
    }
}

pub fn trapped_mode(s: &str) -> Result<nhim::kerr::TrappedMode> {
    match s {
        "equatorial" => Ok(nhim::kerr::TrappedMode::Equatorial),
        "spherical" => Ok(nhim::kerr::TrappedMode::Spherical),
        _ => bail!("unknown trapped mode `{s}` (expected equatorial or spherical)"),
    }
}

pub fn branch(s: &str) -> Result<nhim::kerr::ReducedBranch> {
    match s {
        "prograde" => Ok(nhim::kerr::ReducedBranch::Prograde),
        "retrograde" => Ok(nhim::kerr::ReducedBranch::Retrograde),
        _ => bail!("unknown branch `{s}` (expected prograde or retrograde)"),
    }
}

pub fn conformal(s: &str) -> Result<nhim::kerr::ConformalFactor> {
    match s {
        "rho-squared" => Ok(nhim::kerr::ConformalFactor::RhoSquared),
        "unit" => Ok(nhim::kerr::ConformalFactor::Unit),
        _ => bail!("unknown conformal factor `{s}` (expected rho-squared or unit)"),
    }
}

pub fn perturbation_shape(s: &str) -> Result<nhim::kerr::PerturbationShape> {
    use nhim::kerr::PerturbationShape::*;
    match s {
        "dt-dt-sin-r" => Ok(DtDtSinR),
        "dt-dt-unit" => Ok(DtDtUnit),
        "sym-t-r-sin-r" => Ok(SymTRSinR),
        _ => bail!(
            "unknown perturbation shape `{s}` (expected dt-dt-sin-r, dt-dt-unit, \
             or sym-t-r-sin-r)"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_parses_with_no_command() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert!(cfg.command.is_none());
        assert!(cfg.toy.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_at_both_levels() {
        assert!(toml::from_str::<RunConfig>("commannd = \"toy\"").is_err());
        assert!(toml::from_str::<RunConfig>("command = \"toy\"\n[toy]\nrhoo = \"power:1\"")
            .is_err());
    }

    #[test]
    fn json_documents_are_accepted() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"command": "kerr-trapped", "kerr_trapped": {"a": 0.5}}"#)
                .unwrap();
        assert_eq!(cfg.command, Some(CommandName::KerrTrapped));
        assert_eq!(cfg.kerr_trapped.unwrap().a, 0.5);
    }

    #[test]
    fn rho_spec_parses_power_and_exponential() {
        assert!(matches!(RhoSpec::parse("power:1").unwrap(), RhoSpec::Power(k) if k == 1.0));
        assert!(matches!(RhoSpec::parse("exp:0.1").unwrap(), RhoSpec::Exponential(_)));
        assert!(RhoSpec::parse("power:-1").is_err());
        assert!(RhoSpec::parse("cubic:1").is_err());
        assert!(RhoSpec::parse("power").is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_parameters() {
        let mut cfg = RunConfig::default();
        cfg.kerr_trapped = Some(KerrTrappedParams {
            a: 1.5,
            ..KerrTrappedParams::default()
        });
        assert!(validate(&cfg).is_err());

        let mut cfg = RunConfig::default();
        cfg.toy = Some(ToyParams {
            tol: -1e-9,
            ..ToyParams::default()
        });
        assert!(validate(&cfg).is_err());
    }

    #[test]
    fn defaults_round_trip_through_empty_tables() {
        let p = ToyParams::default();
        assert_eq!(p.rho, "power:1");
        assert_eq!(p.tol, 1e-10);
        let k = KerrManifoldParams::default();
        assert_eq!(k.a, 0.5);
        assert_eq!(k.n_base % 2, 1);
    }
}
