//! Artifact plumbing: the run manifest, CSV writers, and the mapping from
//! library errors to the `{name, detail}` pair recorded on numerical
//! failure. CSV payloads are pure functions of the configuration and seed;
//! only the manifest carries timestamps.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// A run that started but could not finish: the originating module error
/// variant plus its rendered message.
#[derive(Debug, Clone)]
pub struct NumericalError {
    pub name: String,
    pub detail: String,
}

impl std::fmt::Display for NumericalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.detail, self.name)
    }
}

/// Leading identifier of a `Debug` rendering, which for an enum is the
/// variant name.
fn debug_variant(debug: &str) -> String {
    debug
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect()
}

pub fn graph_error(e: &nhim::graph_transform::GraphError) -> NumericalError {
    use nhim::graph_transform::GraphError;
    match e {
        GraphError::Dynamics(inner) => NumericalError {
            name: debug_variant(&format!("{inner:?}")),
            detail: inner.to_string(),
        },
        other => NumericalError {
            name: debug_variant(&format!("{other:?}")),
            detail: other.to_string(),
        },
    }
}

pub fn kerr_error(e: &nhim::kerr::KerrError) -> NumericalError {
    use nhim::kerr::KerrError;
    match e {
        KerrError::Graph(inner) => graph_error(inner),
        KerrError::Dynamics(inner) => NumericalError {
            name: debug_variant(&format!("{inner:?}")),
            detail: inner.to_string(),
        },
        other => NumericalError {
            name: debug_variant(&format!("{other:?}")),
            detail: other.to_string(),
        },
    }
}

/// Everything a finished command hands back for the manifest.
pub struct CommandOutcome {
    /// Command-specific constants, rates, and residuals.
    pub results: Value,
    /// File names (relative to the output directory) written by the run.
    pub outputs: Vec<String>,
    /// Set when the command completed its bookkeeping but the checked
    /// quantities failed; exits 2 with a full manifest.
    pub failure: Option<NumericalError>,
}

pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Fully merged configuration, echoed into the manifest.
    pub config_echo: RunConfig,
    pub clock: Instant,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, seed: u64, config_echo: RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output dir {}", out_dir.display()))?;
        Ok(Self {
            out_dir,
            seed,
            config_echo,
            clock: Instant::now(),
        })
    }

    pub fn path(&self, file_name: &str) -> PathBuf {
        self.out_dir.join(file_name)
    }

    /// Writes `<command>_manifest.json`. Timestamps live only here, so CSV
    /// payloads stay byte-identical across reruns.
    pub fn write_manifest(
        &self,
        command: &str,
        outcome: &Result<CommandOutcome, NumericalError>,
    ) -> Result<PathBuf> {
        let started_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64() - self.clock.elapsed().as_secs_f64())
            .unwrap_or(0.0);
        let (results, outputs, error) = match outcome {
            Ok(out) => (
                out.results.clone(),
                out.outputs.clone(),
                out.failure
                    .as_ref()
                    .map(|e| json!({ "name": e.name, "detail": e.detail })),
            ),
            Err(e) => (Value::Null, Vec::new(), Some(json!({
                "name": e.name,
                "detail": e.detail,
            }))),
        };
        let manifest = json!({
            "command": command,
            "package": {
                "name": env!("CARGO_PKG_NAME"),
                "version": env!("CARGO_PKG_VERSION"),
            },
            "config": serde_json::to_value(&self.config_echo)?,
            "seed": self.seed,
            "output_dir": self.out_dir.display().to_string(),
            "outputs": outputs,
            "started_unix_s": started_unix_s,
            "wall_time_s": self.clock.elapsed().as_secs_f64(),
            "results": results,
            "error": error.unwrap_or(Value::Null),
        });
        let path = self.path(&format!("{}_manifest.json", command.replace('-', "_")));
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One-row CSV with explicit headers, used for solve-style commands.
pub fn write_csv_row(path: &Path, headers: &[&str], row: &[String]) -> Result<()> {
    assert_eq!(headers.len(), row.len());
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(headers)?;
    w.write_record(row)?;
    w.flush()?;
    Ok(())
}

/// Full float precision so reruns are byte-comparable and values round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_strip_payloads() {
        assert_eq!(debug_variant("WindowStartTooEarly { rho_t0: 1.0 }"), "WindowStartTooEarly");
        assert_eq!(debug_variant("AllZero"), "AllZero");
        assert_eq!(debug_variant("InvalidGrid(\"x\")"), "InvalidGrid");
    }

    #[test]
    fn kerr_wrappers_unwrap_to_the_inner_variant() {
        let inner = nhim::graph_transform::GraphError::AllZero;
        let wrapped = nhim::kerr::KerrError::Graph(inner);
        assert_eq!(kerr_error(&wrapped).name, "AllZero");
    }
}
