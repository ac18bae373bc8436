//! Scenario runner for two-ion Ramsey/parity spectroscopy simulations.
//!
//! Loads a declarative scenario file (TOML, `.scn`), executes the named
//! experiment through the `pairspec` engine and writes three artifacts next
//! to each other: a trace table (CSV or JSON), a fit report (JSON) and a
//! run manifest (JSON) from which the run can be reproduced byte-for-byte.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod builtins;
pub mod runner;
pub mod scenario;

use runner::{execute, Artifacts, Manifest, RunOptions};
use scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    FitNonConvergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// run exits 0 on success, 2 on validation errors, 3 when a required
    /// fit does not converge, 1 on I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::FitNonConvergence(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// What `run` was given: a scenario, possibly carrying manifest defaults.
pub struct ResolvedInput {
    pub scenario: Scenario,
    pub manifest_defaults: Option<RunOptions>,
}

/// Resolve a CLI `run` argument: an existing scenario or manifest file, or
/// the name of a built-in scenario.
pub fn resolve_input(input: &str) -> Result<ResolvedInput, CliError> {
    let path = Path::new(input);
    let text = if path.exists() {
        std::fs::read_to_string(path)?
    } else if let Some(builtin) = builtins::builtin(input) {
        builtin.to_string()
    } else {
        return Err(CliError::Validation(format!(
            "no scenario file or built-in scenario named {input:?} \
             (see `pairspec list-scenarios`)"
        )));
    };

    if text.trim_start().starts_with('{') {
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("manifest: {e}")))?;
        if manifest.pairspec_manifest != 1 {
            return Err(CliError::Validation(format!(
                "unsupported manifest version {}",
                manifest.pairspec_manifest
            )));
        }
        Ok(ResolvedInput {
            scenario: manifest.scenario.clone(),
            manifest_defaults: Some(RunOptions {
                seed: Some(manifest.seed),
                shots_override: Some(manifest.shots_per_point),
                format: Some(manifest.trace_format),
            }),
        })
    } else {
        Ok(ResolvedInput {
            scenario: Scenario::parse(&text)?,
            manifest_defaults: None,
        })
    }
}

/// Output files written by a run.
#[derive(Debug)]
pub struct RunSummary {
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub artifacts: Artifacts,
}

/// Resolve, execute and write a run. CLI flags in `opts` take precedence
/// over manifest defaults.
pub fn run_to_dir(
    input: &str,
    opts: &RunOptions,
    out_dir: Option<&Path>,
) -> Result<RunSummary, CliError> {
    let resolved = resolve_input(input)?;
    let defaults = resolved.manifest_defaults.unwrap_or_default();
    let effective = RunOptions {
        seed: opts.seed.or(defaults.seed),
        shots_override: opts.shots_override.or(defaults.shots_override),
        format: opts.format.or(defaults.format),
    };
    let artifacts = execute(&resolved.scenario, &effective)?;

    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => PathBuf::from(resolved.scenario.outputs.as_deref().unwrap_or("out")),
    };
    std::fs::create_dir_all(&dir)?;

    let trace_path = dir.join(format!("{}.{}", artifacts.name, artifacts.format.extension()));
    let report_path = dir.join(format!("{}_report.json", artifacts.name));
    let manifest_path = dir.join(format!("{}_manifest.json", artifacts.name));
    std::fs::write(&trace_path, artifacts.trace_bytes.as_bytes())?;
    std::fs::write(&report_path, artifacts.report_json.as_bytes())?;
    std::fs::write(&manifest_path, artifacts.manifest_json.as_bytes())?;

    Ok(RunSummary {
        trace_path,
        report_path,
        manifest_path,
        artifacts,
    })
}

/// Human-readable description of a built-in scenario.
pub fn describe(name: &str) -> Result<String, CliError> {
    let text = builtins::builtin(name)
        .ok_or_else(|| CliError::Validation(format!("unknown scenario {name:?}")))?;
    let scenario = Scenario::parse(text)?;
    let mut out = String::new();
    out.push_str(&format!("{} (kind: {})\n", scenario.name, scenario.kind));
    out.push_str(&format!(
        "  seed {} | {} shots per point\n",
        scenario.seed, scenario.shots_per_point
    ));
    if let Some(wait) = &scenario.wait_scan {
        out.push_str(&format!(
            "  wait scan: {} points from {} s to {} s (+{} extra), fit excludes t < {} s\n",
            wait.points,
            wait.start_s,
            wait.stop_s,
            wait.extra_s.len(),
            wait.fit_exclude_below_s
        ));
    }
    if let Some(phase) = &scenario.phase_scan {
        out.push_str(&format!(
            "  phase scan: {} phases over [0, 2π) at waits {:?} s\n",
            phase.points, phase.waits_s
        ));
    }
    if let Some(quad) = &scenario.quadrupole {
        if quad.gradients_v_per_mm2.is_empty() {
            out.push_str("  gradients: derived from the trap axial frequency\n");
        } else {
            out.push_str(&format!(
                "  gradients: {:?} V/mm²\n",
                quad.gradients_v_per_mm2
            ));
        }
    }
    if let Some(grad) = &scenario.gradient {
        out.push_str(&format!(
            "  field gradient {} G/m, distance {}\n",
            grad.db_per_dz_g_per_m,
            grad.distance_m
                .map(|d| format!("{d} m"))
                .unwrap_or_else(|| "from trap".into()),
        ));
    }
    out.push_str("\n--- scenario file ---\n");
    out.push_str(text);
    Ok(out)
}
